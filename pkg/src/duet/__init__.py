"""Two-character social interaction engine: motion matching, contact
refinement, active/passive scheduling and an LLM-backed cognitive kernel."""

__version__ = "0.1.0"
