"""Transcript JSON schema.

Full validation uses ``jsonschema`` when it is installed; otherwise only the
required top-level keys and the step/turn keys are checked.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from duet.errors import InvalidTranscript


@lru_cache(maxsize=1)
def transcript_schema() -> dict:
    text = resources.files("duet.data").joinpath("transcript.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _required_keys(doc, schema: dict, where: str) -> None:
    if not isinstance(doc, dict):
        raise InvalidTranscript(f"{where}: expected an object")
    missing = [k for k in schema.get("required", ()) if k not in doc]
    if missing:
        raise InvalidTranscript(f"{where}: missing keys {missing}")


def validate_transcript(doc) -> None:
    schema = transcript_schema()
    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    if jsonschema is not None:
        try:
            jsonschema.validate(doc, schema)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise InvalidTranscript(f"{path}: {exc.message}") from None
        return
    _required_keys(doc, schema, "<root>")
    for i, s in enumerate(doc["steps"]):
        _required_keys(s, schema["$defs"]["step"], f"steps/{i}")
    for i, t in enumerate(doc["turns"]):
        _required_keys(t, schema["$defs"]["turn"], f"turns/{i}")
