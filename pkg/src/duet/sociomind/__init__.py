"""Cognitive kernel: psychological state, memory, persona and reasoning."""

from duet.sociomind.memory import (
    DEFAULT_PARAMS,
    ForgettingParams,
    MemoryItem,
    MemoryStore,
    forgetting_rate,
    memory_score,
    retrieve_memories,
)
from duet.sociomind.mind import (
    AgentMind,
    BackgroundCandidate,
    CharacterSetting,
    Reflection,
    Topic,
    Turn,
    approve_passive,
    build_behavior_prompt,
    generate_behavior,
    introspect_emotion,
    parse_approval,
    propose_backgrounds,
    propose_topics,
    reflect_episode,
    render_context,
    select_background,
    translate_numeric_to_text,
)
from duet.sociomind.persona import (
    PERSONA_TEMPLATE,
    PersonaDB,
    PersonaInstruction,
    load_persona_csv,
    load_persona_db,
    retrieve_persona_instructions,
)
from duet.sociomind.provider import HttpProvider, MockProvider, Provider, extract_json, make_provider, request_json
from duet.sociomind.state import PsychState, Relationship, clamp_likert
