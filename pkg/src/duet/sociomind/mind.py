"""Agent cognition: behavior generation, approval, reflection and planning.

Every language-model interaction goes through a provider's ``complete``.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Sequence

from duet import behavior as bdsl
from duet.behavior import Behavior, BehaviorOrEnd, End
from duet.embedding import HashingEmbedder
from duet.errors import DomainError, MalformedReflection, NoCandidates
from duet.sociomind import prompts
from duet.sociomind.memory import MemoryItem, MemoryStore, retrieve_memories
from duet.sociomind.persona import PersonaDB, load_persona_csv, retrieve_persona_instructions
from duet.sociomind.provider import request_json
from duet.sociomind.state import PAD, PsychState, Relationship, clamp_likert

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_TOPIC = 2.0


@dataclass
class AgentMind:
    """Single-owner mutable cognitive state of one character."""

    name: str
    state: PsychState
    memory: MemoryStore = None
    persona_db: PersonaDB = None
    episode: int = 0
    background_history: list = field(default_factory=list)
    recent_events: list = field(default_factory=list)
    M: int = 3
    n_persona: int = 3

    def __post_init__(self):
        if self.memory is None:
            self.memory = MemoryStore(HashingEmbedder())
        if self.persona_db is None:
            self.persona_db = load_persona_csv(embedder=self.memory.embedder)

    def advance_episode(self) -> None:
        self.episode += 1

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "episode": self.episode,
            "state": self.state.to_json(),
            "background_history": list(self.background_history),
            "memory": self.memory.to_json(),
        }


@dataclass(frozen=True)
class Turn:
    speaker: str
    behavior: BehaviorOrEnd

    def text(self) -> str:
        return bdsl.END_LITERAL if self.behavior is End else bdsl.serialize(self.behavior)

    def to_json(self) -> dict:
        return {"speaker": self.speaker, "behavior": self.text()}


@dataclass(frozen=True)
class Topic:
    description: str
    poignancy: int
    emergency: int

    def __post_init__(self):
        object.__setattr__(self, "poignancy", clamp_likert(self.poignancy, "poignancy"))
        object.__setattr__(self, "emergency", clamp_likert(self.emergency, "emergency"))

    def to_json(self) -> dict:
        return {"description": self.description, "poignancy": self.poignancy, "emergency": self.emergency}


@dataclass(frozen=True)
class CharacterSetting:
    emotion: str = ""
    place: str = ""
    motion: str = ""

    def to_json(self) -> dict:
        return {"emotion": self.emotion, "place": self.place, "motion": self.motion}


@dataclass(frozen=True)
class BackgroundCandidate:
    background: str
    poignancy: int
    emergency: int
    topic_ids: tuple = ()
    initial_settings: dict = field(default_factory=dict)  # name -> CharacterSetting
    proposer: str = ""

    def score(self, lambda_topic: float = DEFAULT_LAMBDA_TOPIC) -> float:
        return lambda_topic * self.emergency + self.poignancy

    def to_json(self) -> dict:
        return {
            "background": self.background,
            "poignancy": self.poignancy,
            "emergency": self.emergency,
            "topic_ids": list(self.topic_ids),
            "initial_settings": {k: v.to_json() for k, v in self.initial_settings.items()},
            "proposer": self.proposer,
        }


@dataclass(frozen=True)
class Reflection:
    events: list
    thoughts: list
    state: PsychState


# -- prompt assembly ------------------------------------------------------
def _escape(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)[1:-1]


def render_context(agent_name: str, context: Sequence[Turn]) -> str:
    """Chat-style lines; the agent's own turns are the assistant role."""
    lines = []
    for turn in context:
        role = "assistant" if turn.speaker == agent_name else "user"
        lines.append(prompts.BEHAVIOR_TURN.substitute(role=role, content=_escape(turn.text())))
    return "\n".join(lines)


def _memory_lines(items) -> str:
    return prompts.bullet(i.description for i in items)


def _persona_lines(instructions) -> str:
    return prompts.bullet(i.rendered for i in instructions)


def build_behavior_prompt(agent: AgentMind, partner: str, background: str, topics: Sequence, context: Sequence[Turn]) -> str:
    recent = context[-1].text() if context else ""
    query = f"{background}\n{recent}"
    memories = retrieve_memories(agent.memory, query, agent.M, agent.episode)
    persona = retrieve_persona_instructions(agent.persona_db, query, agent.state, agent.n_persona)
    topic_text = prompts.bullet(t.description if isinstance(t, Topic) else str(t) for t in topics)
    parts = [
        prompts.BEHAVIOR_SYSTEM.substitute(
            self_name=agent.name, partner_name=partner, states=agent.state.render(), background=background, topics=topic_text
        )
    ]
    if context:
        parts.append(render_context(agent.name, context))
    parts.append(prompts.BEHAVIOR_USER.substitute(memories=_memory_lines(memories), persona=_persona_lines(persona)))
    return "\n".join(parts)


# -- short-term communication --------------------------------------------
def generate_behavior(agent: AgentMind, partner: str, background: str, topics: Sequence, context: Sequence[Turn], provider) -> BehaviorOrEnd:
    prompt = build_behavior_prompt(agent, partner, background, topics, context)
    raw = provider.complete(prompt).strip()
    return bdsl.normalize_with_provider(raw, provider)


_YES = {"yes", "y", "yeah", "yep", "sure", "ok", "okay", "agree", "true"}


def parse_approval(answer: str) -> bool:
    """First word decides; anything but an affirmative reads as refusal."""
    m = re.match(r"\s*[\"'*]*([A-Za-z]+)", answer or "")
    return bool(m) and m.group(1).lower() in _YES


def approve_passive(agent: AgentMind, partner: str, suggested: Behavior, context: Sequence[Turn], provider) -> bool:
    query = bdsl.serialize(suggested)
    memories = retrieve_memories(agent.memory, query, agent.M, agent.episode)
    prompt = prompts.APPROVAL.substitute(
        self_name=agent.name,
        states=agent.state.render(),
        context=render_context(agent.name, context) or "none",
        memories=_memory_lines(memories),
        partner_name=partner,
        suggested=query,
    )
    return parse_approval(provider.complete(prompt))


# -- reflection -----------------------------------------------------------
def _likert(doc: dict, key: str, default=None) -> int:
    if key not in doc:
        if default is None:
            raise MalformedReflection(f"missing field {key!r}")
        return default
    try:
        return clamp_likert(doc[key], key)
    except DomainError as exc:
        raise MalformedReflection(str(exc)) from None


def _text(doc, key: str) -> str:
    if not isinstance(doc, dict) or not isinstance(doc.get(key), str):
        raise MalformedReflection(f"missing text field {key!r}")
    return doc[key]


def _items(docs, kind: str, episode: int) -> list[MemoryItem]:
    out = []
    for d in docs:
        desc = _text(d, "description")
        kw = d.get("keywords", [])
        if not isinstance(kw, list):
            raise MalformedReflection("keywords must be a list")
        out.append(
            MemoryItem(
                kind,
                desc,
                [str(k) for k in kw],
                _likert(d, "poignancy", 5),
                _likert(d, "emergency", 5) if kind == "event" else None,
                0,
                episode,
            )
        )
    return out


def reflect_episode(agent: AgentMind, partner: str, transcript: Sequence[Turn], provider) -> Reflection:
    """Summarize events, derive thoughts, then update motivation and relationship.

    New items are stored with zero accesses. An empty transcript is a no-op.
    """
    turns = [t for t in transcript if t.behavior is not End]
    if not turns:
        return Reflection([], [], agent.state)
    context = render_context(agent.name, transcript)
    persona = retrieve_persona_instructions(agent.persona_db, context, agent.state, agent.n_persona)
    states = agent.state.render()

    events = _items(
        request_json(
            provider,
            prompts.EVENT_SUMMARY.substitute(self_name=agent.name, states=states, persona=_persona_lines(persona), context=context),
            list,
        ),
        "event",
        agent.episode,
    )
    event_text = prompts.bullet(e.description for e in events)
    memories = retrieve_memories(agent.memory, event_text, agent.M, agent.episode)
    thoughts = _items(
        request_json(
            provider,
            prompts.THOUGHTS.substitute(
                self_name=agent.name, states=states, persona=_persona_lines(persona), events=event_text, memories=_memory_lines(memories)
            ),
            list,
        ),
        "thought",
        agent.episode,
    )
    experienced = prompts.bullet([e.description for e in events] + [t.description for t in thoughts])

    old = agent.state.relationship(partner)
    rel_doc = request_json(
        provider,
        prompts.RELATIONSHIP.substitute(
            self_name=agent.name,
            states=states,
            persona=_persona_lines(persona),
            events=experienced,
            partner_name=partner,
            relationship=old.render(),
        ),
        dict,
    )
    rel = Relationship(
        _likert(rel_doc, "trust", old.trust),
        _likert(rel_doc, "intimacy", old.intimacy),
        _likert(rel_doc, "supportiveness", old.supportiveness),
        str(rel_doc.get("attitude", old.attitude)),
        str(rel_doc.get("description", old.description)),
    )
    mot = request_json(provider, prompts.MOTIVATION.substitute(self_name=agent.name, states=states, events=experienced), dict)
    state = replace(
        agent.state.with_relationship(partner, rel),
        long_term_motivation=str(mot.get("long_term_motivation", agent.state.long_term_motivation)),
        short_term_motivation=str(mot.get("short_term_motivation", agent.state.short_term_motivation)),
        central_belief=str(mot.get("central_belief", agent.state.central_belief)),
    )
    for item in events + thoughts:
        agent.memory.add(item)
    agent.recent_events = events
    agent.state = state
    return Reflection(events, thoughts, state)


def translate_numeric_to_text(state: PsychState, provider) -> str:
    e = state.emotion
    prompt = prompts.PAD_TO_TEXT.substitute(pleasure=e["pleasure"], arousal=e["arousal"], dominance=e["dominance"])
    return provider.complete(prompt).strip()


def introspect_emotion(agent: AgentMind, context: Sequence[Turn], provider) -> PsychState:
    """Re-estimate PAD from the conversation so far and refresh its description."""
    doc = request_json(
        provider,
        prompts.EMOTION_UPDATE.substitute(self_name=agent.name, states=agent.state.render(), context=render_context(agent.name, context) or "none"),
        dict,
    )
    dims = {d: _likert(doc, d, agent.state.emotion.get(d, 5)) for d in PAD}
    numeric = agent.state.with_emotion(None, **dims)
    agent.state = numeric.with_emotion(translate_numeric_to_text(numeric, provider))
    return agent.state


# -- planning -------------------------------------------------------------
def propose_topics(agent: AgentMind, manual_events: Sequence[str], provider) -> list[Topic]:
    events = [e.description for e in agent.recent_events] + [str(m) for m in manual_events]
    query = prompts.bullet(events) if events else agent.state.short_term_motivation
    memories = retrieve_memories(agent.memory, query, agent.M, agent.episode)
    persona = retrieve_persona_instructions(agent.persona_db, query, agent.state, agent.n_persona)
    prompt = prompts.TOPICS.substitute(
        self_name=agent.name,
        states=agent.state.render(),
        persona=_persona_lines(persona),
        backgrounds=prompts.bullet(agent.background_history),
        events=prompts.bullet(events),
        memories=_memory_lines(memories),
    )
    docs = request_json(provider, prompt, list)
    return [Topic(_text(d, "description"), _likert(d, "poignancy"), _likert(d, "emergency")) for d in docs]


def _settings(doc) -> dict:
    if not isinstance(doc, dict):
        return {}
    out = {}
    for name, s in doc.items():
        if isinstance(s, dict):
            out[str(name)] = CharacterSetting(str(s.get("emotion", "")), str(s.get("place", "")), str(s.get("motion", "")))
    return out


def propose_backgrounds(agent: AgentMind, partner: str, topics: Sequence[Topic], places: Sequence[str], provider) -> list[BackgroundCandidate]:
    if not topics:
        raise DomainError("background proposal needs at least one topic")
    persona = retrieve_persona_instructions(agent.persona_db, prompts.bullet(t.description for t in topics), agent.state, agent.n_persona)
    prompt = prompts.BACKGROUNDS.substitute(
        self_name=agent.name,
        partner_name=partner,
        states=agent.state.render(),
        persona=_persona_lines(persona),
        history=prompts.bullet(agent.background_history),
        topics=prompts.numbered(t.description for t in topics),
        places=", ".join(places),
    )
    out = []
    for i, d in enumerate(request_json(provider, prompt, list)):
        ids = d.get("topic ids", d.get("topic_ids", [])) if isinstance(d, dict) else None
        if not isinstance(ids, list) or not all(isinstance(t, int) and not isinstance(t, bool) and 0 <= t < len(topics) for t in ids):
            logger.warning("background candidate %d references unknown topics %r, dropped", i, ids)
            continue
        out.append(
            BackgroundCandidate(
                _text(d, "background"),
                _likert(d, "poignancy"),
                _likert(d, "emergency"),
                tuple(ids),
                _settings(d.get("initial setting", d.get("initial_setting"))),
                agent.name,
            )
        )
    return out


def select_background(candidates_a: Sequence[BackgroundCandidate], candidates_b: Sequence[BackgroundCandidate], lambda_topic: float = DEFAULT_LAMBDA_TOPIC) -> BackgroundCandidate:
    """Highest ``lambda * emergency + poignancy``; ties go to A, then lower index."""
    pool = [(-c.score(lambda_topic), who, i, c) for who, cands in enumerate((candidates_a, candidates_b)) for i, c in enumerate(cands)]
    if not pool:
        raise NoCandidates("no background candidates from either character")
    return min(pool, key=lambda x: x[:3])[3]
