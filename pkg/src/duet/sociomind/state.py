"""Psychological state: personality, emotion, motivation, belief and relationships."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from duet.errors import DomainError

logger = logging.getLogger(__name__)

LIKERT_MIN, LIKERT_MAX = 1, 9
BIG_FIVE = ("openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism")
PAD = ("pleasure", "arousal", "dominance")
RELATION_DIMS = ("trust", "intimacy", "supportiveness")


def clamp_likert(value, name: str = "value") -> int:
    """Round and clamp to the 1..9 scale, warning when the input was out of range."""
    try:
        v = int(round(float(value)))
    except (TypeError, ValueError):
        raise DomainError(f"{name} is not numeric: {value!r}") from None
    if v < LIKERT_MIN or v > LIKERT_MAX:
        logger.warning("%s=%s outside [1, 9], clamped", name, value)
        v = min(max(v, LIKERT_MIN), LIKERT_MAX)
    return v


def _check(value: int, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not LIKERT_MIN <= value <= LIKERT_MAX:
        raise DomainError(f"{name} must be an integer in [1, 9], got {value!r}")
    return value


@dataclass(frozen=True)
class Relationship:
    trust: int = 5
    intimacy: int = 5
    supportiveness: int = 5
    attitude: str = ""
    description: str = ""

    def __post_init__(self):
        for d in RELATION_DIMS:
            _check(getattr(self, d), d)

    def render(self) -> str:
        text = f"trust: {self.trust}, intimacy: {self.intimacy}, supportiveness: {self.supportiveness}"
        if self.attitude:
            text += f", attitude: {self.attitude}"
        if self.description:
            text += f", {self.description}"
        return text

    def to_json(self) -> dict:
        return {d: getattr(self, d) for d in (*RELATION_DIMS, "attitude", "description")}

    @classmethod
    def from_json(cls, doc: dict) -> "Relationship":
        return cls(
            *(clamp_likert(doc.get(d, 5), d) for d in RELATION_DIMS),
            str(doc.get("attitude", "")),
            str(doc.get("description", "")),
        )


@dataclass(frozen=True)
class PsychState:
    personality: dict = field(default_factory=dict)  # Big Five name -> 1..9
    personality_text: str = ""
    emotion: dict = field(default_factory=lambda: {d: 5 for d in PAD})
    emotion_text: str = ""
    long_term_motivation: str = ""
    short_term_motivation: str = ""
    central_belief: str = ""
    relationships: dict = field(default_factory=dict)  # partner name -> Relationship

    def __post_init__(self):
        for k, v in self.personality.items():
            if k not in BIG_FIVE:
                raise DomainError(f"unknown personality dimension {k!r}")
            _check(v, k)
        for k, v in self.emotion.items():
            if k not in PAD:
                raise DomainError(f"unknown emotion dimension {k!r}")
            _check(v, k)
        for r in self.relationships.values():
            if not isinstance(r, Relationship):
                raise DomainError("relationships must map names to Relationship")

    def with_emotion(self, text: str | None = None, **dims) -> "PsychState":
        emotion = dict(self.emotion)
        emotion.update({k: clamp_likert(v, k) for k, v in dims.items() if k in PAD})
        return replace(self, emotion=emotion, emotion_text=self.emotion_text if text is None else text)

    def with_relationship(self, partner: str, rel: Relationship) -> "PsychState":
        rels = dict(self.relationships)
        rels[partner] = rel
        return replace(self, relationships=rels)

    def relationship(self, partner: str) -> Relationship:
        return self.relationships.get(partner, Relationship())

    def render(self) -> str:
        parts = []
        pers = ", ".join(f"{k}: {v}" for k, v in self.personality.items())
        parts.append("Personality: " + "; ".join(p for p in (self.personality_text, pers) if p))
        emo = ", ".join(f"{k}: {self.emotion[k]}" for k in PAD if k in self.emotion)
        parts.append("Emotion: " + ", ".join(p for p in (self.emotion_text, emo) if p))
        parts.append(f"Motivation: long-term: {self.long_term_motivation}; short-term: {self.short_term_motivation}")
        parts.append(f"Central belief: {self.central_belief}")
        for name in sorted(self.relationships):
            parts.append(f"Relationship with {name}: {self.relationships[name].render()}")
        return ";\n".join(parts) + ";"

    def to_json(self) -> dict:
        return {
            "personality": dict(self.personality),
            "personality_text": self.personality_text,
            "emotion": dict(self.emotion),
            "emotion_text": self.emotion_text,
            "long_term_motivation": self.long_term_motivation,
            "short_term_motivation": self.short_term_motivation,
            "central_belief": self.central_belief,
            "relationships": {k: v.to_json() for k, v in sorted(self.relationships.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PsychState":
        return cls(
            {k: clamp_likert(v, k) for k, v in doc.get("personality", {}).items()},
            str(doc.get("personality_text", "")),
            {k: clamp_likert(v, k) for k, v in doc.get("emotion", {d: 5 for d in PAD}).items()},
            str(doc.get("emotion_text", "")),
            str(doc.get("long_term_motivation", "")),
            str(doc.get("short_term_motivation", "")),
            str(doc.get("central_belief", "")),
            {k: Relationship.from_json(v) for k, v in doc.get("relationships", {}).items()},
        )
