"""Structured behavior messages: ``<speech>Hello!<motion>waves right hand<place>table``.

A behavior is an ordered list of ``(key, value)`` pairs. Keys are lowercase
tokens in angle brackets; a value runs until the next key token. Values are
kept verbatim (no trimming) so that ``parse(serialize(b)) == b``.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterator, Union

from duet.errors import MalformedBehavior, ReformatFailed, UnterminatedKey

logger = logging.getLogger(__name__)

KNOWN_KEYS = ("speech", "motion", "place")
END_LITERAL = "END"

_KEY_RE = re.compile(r"<([a-z_]+)>")
_KEY_NAME_RE = re.compile(r"[a-z_]+")
_DANGLING_RE = re.compile(r"<[a-z_]+$")

REFORMAT_PROMPT = (
    "Rewrite the text below as a behavior message of the form "
    "<speech>what is said<motion>what the body does<place>where it happens. "
    "Keep the meaning, drop anything else, and output only the behavior message.\n"
    "Text: {raw}"
)


class _End:
    """Conversation terminator. Carries no payload."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "End"

    def __reduce__(self):
        return (_End, ())


End = _End()


@dataclass(frozen=True)
class Behavior:
    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        entries = tuple((str(k), str(v)) for k, v in self.entries)
        if not entries:
            raise MalformedBehavior("a behavior needs at least one key")
        for key, value in entries:
            if not _KEY_NAME_RE.fullmatch(key):
                raise MalformedBehavior(f"invalid key {key!r}")
            if _KEY_RE.search(value) or _DANGLING_RE.search(value):
                raise MalformedBehavior(f"value for {key!r} contains a key token")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, **values: str) -> "Behavior":
        return cls(tuple(values.items()))

    def get(self, key: str, default: str | None = None) -> str | None:
        """Raw value of the last occurrence of ``key``."""
        for k, v in reversed(self.entries):
            if k == key:
                return v
        return default

    def value(self, key: str) -> str:
        """Whitespace-trimmed value, empty string when absent."""
        return (self.get(key) or "").strip()

    @property
    def speech(self) -> str:
        return self.value("speech")

    @property
    def motion(self) -> str:
        return self.value("motion")

    @property
    def place(self) -> str:
        return self.value("place")

    def keys(self) -> list[str]:
        return [k for k, _ in self.entries]

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self.entries)

    def as_dict(self) -> dict[str, str]:
        return {k: v for k, v in self.entries}


BehaviorOrEnd = Union[Behavior, _End]


def parse(text: str | bytes) -> BehaviorOrEnd:
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    if text.strip() == END_LITERAL:
        return End
    matches = list(_KEY_RE.finditer(text))
    if _DANGLING_RE.search(text):
        raise UnterminatedKey("text ends inside a key token")
    if not matches:
        opener = re.search(r"<[a-z_]", text)
        if opener and ">" not in text[opener.start():]:
            raise UnterminatedKey("'<' without a matching '>'")
        raise MalformedBehavior("no <key> token found")
    if text[: matches[0].start()].strip():
        raise MalformedBehavior("unexpected text before the first key")
    entries = []
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        entries.append((m.group(1), text[m.end():end]))
    return Behavior(tuple(entries))


def serialize(behavior: Behavior) -> str:
    return "".join(f"<{k}>{v}" for k, v in behavior.entries)


def normalize_with_provider(raw_llm_text: str, provider, retries: int = 2) -> BehaviorOrEnd:
    """Parse LLM output, asking the provider to reformat it when malformed."""
    try:
        return parse(raw_llm_text)
    except MalformedBehavior as exc:
        last_error: Exception = exc
    text = raw_llm_text
    for attempt in range(retries):
        logger.debug("reformatting behavior (attempt %d): %r", attempt + 1, text)
        text = provider.complete(REFORMAT_PROMPT.format(raw=raw_llm_text))
        try:
            return parse(text)
        except MalformedBehavior as exc:
            last_error = exc
    raise ReformatFailed(f"could not obtain a behavior after {retries} retries: {last_error}")
