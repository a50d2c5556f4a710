"""Language-model provider port: a deterministic mock and an HTTP client."""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
import urllib.request
from typing import Callable, Protocol, Sequence

from duet.errors import MalformedReflection, ProviderError
from duet.sociomind import prompts


class Provider(Protocol):
    def complete(self, prompt: str, params: dict | None = None) -> str: ...


def stable_hash(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


# -- lenient JSON ---------------------------------------------------------
def extract_json(text: str):
    """First JSON object or array embedded in ``text``; trailing commas tolerated."""
    starts = [i for i, ch in enumerate(text) if ch in "[{"]
    decoder = json.JSONDecoder()
    for i in starts:
        chunk = text[i:]
        for candidate in (chunk, re.sub(r",\s*([\]}])", r"\1", chunk)):
            try:
                value, _ = decoder.raw_decode(candidate)
                return value
            except json.JSONDecodeError:
                continue
    raise ValueError("no JSON value found")


def request_json(provider: Provider, prompt: str, expect: type | None = None):
    """Ask for JSON; on a parse failure ask once more for a reformatted answer."""
    raw = provider.complete(prompt)
    for attempt in range(2):
        try:
            value = extract_json(raw)
            if expect is list and isinstance(value, dict):
                value = [value]
            if expect is not None and not isinstance(value, expect):
                raise ValueError(f"expected {expect.__name__}")
            return value
        except ValueError:
            if attempt == 0:
                raw = provider.complete(prompts.JSON_REFORMAT.substitute(raw=raw))
    raise MalformedReflection(f"provider output is not valid JSON: {raw[:200]!r}")


# -- mock -----------------------------------------------------------------
Rule = tuple[str, "str | Callable[[str, re.Match, int], str]"]

MOTIONS = ("shake hands", "wave hello", "high five", "hug", "fist bump", "pat on the shoulder")
PLACES = ("center", "sofa", "table", "bookshelf", "desk")
LINES = (
    "Hello there!",
    "How have you been lately?",
    "I was just thinking about you.",
    "That reminds me of something.",
    "Let's sit for a while.",
    "I missed our talks.",
    "You look tired today.",
    "Tell me more about it.",
)
_PAD_WORDS = {
    "pleasure": ("displeased", "content", "delighted"),
    "arousal": ("calm", "attentive", "agitated"),
    "dominance": ("submissive", "composed", "in control"),
}


def _level(v: int) -> int:
    return 0 if v <= 3 else 1 if v <= 6 else 2


def _mock_pad(prompt, m, seed):
    p, a, d = (int(m.group(i)) for i in (1, 2, 3))
    if (p, a, d) == (3, 5, 4):
        return "Mild dissatisfaction or discontentment, coupled with a sense of alertness but not empowerment."
    words = [_PAD_WORDS[k][_level(v)] for k, v in zip(("pleasure", "arousal", "dominance"), (p, a, d))]
    return f"Feeling {words[0]}, {words[1]} and {words[2]}."


def _turns(prompt: str) -> list[str]:
    return re.findall(r'\{"role": "(?:assistant|user)", "content": "(<[^"]*)"\}', prompt)


def _mock_behavior(prompt, m, seed):
    h = stable_hash("behavior", seed, prompt)
    if len(_turns(prompt)) >= 4 and h % 8 == 0:
        return "END"
    speech = LINES[(h >> 4) % len(LINES)]
    motion = MOTIONS[(h >> 12) % len(MOTIONS)]
    place = PLACES[(h >> 20) % len(PLACES)]
    return f"<speech>{speech}<motion>{motion}<place>{place}"


def _mock_reformat_behavior(prompt, m, seed):
    raw = m.group(1)
    pairs = re.findall(r"(speech|motion|place)\s*:\s*(.*?)(?=\s*(?:speech|motion|place)\s*:|\Z)", raw, re.I | re.S)
    if not pairs:
        return "Sorry, I cannot rewrite that."
    return "".join(f"<{k.lower()}>{v.strip()}" for k, v in pairs)


def _mock_reformat_json(prompt, m, seed):
    try:
        return json.dumps(extract_json(m.group(1)))
    except ValueError:
        return "[]"


def _mock_approval(prompt, m, seed):
    h = stable_hash("approve", seed, prompt)
    return "Yes, that feels natural." if h % 4 else "No, I am not in the mood."


def _keywords(text: str) -> list[str]:
    words = [w for w in re.findall(r"[a-z]+", text.lower()) if len(w) > 3]
    return list(dict.fromkeys(words))[:3]


def _mock_events(prompt, m, seed):
    turns = _turns(prompt)
    events = []
    for i in range(0, min(len(turns), 6), 2):
        text = re.sub(r"<[a-z_]+>", " ", turns[i]).strip()
        h = stable_hash("event", seed, text, i)
        events.append(
            {"description": f"During the talk: {text}", "keywords": _keywords(text), "poignancy": 3 + h % 6, "emergency": 2 + (h >> 8) % 6}
        )
    return json.dumps(events)


def _mock_thoughts(prompt, m, seed):
    h = stable_hash("thought", seed, prompt)
    return json.dumps([{"description": "Our conversations matter to me more than I admit.", "keywords": ["conversation"], "poignancy": 4 + h % 5}])


def _mock_relationship(prompt, m, seed):
    h = stable_hash("relationship", seed, prompt)
    prev = {k: int(v) for k, v in re.findall(r"(trust|intimacy|supportiveness): (\d+)", m.group(0))}
    out = {}
    for i, dim in enumerate(("trust", "intimacy", "supportiveness")):
        drift = (h >> (4 * i)) % 3 - 1
        out[dim] = min(9, max(1, prev.get(dim, 5) + drift))
    out["description"] = "They are getting to know each other"
    out["attitude"] = "curious"
    return json.dumps(out)


def _mock_motivation(prompt, m, seed):
    return json.dumps(
        {
            "long_term_motivation": "keep the bond with my companion strong",
            "short_term_motivation": "find a moment to talk honestly",
            "central_belief": "people grow through shared experiences",
        }
    )


def _mock_emotion(prompt, m, seed):
    h = stable_hash("emotion", seed, prompt)
    return json.dumps({"pleasure": 3 + h % 5, "arousal": 3 + (h >> 8) % 5, "dominance": 3 + (h >> 16) % 5})


def _mock_topics(prompt, m, seed):
    h = stable_hash("topics", seed, prompt)
    pool = ("weekend plans", "an old family photo", "a movie we watched", "learning to cook", "a trip to the sea")
    return json.dumps(
        [{"description": pool[(h + i) % len(pool)], "poignancy": 3 + (h >> (5 * i)) % 7, "emergency": 2 + (h >> (7 * i)) % 7} for i in range(2)]
    )


def _mock_backgrounds(prompt, m, seed):
    h = stable_hash("backgrounds", seed, prompt)
    names = re.search(r"mapping (.+?) and (.+?) to emotion", prompt)
    a, b = (names.group(1), names.group(2)) if names else ("A", "B")
    places_m = re.search(r"The places available are: (.*)", prompt)
    places = [p.strip() for p in places_m.group(1).split(",")] if places_m else list(PLACES)
    places = [p for p in places if p] or list(PLACES)
    topics_m = re.search(r"topic candidates: \n(.*?)\nThe places", prompt, re.S)
    topics = re.findall(r"^\d+\. (.*)$", topics_m.group(1), re.M) if topics_m else []
    topics = topics or ["what happened last time"]
    out = []
    for i in range(2):
        hi = h >> (9 * i)
        tid = (hi >> 11) % len(topics)
        out.append(
            {
                "background": f"{a} and {b} meet again to talk about {topics[tid]}",
                "poignancy": 3 + hi % 7,
                "emergency": 2 + (hi >> 3) % 7,
                "topic ids": [tid],
                "initial setting": {
                    a: {"emotion": "calm", "place": places[hi % len(places)], "motion": "stand idle"},
                    b: {"emotion": "curious", "place": places[(hi >> 5) % len(places)], "motion": "stand idle"},
                },
            }
        )
    return json.dumps(out)


DEFAULT_RULES: tuple[Rule, ...] = (
    (r"Rewrite the text below as valid JSON only, keeping its content\.\nText: (.*)\Z", _mock_reformat_json),
    (r"output only the behavior message\.\nText: (.*)\Z", _mock_reformat_behavior),
    (r"\[pleasure: (\d+), arousal: (\d+), dominance: (\d+)\]", _mock_pad),
    (r"Your reaction:", _mock_behavior),
    (r"Answer Yes or No first", _mock_approval),
    (r"List the key events that happened", _mock_events),
    (r"Write down the new thoughts that arise", _mock_thoughts),
    (r"Previous relationship with .*? is: .*", _mock_relationship),
    (r"Update the long-term motivation", _mock_motivation),
    (r"Rate the current emotion", _mock_emotion),
    (r"Suggest topics this character", _mock_topics),
    (r"Suggest backgrounds for the next episode", _mock_backgrounds),
)


class MockProvider:
    """Pure function of ``(prompt, seed)``: the first matching rule answers,
    otherwise a hash-keyed echo. Extra rules take precedence over defaults."""

    def __init__(self, seed: int = 0, rules: Sequence[Rule] = (), use_defaults: bool = True):
        self.seed = seed
        compiled = list(rules) + (list(DEFAULT_RULES) if use_defaults else [])
        self.rules = [(re.compile(p, re.S), r) for p, r in compiled]
        self.calls: list[str] = []

    def complete(self, prompt: str, params: dict | None = None) -> str:
        self.calls.append(prompt)
        for pattern, response in self.rules:
            m = pattern.search(prompt)
            if m:
                return response(prompt, m, self.seed) if callable(response) else response
        return f"mock:{stable_hash('fallback', self.seed, prompt):016x}"


# -- HTTP -----------------------------------------------------------------
class HttpProvider:
    """Chat-completion style client; endpoint, model and key default to
    ``DLP_LLM_URL`` / ``DLP_LLM_MODEL`` / ``DLP_LLM_KEY``."""

    def __init__(self, url=None, model=None, key=None, temperature: float = 0.7, seed: int | None = None, timeout: float = 60.0, retries: int = 2):
        self.url = url or os.environ.get("DLP_LLM_URL")
        self.model = model or os.environ.get("DLP_LLM_MODEL", "default")
        self.key = key if key is not None else os.environ.get("DLP_LLM_KEY")
        if not self.url:
            raise ProviderError("no language-model endpoint configured (DLP_LLM_URL)")
        self.temperature = temperature
        self.seed = seed
        self.timeout = timeout
        self.retries = retries

    def complete(self, prompt: str, params: dict | None = None) -> str:
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}], "temperature": self.temperature}
        if self.seed is not None:
            body["seed"] = self.seed
        body.update(params or {})
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(self.url, json.dumps(body).encode("utf-8"), headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    doc = json.loads(resp.read().decode("utf-8"))
                return str(doc["choices"][0]["message"]["content"])
            except Exception as exc:  # network, HTTP and schema failures alike
                last = exc
                time.sleep(min(2.0**attempt, 8.0) * 0.1)
        raise ProviderError(f"language-model request failed: {last}")


def make_provider(kind: str = "mock", seed: int = 0) -> Provider:
    if kind == "mock":
        return MockProvider(seed)
    if kind == "http":
        return HttpProvider(seed=seed)
    raise ValueError(f"unknown provider {kind!r}")
