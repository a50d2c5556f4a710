"""Episodic memory of events and thoughts with reinforcement and forgetting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from duet.embedding import HashingEmbedder, TextEmbedding, cosine
from duet.errors import DimMismatch, DomainError
from duet.sociomind.state import clamp_likert

KINDS = ("event", "thought")


@dataclass(frozen=True)
class ForgettingParams:
    a: float
    k: float
    threshold: float


DEFAULT_PARAMS = {
    "event": ForgettingParams(a=0.4, k=4.0, threshold=0.6),
    "thought": ForgettingParams(a=0.1, k=2.0, threshold=0.3),
}


def forgetting_rate(delta_T: float, N_m: int, p_m: float, a: float, k: float) -> float:
    """Retention ``a + (1 - a) * exp(-k * dT / (2**N * p))``; 1 at dT = 0, tends to ``a``."""
    if not (delta_T >= 0 and N_m >= 0 and p_m >= 1 and 0 <= a < 1 and k > 0):
        raise DomainError(f"forgetting_rate out of domain: dT={delta_T}, N={N_m}, p={p_m}, a={a}, k={k}")
    return a + (1.0 - a) * math.exp(-k * delta_T / (2.0**N_m * p_m))


@dataclass
class MemoryItem:
    kind: str
    description: str
    keywords: list = field(default_factory=list)
    poignancy: int = 5
    emergency: int | None = None
    access_count: int = 0
    last_access_episode: int = 0
    embedding: TextEmbedding | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"memory kind must be one of {KINDS}")
        self.poignancy = clamp_likert(self.poignancy, "poignancy")
        if self.kind == "event" and self.emergency is not None:
            self.emergency = clamp_likert(self.emergency, "emergency")
        if self.kind == "thought":
            self.emergency = None
        if self.access_count < 0:
            raise DomainError("access count must be non-negative")

    def retention(self, current_episode: int, params: dict = DEFAULT_PARAMS) -> float:
        p = params[self.kind]
        dt = max(current_episode - self.last_access_episode, 0)
        return forgetting_rate(dt, self.access_count, self.poignancy, p.a, p.k)

    def touch(self, episode: int) -> None:
        self.access_count += 1
        self.last_access_episode = max(self.last_access_episode, episode)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "description": self.description,
            "keywords": list(self.keywords),
            "poignancy": self.poignancy,
            "emergency": self.emergency,
            "access_count": self.access_count,
            "last_access_episode": self.last_access_episode,
            "embedding": None if self.embedding is None else self.embedding.values.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MemoryItem":
        emb = doc.get("embedding")
        return cls(
            doc["kind"],
            doc["description"],
            list(doc.get("keywords", [])),
            doc.get("poignancy", 5),
            doc.get("emergency"),
            int(doc.get("access_count", 0)),
            int(doc.get("last_access_episode", 0)),
            None if emb is None else TextEmbedding(np.asarray(emb, dtype=np.float64)),
        )


def memory_score(query_embedding, item: MemoryItem, current_episode: int, params: dict = DEFAULT_PARAMS) -> float:
    if item.embedding is None:
        raise DimMismatch("memory item has no embedding")
    return cosine(query_embedding, item.embedding) * item.retention(current_episode, params)


class MemoryStore:
    """Ordered memory items; retrieval mutates access statistics, so one
    owner at a time."""

    def __init__(self, embedder=None, params: dict | None = None):
        self.embedder = embedder or HashingEmbedder()
        self.params = dict(DEFAULT_PARAMS if params is None else params)
        self.items: list[MemoryItem] = []

    def __len__(self) -> int:
        return len(self.items)

    def add(self, item: MemoryItem) -> MemoryItem:
        if item.embedding is None:
            item.embedding = self.embedder.embed(item.description)
        self.items.append(item)
        return item

    def save_jsonl(self, path) -> None:
        lines = [json.dumps(i.to_json(), sort_keys=True) for i in self.items]
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    @classmethod
    def load_jsonl(cls, path, embedder=None, params=None) -> "MemoryStore":
        store = cls(embedder, params)
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                store.add(MemoryItem.from_json(json.loads(line)))
        return store

    def to_json(self) -> list:
        return [i.to_json() for i in self.items]


def retrieve_memories(store: MemoryStore, query, M: int, current_episode: int) -> list[MemoryItem]:
    """Top-``M`` non-forgotten items by ``cosine * retention``; reinforces what it returns.

    Items whose retention is below their kind's threshold are skipped. Ties
    keep insertion order.
    """
    if not store.items or M <= 0:
        return []
    q = query if isinstance(query, TextEmbedding) else store.embedder.embed(str(query))
    scored = []
    for idx, item in enumerate(store.items):
        r = item.retention(current_episode, store.params)
        if r < store.params[item.kind].threshold:
            continue
        scored.append((-cosine(q, item.embedding) * r, idx, item))
    scored.sort(key=lambda s: (s[0], s[1]))
    top = [item for _, _, item in scored[:M]]
    for item in top:
        item.touch(current_episode)
    return top
