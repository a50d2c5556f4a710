"""Text-embedding port with a deterministic feature-hashing default.

The default embedder hashes word unigrams, word bigrams and boundary-marked
character trigrams into ``dim`` buckets and L2-normalizes the counts. It is
bit-exact across platforms (blake2b hashing, no locale-dependent calls).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import urllib.request
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from duet.errors import DimMismatch, ProviderError

DEFAULT_DIM = 1024
_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True, eq=False)
class TextEmbedding:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("embedding must be a non-empty finite vector")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def __eq__(self, other):
        if not isinstance(other, TextEmbedding):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> TextEmbedding: ...


def _bucket(feature: str, dim: int) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


class HashingEmbedder:
    """Stateless bag-of-features embedder; safe for concurrent use."""

    def __init__(self, dim: int = DEFAULT_DIM, char_weight: float = 0.5):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.char_weight = char_weight

    def features(self, text: str) -> list[tuple[str, float]]:
        words = _WORD_RE.findall(text.lower())
        feats: list[tuple[str, float]] = [("w:" + w, 1.0) for w in words]
        feats += [("b:" + a + " " + b, 1.0) for a, b in zip(words, words[1:])]
        for w in words:
            marked = f"#{w}#"
            feats += [("c:" + marked[i : i + 3], self.char_weight) for i in range(len(marked) - 2)]
        return feats

    def embed(self, text: str) -> TextEmbedding:
        vec = np.zeros(self.dim)
        for feat, weight in self.features(text):
            vec[_bucket(feat, self.dim)] += weight
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return TextEmbedding(vec)


class RemoteEmbedder:
    """HTTP adapter: POST ``{"texts": [...]}`` -> ``{"embeddings": [[...]]}``."""

    def __init__(self, url: str | None = None, key: str | None = None, dim: int = DEFAULT_DIM, timeout: float = 30.0):
        self.url = url or os.environ.get("DLP_EMBED_URL")
        self.key = key if key is not None else os.environ.get("DLP_EMBED_KEY")
        if not self.url:
            raise ProviderError("no embedding endpoint configured (DLP_EMBED_URL)")
        self.dim = dim
        self.timeout = timeout

    def embed_many(self, texts: Sequence[str]) -> list[TextEmbedding]:
        req = urllib.request.Request(
            self.url,
            data=json.dumps({"texts": list(texts)}).encode("utf-8"),
            headers={"Content-Type": "application/json", **({"Authorization": f"Bearer {self.key}"} if self.key else {})},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except Exception as exc:  # network, HTTP and JSON failures alike
            raise ProviderError(f"embedding request failed: {exc}") from exc
        out = [TextEmbedding(np.asarray(v, dtype=float)) for v in doc["embeddings"]]
        for e in out:
            if e.dim != self.dim:
                raise DimMismatch(f"remote embedder returned dim {e.dim}, expected {self.dim}")
        return out

    def embed(self, text: str) -> TextEmbedding:
        return self.embed_many([text])[0]


def _as_array(x) -> np.ndarray:
    return x.values if isinstance(x, TextEmbedding) else np.asarray(x, dtype=np.float64).reshape(-1)


def cosine(a, b) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    va, vb = _as_array(a), _as_array(b)
    if va.shape != vb.shape:
        raise DimMismatch(f"dimensions differ: {va.size} vs {vb.size}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def cosine_matrix(query, stack: np.ndarray) -> np.ndarray:
    """Cosine of one query against each row of ``stack``; zero rows score 0."""
    q = _as_array(query)
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 2 or stack.shape[1] != q.size:
        raise DimMismatch(f"dimensions differ: {q.size} vs {stack.shape[-1]}")
    qn = np.linalg.norm(q)
    rn = np.linalg.norm(stack, axis=1)
    denom = qn * rn
    safe = np.where(denom == 0.0, 1.0, denom)
    return np.where(denom == 0.0, 0.0, np.clip(stack @ q / safe, -1.0, 1.0))
