from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from duet.core.model import MotionClip, Skeleton
from duet.embedding import DEFAULT_DIM, HashingEmbedder, TextEmbedding, cosine
from duet.errors import DanglingPair, DimMismatch, DomainError, DuplicateId, EmptyDatabase, LengthMismatch
from duet.motiondb.features import FeatureLayout, extract_clip_windows

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class BuildConfig:
    k: int = 30
    stride: int = 10
    fps: float = 30.0
    embed_dim: int = DEFAULT_DIM

    def to_json(self) -> dict:
        return {"k": self.k, "stride": self.stride, "fps": self.fps, "embed_dim": self.embed_dim}

    @classmethod
    def from_json(cls, doc: dict) -> "BuildConfig":
        return cls(int(doc["k"]), int(doc["stride"]), float(doc["fps"]), int(doc.get("embed_dim", DEFAULT_DIM)))


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-dimension Z-score statistics; floored dims have ``std == 1``."""

    mean: np.ndarray
    std: np.ndarray
    floored: np.ndarray
    layout: FeatureLayout

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.mean) / self.std

    def group(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        s = self.layout.slices()[name]
        return self.mean[s], self.std[s]

    def equals(self, other: "NormStats") -> bool:
        return (
            self.layout == other.layout
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
            and np.array_equal(self.floored, other.floored)
        )


def fit_norm_stats(windows: np.ndarray, k: int | None = None) -> NormStats:
    """Population mean/std per dimension over all windows."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 2 or windows.shape[0] == 0:
        raise EmptyDatabase("cannot fit normalization on zero windows")
    if k is None:
        k = (windows.shape[1] - 193) // 5
    layout = FeatureLayout(k)
    if layout.length != windows.shape[1]:
        raise ValueError("window width does not match 5k+193")
    mean = windows.mean(axis=0)
    std = windows.std(axis=0)
    floored = std < STD_FLOOR
    std = np.where(floored, 1.0, std)
    return NormStats(mean, std, floored, layout)


def length_penalized_similarity(f_i, f_q, l_i: float, L: float, lambda_len: float = 1.0) -> float:
    """Feature cosine damped by relative length difference: ``cos * exp(-lambda * gamma)``."""
    if not (l_i > 0 and L > 0):
        raise DomainError("lengths must be positive")
    gamma = abs(l_i - L) / max(l_i, L)
    return cosine(f_i, f_q) * math.exp(-lambda_len * gamma)


@dataclass(frozen=True)
class WindowRef:
    clip_id: str
    start: int


class MotionDatabase:
    """Clips, sliding-window features (stored un-normalized), annotation
    embeddings, interactive pair links and normalization statistics.

    Built by a single writer; read-only afterwards.
    """

    def __init__(self, skeleton: Skeleton, config: BuildConfig = BuildConfig(), embedder=None):
        self.skeleton = skeleton
        self.config = config
        self.embedder = embedder or HashingEmbedder(config.embed_dim)
        if self.embedder.dim != config.embed_dim:
            raise DimMismatch("embedder dim does not match build config")
        self.layout = FeatureLayout(config.k)
        self.clips: dict[str, MotionClip] = {}
        self.annotations: dict[str, tuple[str, TextEmbedding]] = {}
        self.pair_links: list[tuple[str, str]] = []
        self._partner: dict[str, str] = {}
        self._window_blocks: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.norm_stats: NormStats | None = None
        self._cache = None
        self._derived: dict = {}

    # -- building -------------------------------------------------------
    def ingest(self, clip: MotionClip, annotation: str | None = None, pair_link: str | None = None) -> str:
        if clip.id in self.clips:
            raise DuplicateId(clip.id)
        if clip.skeleton != self.skeleton:
            raise ValueError(f"clip {clip.id!r} uses a different skeleton")
        if clip.fps != self.config.fps:
            raise ValueError(f"clip {clip.id!r} is {clip.fps} fps, database expects {self.config.fps}")
        if pair_link is not None:
            partner = self.clips.get(pair_link)
            if partner is None:
                raise DanglingPair(f"partner clip {pair_link!r} not in database")
            if pair_link in self._partner:
                raise DanglingPair(f"clip {pair_link!r} is already paired")
            if partner.num_frames != clip.num_frames:
                raise LengthMismatch("paired clips must have equal frame counts")
        text = annotation if annotation is not None else (clip.annotation or "")
        self.clips[clip.id] = clip
        self.annotations[clip.id] = (text, self.embedder.embed(text))
        if pair_link is not None:
            self.pair_links.append((clip.id, pair_link))
            self._partner[clip.id] = pair_link
            self._partner[pair_link] = clip.id
            self._extract(self.clips[pair_link])
        self._extract(clip)
        self._cache = None
        self._derived.clear()
        self.norm_stats = None  # stale once the corpus changes
        return clip.id

    def _extract(self, clip: MotionClip) -> None:
        partner_id = self._partner.get(clip.id)
        partner = self.clips[partner_id] if partner_id else None
        self._window_blocks[clip.id] = extract_clip_windows(clip, self.config.k, self.config.stride, partner)

    def build_index(self) -> NormStats:
        if not self.clips:
            raise EmptyDatabase("no clips ingested")
        self.norm_stats = fit_norm_stats(self.features, self.config.k)
        return self.norm_stats

    # -- read-only views -----------------------------------------------
    def memo(self, key, build):
        """Value derived from the clips, computed once until the next ingest."""
        if key not in self._derived:
            self._derived[key] = build()
        return self._derived[key]

    def _arrays(self):
        if self._cache is None:
            ids = list(self.clips)
            clip_idx, starts, feats = [], [], []
            for ci, cid in enumerate(ids):
                s, f = self._window_blocks[cid]
                clip_idx.append(np.full(s.size, ci))
                starts.append(s)
                feats.append(f)
            if ids:
                emb = np.stack([self.annotations[c][1].values for c in ids])
                arrays = (np.concatenate(clip_idx), np.concatenate(starts), np.concatenate(feats), emb)
            else:
                arrays = (np.zeros(0, int), np.zeros(0, int), np.zeros((0, self.layout.length)), np.zeros((0, self.embedder.dim)))
            for a in arrays:
                a.setflags(write=False)
            self._cache = (ids, *arrays)
        return self._cache

    @property
    def clip_ids(self) -> list[str]:
        return self._arrays()[0]

    @property
    def window_clip_index(self) -> np.ndarray:
        return self._arrays()[1]

    @property
    def window_starts(self) -> np.ndarray:
        return self._arrays()[2]

    @property
    def features(self) -> np.ndarray:
        return self._arrays()[3]

    @property
    def annotation_matrix(self) -> np.ndarray:
        """Annotation embeddings, one row per clip in ``clip_ids`` order."""
        return self._arrays()[4]

    @property
    def num_windows(self) -> int:
        return int(self.window_starts.size)

    def window_ref(self, i: int) -> WindowRef:
        return WindowRef(self.clip_ids[self.window_clip_index[i]], int(self.window_starts[i]))

    @property
    def windows(self) -> list[tuple[str, int, np.ndarray]]:
        ids = self.clip_ids
        return [(ids[c], int(s), f) for c, s, f in zip(self.window_clip_index, self.window_starts, self.features)]

    def window_index(self, clip_id: str, start: int) -> int:
        ci = self.clip_ids.index(clip_id)
        hits = np.nonzero((self.window_clip_index == ci) & (self.window_starts == start))[0]
        if hits.size == 0:
            raise KeyError((clip_id, start))
        return int(hits[0])

    def partner_of(self, clip_id: str) -> str | None:
        return self._partner.get(clip_id)

    def is_active(self, clip_id: str) -> bool:
        return any(a == clip_id for a, _ in self.pair_links)

    def group_features(self, name: str, normalized: bool = False) -> np.ndarray:
        s = self.layout.slices()[name]
        x = self.features[:, s]
        if normalized:
            if self.norm_stats is None:
                raise EmptyDatabase("normalization statistics not fitted")
            m, sd = self.norm_stats.group(name)
            x = (x - m) / sd
        return x

    def clips_in_category(self, category: str) -> list[str]:
        return [c for c in self.clips if self.clips[c].category == category]

    def equals(self, other: "MotionDatabase") -> bool:
        if self.config != other.config or self.skeleton != other.skeleton:
            return False
        if list(self.clips) != list(other.clips) or self.pair_links != other.pair_links:
            return False
        if any(not self.clips[c].equals(other.clips[c]) for c in self.clips):
            return False
        for c in self.clips:
            ta, ea = self.annotations[c]
            tb, eb = other.annotations[c]
            if ta != tb or not np.array_equal(ea.values, eb.values):
                return False
        if not (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.window_starts, other.window_starts)
            and np.array_equal(self.window_clip_index, other.window_clip_index)
        ):
            return False
        if (self.norm_stats is None) != (other.norm_stats is None):
            return False
        return self.norm_stats is None or self.norm_stats.equals(other.norm_stats)
