"""Two-stage retrieval: annotation cosine shortlist, then weighted kinematic score."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from duet.core.model import Pose, Trajectory
from duet.embedding import cosine_matrix
from duet.errors import EmptyDatabase
from duet.motiondb.database import MotionDatabase, NormStats
from duet.motiondb.features import FeatureLayout

COMPONENTS = ("B", "T", "F", "H", "P")
_GROUP_OF = {"B": "b", "T": "t", "F": "f", "H": "h", "P": "p"}
NORMALIZATIONS = ("candidates", "none")
Z_FLOOR = 1e-12
TIE_TOL = 1e-9


@dataclass(frozen=True)
class Weights:
    b: float = 1.0
    t: float = 3.0
    f: float = 1.0
    h: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        vals = self.as_tuple()
        if any(not np.isfinite(v) or v < 0 for v in vals) or not any(v > 0 for v in vals):
            raise ValueError("weights must be non-negative and not all zero")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.b, self.t, self.f, self.h, self.p)

    def of(self, component: str) -> float:
        return getattr(self, _GROUP_OF[component])

    def scaled(self, c: float) -> "Weights":
        return Weights(*(c * v for v in self.as_tuple()))

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "Weights":
        return cls(*map(float, seq))


DEFAULT_WEIGHTS = Weights()


@dataclass(frozen=True)
class MatchQuery:
    current_pose: Pose
    text: str | None = None
    target_trajectory: Trajectory | None = None
    partner_position: np.ndarray | None = None
    K1: int = 50
    K2: int = 10
    weights: Weights = DEFAULT_WEIGHTS

    def __post_init__(self):
        if self.K1 < 1 or self.K2 < 1:
            raise ValueError("K1 and K2 must be positive")
        if self.text is not None and self.K2 > self.K1:
            raise ValueError("K2 must not exceed K1 when the text stage is active")


@dataclass(frozen=True)
class MatchResult:
    clip_id: str
    start: int
    index: int
    score: float
    raw: dict = field(default_factory=dict)
    normalized: dict = field(default_factory=dict)
    text_score: float | None = None
    partner: tuple[str, int] | None = None

    @property
    def ref(self) -> tuple[str, int]:
        return (self.clip_id, self.start)

    def to_json(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "start": self.start,
            "score": self.score,
            "raw": dict(self.raw),
            "normalized": dict(self.normalized),
            "text_score": self.text_score,
            "partner": None if self.partner is None else {"clip_id": self.partner[0], "start": self.partner[1]},
        }


class CandidateSet:
    """Database windows under consideration, with optional text scores."""

    def __init__(self, db: MotionDatabase, indices, text_scores=None):
        self.db = db
        self.indices = np.asarray(indices, dtype=int)
        self.text_scores = None if text_scores is None else np.asarray(text_scores, dtype=np.float64)
        self._normalized = None
        self._features = None

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def features(self) -> np.ndarray:
        if self._features is None:
            self._features = self.db.features[self.indices]
        return self._features

    def normalized(self, stats: NormStats) -> np.ndarray:
        cached = self._normalized
        if cached is None or cached[0] is not stats:
            self._normalized = cached = (stats, stats.normalize(self.features))
        return cached[1]

    def refs(self) -> list[tuple[str, int]]:
        return [(r.clip_id, r.start) for r in map(self.db.window_ref, self.indices)]

    def order_keys(self) -> tuple[np.ndarray, np.ndarray]:
        """(clip-id rank, start) per candidate for lexicographic tie-breaks."""
        ids = self.db.clip_ids
        rank = np.empty(len(ids), dtype=int)
        rank[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))
        return rank[self.db.window_clip_index[self.indices]], self.db.window_starts[self.indices]

    def subset(self, positions) -> "CandidateSet":
        positions = np.asarray(positions, dtype=int)
        ts = None if self.text_scores is None else self.text_scores[positions]
        return CandidateSet(self.db, self.indices[positions], ts)


def _window_pool(db: MotionDatabase, clip_ids=None) -> np.ndarray:
    if clip_ids is None:
        return np.arange(db.num_windows)
    wanted = {db.clip_ids.index(c) for c in clip_ids}
    return np.nonzero(np.isin(db.window_clip_index, sorted(wanted)))[0]


def semantic_stage(db: MotionDatabase, text: str | None, K1: int, clip_ids=None) -> CandidateSet:
    """Top-``K1`` windows by annotation cosine; every window when ``text`` is None."""
    if db.num_windows == 0:
        raise EmptyDatabase("database has no windows")
    pool = _window_pool(db, clip_ids)
    full = CandidateSet(db, pool)
    clip_rank, starts = full.order_keys()
    if text is None:
        order = np.lexsort((starts, clip_rank))
        return full.subset(order)
    per_clip = cosine_matrix(db.embedder.embed(text), db.annotation_matrix)
    scores = per_clip[db.window_clip_index[pool]]
    order = np.lexsort((starts, clip_rank, -scores))[: max(int(K1), 0)]
    return CandidateSet(db, pool[order], scores[order])


def component_distances(features: np.ndarray, normalized: np.ndarray, query: np.ndarray, stats: NormStats) -> dict[str, np.ndarray]:
    """Raw per-group distances of each candidate to the query.

    T, B, H, P: Euclidean on Z-scored values. F: mean facing ``1 - cos``,
    i.e. one minus the cosine of the concatenated unit facings.
    """
    layout: FeatureLayout = stats.layout
    sl = layout.slices()
    qn = stats.normalize(query)
    out = {}
    for comp in ("T", "B", "H", "P"):
        s = sl[_GROUP_OF[comp]]
        out[comp] = np.linalg.norm(normalized[:, s] - qn[s], axis=1)
    out["F"] = 1.0 - cosine_matrix(query[sl["f"]], features[:, sl["f"]])
    return out


def zscore(d: np.ndarray) -> np.ndarray:
    sd = d.std()
    if sd < Z_FLOOR:
        return np.zeros_like(d)
    return (d - d.mean()) / sd


def combine(raw: dict[str, np.ndarray], weights: Weights, normalization: str = "candidates"):
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    norm = {c: (zscore(raw[c]) if normalization == "candidates" else raw[c]) for c in COMPONENTS}
    total = sum(weights.of(c) * norm[c] for c in COMPONENTS)
    return norm, total


def tie_order(scores: np.ndarray, clip_rank: np.ndarray, starts: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Ascending score order; runs of scores whose consecutive gaps are within
    ``tol`` count as ties and are ordered by (clip id, start)."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((starts, clip_rank, scores))
    s = scores[order]
    gaps = np.diff(s) > tol * np.maximum(1.0, np.abs(s[1:]))
    group = np.concatenate([[0], np.cumsum(gaps)])
    return order[np.lexsort((starts[order], clip_rank[order], group))]


def _rank(candidates: CandidateSet, scores: np.ndarray) -> np.ndarray:
    clip_rank, starts = candidates.order_keys()
    return tie_order(scores, clip_rank, starts)


def kinematic_stage(
    candidates: CandidateSet,
    query_feature: np.ndarray,
    norm_stats: NormStats,
    weights: Weights = DEFAULT_WEIGHTS,
    K2: int = 10,
    normalization: str = "candidates",
) -> list[MatchResult]:
    """Rank candidates by ``S = sum_i w_i * z_i`` (lower is better); keep the top ``K2``."""
    if len(candidates) == 0:
        return []
    raw = component_distances(candidates.features, candidates.normalized(norm_stats), np.asarray(query_feature, float), norm_stats)
    norm, total = combine(raw, weights, normalization)
    order = _rank(candidates, total)[: max(int(K2), 0)]
    return [_result(candidates, j, float(total[j]), raw, norm) for j in order]


def text_only_stage(candidates: CandidateSet, K2: int = 10) -> list[MatchResult]:
    """Rank by annotation cosine alone (``S = -cos``)."""
    if candidates.text_scores is None:
        raise ValueError("text-only ranking needs text scores")
    total = -candidates.text_scores
    order = _rank(candidates, total)[: max(int(K2), 0)]
    return [_result(candidates, j, float(total[j]), {}, {}) for j in order]


def _result(candidates: CandidateSet, j: int, score: float, raw: dict, norm: dict) -> MatchResult:
    db = candidates.db
    idx = int(candidates.indices[j])
    ref = db.window_ref(idx)
    partner = db.partner_of(ref.clip_id)
    return MatchResult(
        ref.clip_id,
        ref.start,
        idx,
        score,
        {c: float(v[j]) for c, v in raw.items()},
        {c: float(v[j]) for c, v in norm.items()},
        None if candidates.text_scores is None else float(candidates.text_scores[j]),
        None if partner is None else (partner, ref.start),
    )


def select_candidate(ranked: Sequence[MatchResult], rng: np.random.Generator, rel_tol: float = 0.05, abs_tol: float = 1e-6) -> MatchResult:
    """Uniform pick among results scoring within ``max(rel_tol*|best|, abs_tol)`` of the best."""
    if not ranked:
        raise ValueError("no candidates to select from")
    best = ranked[0].score
    tol = max(rel_tol * abs(best), abs_tol)
    eligible = [r for r in ranked if r.score <= best + tol]
    if len(eligible) == 1:
        return eligible[0]
    return eligible[int(rng.integers(len(eligible)))]


def match(db: MotionDatabase, query: MatchQuery, rng: np.random.Generator | None = None, normalization: str = "candidates", clip_ids=None) -> MatchResult:
    """Semantic shortlist, kinematic ranking and near-tie random selection."""
    if db.norm_stats is None:
        raise EmptyDatabase("build the index before matching")
    k = db.config.k
    from duet.momat.query import extract_query_features

    q = extract_query_features(query.current_pose, query.target_trajectory, query.partner_position, k, db.config.fps)
    cands = semantic_stage(db, query.text, query.K1, clip_ids)
    ranked = kinematic_stage(cands, q, db.norm_stats, query.weights, query.K2, normalization)
    if not ranked:
        raise EmptyDatabase("no candidate windows")
    return select_candidate(ranked, rng if rng is not None else np.random.default_rng(0))
