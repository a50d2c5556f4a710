"""Joint matching of two-person interaction windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from duet.core import rotations as rot
from duet.core.model import Pose
from duet.errors import EmptyDatabase, NoInteractiveEntries
from duet.momat.query import extract_query_features
from duet.momat.search import (
    DEFAULT_WEIGHTS,
    CandidateSet,
    MatchResult,
    Weights,
    component_distances,
    select_candidate,
    semantic_stage,
    tie_order,
    zscore,
)
from duet.motiondb.database import MotionDatabase
from duet.motiondb.features import local_frame

JOINT_COMPONENTS = ("B_a", "H_a", "B_p", "H_p", "P")


@dataclass(frozen=True)
class InteractiveMatch:
    active: MatchResult
    passive: MatchResult
    offset: np.ndarray  # passive hip relative to the active hip, active's local frame
    facing: np.ndarray  # passive facing in the active's local frame
    ranked: tuple[MatchResult, ...] = ()

    def __iter__(self):
        yield self.active
        yield self.passive

    def passive_placement(self, active_root, active_yaw: float) -> tuple[np.ndarray, float]:
        """World hip position and yaw for the passive given the active's placement."""
        world = rot.yaw_matrix(active_yaw) @ self.offset + np.asarray(active_root, dtype=np.float64)
        return world, float(active_yaw + rot.yaw_of(self.facing))

    def to_json(self) -> dict:
        return {
            "active": self.active.to_json(),
            "passive": self.passive.to_json(),
            "placement": {"offset": self.offset.tolist(), "facing": self.facing.tolist()},
        }


def recorded_placement(db: MotionDatabase, active_id: str, frame: int) -> tuple[np.ndarray, np.ndarray]:
    a = db.clips[active_id]
    p = db.clips[db.partner_of(active_id)]
    inv, _ = local_frame(a.root_positions[frame], a.facings[frame])
    offset = inv @ (p.root_positions[frame] - a.root_positions[frame])
    facing = inv @ p.facings[frame]
    return offset, facing


def match_interactive_pair(
    db: MotionDatabase,
    text: str | None,
    active_state: Pose,
    passive_state: Pose,
    K1: int = 12,
    K2: int = 5,
    weights: Weights = DEFAULT_WEIGHTS,
    rng: np.random.Generator | None = None,
    normalization: str = "candidates",
    clip_ids=None,
) -> InteractiveMatch:
    """Shortlist active clips of linked pairs by text, then score both members.

    ``S = w_b*B_a + w_h*H_a + w_b*B_p + w_h*H_p + w_p*P`` over per-term
    Z-scores, where P compares the live partner offset with the recorded one.
    Without ``rng`` the best-ranked pair is returned. ``clip_ids`` narrows
    the active clips considered.
    """
    if db.norm_stats is None:
        raise EmptyDatabase("build the index before matching")
    actives = [a for a, _ in db.pair_links if clip_ids is None or a in clip_ids]
    if not actives:
        raise NoInteractiveEntries("database has no interactive pairs")
    cands = semantic_stage(db, text, K1, actives)
    k, fps, stats = db.config.k, db.config.fps, db.norm_stats
    q_a = extract_query_features(active_state, None, passive_state.root_position, k, fps)
    q_p = extract_query_features(passive_state, None, active_state.root_position, k, fps)
    refs = cands.refs()
    p_idx = np.array([db.window_index(db.partner_of(c), s) for c, s in refs], dtype=int)
    p_cands = CandidateSet(db, p_idx, cands.text_scores)
    d_a = component_distances(cands.features, cands.normalized(stats), q_a, stats)
    d_p = component_distances(p_cands.features, p_cands.normalized(stats), q_p, stats)
    raw = {"B_a": d_a["B"], "H_a": d_a["H"], "B_p": d_p["B"], "H_p": d_p["H"], "P": d_a["P"]}
    w = {"B_a": weights.b, "H_a": weights.h, "B_p": weights.b, "H_p": weights.h, "P": weights.p}
    norm = {c: (zscore(v) if normalization == "candidates" else v) for c, v in raw.items()}
    total = sum(w[c] * norm[c] for c in JOINT_COMPONENTS)
    clip_rank, starts = cands.order_keys()
    order = tie_order(total, clip_rank, starts)[: max(int(K2), 1)]
    ranked = []
    for j in order:
        ref = refs[j]
        ranked.append(
            MatchResult(
                ref[0],
                ref[1],
                int(cands.indices[j]),
                float(total[j]),
                {c: float(v[j]) for c, v in raw.items()},
                {c: float(v[j]) for c, v in norm.items()},
                None if cands.text_scores is None else float(cands.text_scores[j]),
                (db.partner_of(ref[0]), ref[1]),
            )
        )
    best = ranked[0] if rng is None else select_candidate(ranked, rng)
    partner_id = db.partner_of(best.clip_id)
    p_window = db.window_index(partner_id, best.start)
    passive = MatchResult(partner_id, best.start, p_window, best.score, best.raw, best.normalized, best.text_score, best.ref)
    offset, facing = recorded_placement(db, best.clip_id, best.start)
    return InteractiveMatch(best, passive, offset, facing, tuple(ranked))
