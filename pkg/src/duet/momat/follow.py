"""Auto-regressive trajectory following by repeated motion matching."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from duet.core.model import MotionClip, Pose, Trajectory
from duet.errors import EmptyDatabase, NoProgress
from duet.momat.blend import Anchor, hold, splice
from duet.momat.query import extract_query_features
from duet.momat.search import (
    DEFAULT_WEIGHTS,
    CandidateSet,
    Weights,
    kinematic_stage,
    select_candidate,
    semantic_stage,
    text_only_stage,
)
from duet.motiondb.database import MotionDatabase


@dataclass(frozen=True)
class FollowConfig:
    replan: int = 10
    blend_frames: int = 5
    K1: int = 50
    K2: int = 10
    weights: Weights = DEFAULT_WEIGHTS
    use_kinematics: bool = True
    text: str = "walk"  # ranking text when kinematics are disabled
    category: str = "basic"
    min_clip_speed: float = 0.2  # pool keeps clips whose hips travel at least this fast
    eps_adv: float = 0.01
    stall_limit: int = 5
    rel_tol: float = 0.05
    normalization: str = "candidates"
    converge: bool = True  # query path starts at the character, fading into the target
    max_correction: float = 0.3  # metres of tracking offset corrected per query window

    def __post_init__(self):
        if self.replan < 1 or self.blend_frames < 1:
            raise ValueError("replan and blend_frames must be positive")


@dataclass
class FollowLog:
    matches: list = field(default_factory=list)  # (output frame, clip id, start)


def clip_speed(clip: MotionClip) -> float:
    """Mean ground speed of the hips over the clip."""
    if clip.num_frames < 2:
        return 0.0
    step = np.linalg.norm(np.diff(clip.root_positions[:, [0, 2]], axis=0), axis=1)
    return float(step.mean() * clip.fps)


def _locomotion_pool(db: MotionDatabase, config: FollowConfig, moving: bool = True) -> CandidateSet:
    key = ("follow_pool", config.category, config.min_clip_speed if moving else None)
    return db.memo(key, lambda: _build_pool(db, config, moving))


def _build_pool(db: MotionDatabase, config: FollowConfig, moving: bool) -> CandidateSet:
    ids = [c for c in db.clip_ids if db.clips[c].category == config.category]
    if moving:
        ids = [c for c in ids if clip_speed(db.clips[c]) >= config.min_clip_speed]
    if not ids:
        raise EmptyDatabase(f"no {config.category!r} clips to follow with")
    return semantic_stage(db, None, 0, ids)


def follow_trajectory(
    db: MotionDatabase,
    seed_pose: Pose,
    trajectory: Trajectory,
    config: FollowConfig = FollowConfig(),
    rng: np.random.Generator | None = None,
    log: FollowLog | None = None,
) -> MotionClip:
    """Walk ``trajectory`` starting from ``seed_pose``.

    Every ``replan`` frames the current pose and the upcoming stretch of the
    trajectory form a query; the best window's next ``replan`` frames are
    re-anchored at the current pose and crossfaded in from the continuation
    of the previous match. Output spans ``floor(duration * fps) + 1`` frames,
    or one replan interval for a degenerate trajectory.
    """
    if db.norm_stats is None:
        raise EmptyDatabase("build the index before matching")
    rng = rng if rng is not None else np.random.default_rng(0)
    fps, k = db.config.fps, db.config.k
    total = int(math.floor(trajectory.duration * fps + 1e-9)) + 1
    degenerate = total <= 1
    if degenerate:
        total = config.replan + 1
    pool = _locomotion_pool(db, config, moving=not degenerate)
    if not config.use_kinematics:
        pool = semantic_stage(db, config.text, config.K1, [db.clip_ids[i] for i in sorted(set(db.window_clip_index[pool.indices]))])
    template = db.clips[db.window_ref(int(pool.indices[0])).clip_id]
    segments = [hold(seed_pose, 1, template, "follow")]
    produced = 1
    current = seed_pose
    source: tuple[MotionClip, int, Anchor] | None = None
    stalls = 0
    tau = float(trajectory.times[0])
    while produced < total:
        if config.use_kinematics:
            q = extract_query_features(current, trajectory, None, k, fps, tau, converge=config.converge, max_correction=config.max_correction)
            ranked = kinematic_stage(pool, q, db.norm_stats, config.weights, config.K2, config.normalization)
        else:
            ranked = text_only_stage(pool, config.K2)
        choice = select_candidate(ranked, rng, config.rel_tol)
        clip = db.clips[choice.clip_id]
        anchor = Anchor.between(clip, choice.start, current)
        n = min(config.replan, total - produced)
        seg = anchor.frames(clip, choice.start + 1 + np.arange(n), "follow")
        if source is None:
            prev = hold(current, n, template)
        else:
            pclip, pframe, panchor = source
            prev = panchor.frames(pclip, pframe + 1 + np.arange(n))
        seg = splice(prev, seg, min(config.blend_frames, n))
        if log is not None:
            log.matches.append((produced, choice.clip_id, choice.start))

        advanced = float(np.linalg.norm(seg.root_positions[-1, [0, 2]] - current.root_position[[0, 2]]))
        want_a, _ = trajectory.sample(tau)
        want_b, _ = trajectory.sample(tau + n / fps)
        wanted = float(np.linalg.norm(want_b[0] - want_a[0]))
        stalls = stalls + 1 if (advanced < config.eps_adv and wanted >= config.eps_adv) else 0
        if stalls >= config.stall_limit:
            raise NoProgress(f"matched motion stopped advancing at t={tau:.2f}s")

        segments.append(seg)
        produced += n
        tau += n / fps
        current = seg.pose(n - 1)
        source = (clip, choice.start + n, anchor)
    return MotionClip(
        "follow",
        template.skeleton,
        np.concatenate([s.root_positions for s in segments]),
        np.concatenate([s.rotations for s in segments]),
        fps,
        "trajectory following",
        "script",
        np.concatenate([s.positions for s in segments]),
    )
