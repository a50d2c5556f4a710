"""Evaluation harness: trajectory-following protocol, contact and diversity metrics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from duet.core import rotations as rot
from duet.core.kinematics import joint_distance_tensor
from duet.core.model import MotionClip, Pose, Trajectory
from duet.errors import ShapeMismatch
from duet.momat.blend import Anchor
from duet.momat.follow import FollowConfig, follow_trajectory
from duet.motiondb.database import MotionDatabase

TRAJECTORY_KINDS = ("wave", "circle", "square")


def _from_path(times: np.ndarray, xz: np.ndarray) -> Trajectory:
    d = np.gradient(xz, axis=0)
    yaw = np.arctan2(d[:, 0], d[:, 1])
    return Trajectory(times, xz, rot.facing_of_yaw(yaw))


def wave_trajectory(duration: float = 30.0, fps: float = 30.0, cycles: float = 2.0) -> Trajectory:
    """``x = 2 sin(u)``, ``z = u`` for ``u`` in ``[0, 2*pi*cycles]`` at constant parameter rate."""
    times = np.arange(int(round(duration * fps)) + 1) / fps
    u = times / duration * 2.0 * np.pi * cycles
    return _from_path(times, np.stack([2.0 * np.sin(u), u], axis=-1))


def circle_trajectory(duration: float = 30.0, fps: float = 30.0, diameter: float = 5.0) -> Trajectory:
    """One counter-clockwise lap starting at the origin heading +z."""
    times = np.arange(int(round(duration * fps)) + 1) / fps
    r = diameter / 2.0
    a = times / duration * 2.0 * np.pi
    xz = np.stack([r * (1.0 - np.cos(a)), r * np.sin(a)], axis=-1)
    return _from_path(times, xz)


def square_trajectory(duration: float = 30.0, fps: float = 30.0, side: float = 5.0) -> Trajectory:
    """One lap of a square, constant speed, facing each edge's direction."""
    times = np.arange(int(round(duration * fps)) + 1) / fps
    s = times / duration * 4.0 * side
    corners = np.array([[0.0, 0.0], [0.0, side], [side, side], [side, 0.0], [0.0, 0.0]])
    edge = np.minimum((s // side).astype(int), 3)
    frac = (s - edge * side) / side
    xz = corners[edge] + frac[:, None] * (corners[edge + 1] - corners[edge])
    d = corners[edge + 1] - corners[edge]
    yaw = np.arctan2(d[:, 0], d[:, 1])
    return Trajectory(times, xz, rot.facing_of_yaw(yaw))


def make_trajectory(kind: str, duration: float = 30.0, fps: float = 30.0) -> Trajectory:
    try:
        gen = {"wave": wave_trajectory, "circle": circle_trajectory, "square": square_trajectory}[kind]
    except KeyError:
        raise ValueError(f"trajectory kind must be one of {TRAJECTORY_KINDS}") from None
    return gen(duration, fps)


def trajectory_error(motion: MotionClip, target: Trajectory) -> float:
    """Mean ground-plane distance from the hip to the nearest-in-time target sample."""
    times = target.times[0] + np.arange(motion.num_frames) / motion.fps
    idx = target.nearest_index(times)
    hip = motion.root_positions[:, [0, 2]]
    return float(np.mean(np.linalg.norm(hip - target.positions[idx], axis=1)))


@dataclass(frozen=True)
class TrajProtocolConfig:
    kind: str = "wave"
    n_seeds: int = 50
    kinematic_features_enabled: bool = True
    duration: float = 30.0
    follow: FollowConfig = field(default_factory=FollowConfig)

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"trajectory kind must be one of {TRAJECTORY_KINDS}")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be positive")


@dataclass(frozen=True)
class TrajReport:
    kind: str
    kinematic_features_enabled: bool
    mean: float
    std: float
    errors: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "kinematic_features_enabled": self.kinematic_features_enabled,
            "mean": self.mean,
            "std": self.std,
            "errors": list(self.errors),
        }


def seed_windows(db: MotionDatabase, category: str = "basic", min_hip: float = 0.7) -> np.ndarray:
    """Standing windows usable as starting poses."""
    h = db.group_features("h")[:, 0]
    cats = np.array([db.clips[c].category == category for c in db.clip_ids])
    return np.nonzero(cats[db.window_clip_index] & (h > min_hip))[0]


def place_seed(db: MotionDatabase, window: int, trajectory: Trajectory) -> Pose:
    ref = db.window_ref(int(window))
    clip = db.clips[ref.clip_id]
    ground = np.array([trajectory.positions[0, 0], 0.0, trajectory.positions[0, 1]])
    anchor = Anchor.placing(clip, ref.start, ground, float(rot.yaw_of(trajectory.facings[0])))
    return anchor.frames(clip, [ref.start]).pose(0)


def run_traj_protocol(db: MotionDatabase, config: TrajProtocolConfig, seed: int = 0) -> TrajReport:
    trajectory = make_trajectory(config.kind, config.duration, db.config.fps)
    follow_cfg = replace(config.follow, use_kinematics=config.kinematic_features_enabled)
    rng = np.random.default_rng(seed)
    pool = seed_windows(db)
    picks = rng.choice(pool, size=config.n_seeds, replace=pool.size < config.n_seeds)
    errors = []
    for i, w in enumerate(picks):
        pose = place_seed(db, int(w), trajectory)
        motion = follow_trajectory(db, pose, trajectory, follow_cfg, np.random.default_rng([seed, i]))
        errors.append(trajectory_error(motion, trajectory))
    e = np.array(errors)
    return TrajReport(config.kind, config.kinematic_features_enabled, float(e.mean()), float(e.std()), tuple(errors))


@dataclass(frozen=True)
class ContactReport:
    active_count: int
    mean_abs_error: float
    empty: bool


def _positions(m) -> np.ndarray:
    return np.asarray(m.positions if isinstance(m, MotionClip) else m, dtype=np.float64)


def contact_preservation(refined_pair, reference_pair, gamma: float = 0.3) -> ContactReport:
    """How well the refined pair reproduces the reference's close joint pairs.

    Entries with reference distance below ``gamma`` form the active set; an
    empty set reports a mean of 0 with ``empty=True``.
    """
    rx, ry = map(_positions, refined_pair)
    fx, fy = map(_positions, reference_pair)
    if not (rx.shape == ry.shape == fx.shape == fy.shape):
        raise ShapeMismatch("refined and reference pairs must share one shape")
    d_ref = joint_distance_tensor(fx, fy)
    d = joint_distance_tensor(rx, ry)
    active = d_ref < gamma
    n = int(active.sum())
    if n == 0:
        return ContactReport(0, 0.0, True)
    return ContactReport(n, float(np.abs(d_ref - d)[active].mean()), False)


def diversity_proxy(motions) -> float:
    """Mean over unordered pairs of the frame-averaged RMS joint distance."""
    arrs = [_positions(m) for m in motions]
    if len(arrs) < 2:
        raise ShapeMismatch("need at least two motions")
    if any(a.shape != arrs[0].shape for a in arrs):
        raise ShapeMismatch("motions must share one shape")
    vals = []
    for a, b in itertools.combinations(arrs, 2):
        sq = np.sum((a - b) ** 2, axis=-1)  # (F, J)
        vals.append(np.mean(np.sqrt(np.mean(sq, axis=-1))))
    return float(np.mean(vals))
