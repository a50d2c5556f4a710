"""Rigid re-anchoring of clip frames and smoothstep/slerp transition blending."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from duet.core import rotations as rot
from duet.core.kinematics import forward_kinematics
from duet.core.model import MotionClip, Pose
from duet.errors import TooShort


def smoothstep(u):
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _ground3(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return np.array([p[0], 0.0, p[2]]) if p.size == 3 else np.array([p[0], 0.0, p[1]])


class Anchor:
    """Yaw rotation plus ground translation mapping clip space to world space."""

    def __init__(self, yaw: float, src_origin, dst_origin):
        self.yaw = float(yaw)
        self.matrix = rot.yaw_matrix(self.yaw)
        self.src = _ground3(src_origin)
        self.dst = _ground3(dst_origin)

    @classmethod
    def between(cls, clip: MotionClip, frame: int, pose: Pose) -> "Anchor":
        """Place ``clip[frame]``'s ground point and heading onto ``pose``'s."""
        dyaw = pose.yaw - float(rot.yaw_of(clip.facings[frame]))
        return cls(dyaw, clip.root_positions[frame], pose.root_position)

    @classmethod
    def placing(cls, clip: MotionClip, frame: int, ground, yaw: float) -> "Anchor":
        dyaw = yaw - float(rot.yaw_of(clip.facings[frame]))
        return cls(dyaw, clip.root_positions[frame], ground)

    def point(self, p: np.ndarray) -> np.ndarray:
        return (np.asarray(p) - self.src) @ self.matrix.T + self.dst

    def frames(self, clip: MotionClip, idx: Sequence[int], new_id: str | None = None) -> MotionClip:
        """Selected frames of ``clip`` (indices clamped to the clip) in world space."""
        idx = np.clip(np.asarray(idx, dtype=int), 0, clip.num_frames - 1)
        root = self.point(clip.root_positions[idx])
        r6 = clip.rotations[idx].copy()
        r6[:, 0, 0:3] = r6[:, 0, 0:3] @ self.matrix.T
        r6[:, 0, 3:6] = r6[:, 0, 3:6] @ self.matrix.T
        pos = self.point(clip.positions[idx])
        return MotionClip(new_id or clip.id, clip.skeleton, root, r6, clip.fps, clip.annotation, clip.category, pos)


def hold(pose: Pose, n: int, template: MotionClip, new_id: str = "hold") -> MotionClip:
    """``n`` copies of one pose."""
    return MotionClip(
        new_id,
        template.skeleton,
        np.repeat(pose.root_position[None], n, axis=0),
        np.repeat(pose.joint_rotations[None], n, axis=0),
        template.fps,
        None,
        "basic",
        np.repeat(pose.joint_positions[None], n, axis=0),
    )


def blend_transition(prev_tail: MotionClip, next_head: MotionClip, blend_frames: int) -> MotionClip:
    """Crossfade the first ``blend_frames`` frames of two aligned segments.

    Frame ``i`` mixes ``prev_tail[i]`` and ``next_head[i]`` with weight
    ``smoothstep(i / (n - 1))``; the first output frame is ``prev_tail[0]``
    and the last is ``next_head[n - 1]``, both exactly.
    """
    n = int(blend_frames)
    if n < 1 or prev_tail.num_frames < n or next_head.num_frames < n:
        raise TooShort(f"both segments need at least {n} frames")
    w = smoothstep(np.arange(n) / (n - 1)) if n > 1 else np.ones(1)
    a_root, b_root = prev_tail.root_positions[:n], next_head.root_positions[:n]
    root = (1.0 - w)[:, None] * a_root + w[:, None] * b_root
    r6 = rot.slerp6d(prev_tail.rotations[:n], next_head.rotations[:n], w[:, None])
    pos = forward_kinematics(next_head.skeleton, root, r6)
    if n > 1:
        root[0], r6[0], pos[0] = a_root[0], prev_tail.rotations[0], prev_tail.positions[0]
    root[-1], r6[-1], pos[-1] = b_root[-1], next_head.rotations[n - 1], next_head.positions[n - 1]
    return MotionClip("blend", next_head.skeleton, root, r6, next_head.fps, next_head.annotation, next_head.category, pos)


def splice(prev_tail: MotionClip, segment: MotionClip, blend_frames: int) -> MotionClip:
    """``segment`` with its head crossfaded in from ``prev_tail``; same length as ``segment``."""
    n = min(int(blend_frames), segment.num_frames)
    if n < 1:
        return segment
    head = blend_transition(prev_tail, segment, n)
    return MotionClip(
        segment.id,
        segment.skeleton,
        np.concatenate([head.root_positions, segment.root_positions[n:]]),
        np.concatenate([head.rotations, segment.rotations[n:]]),
        segment.fps,
        segment.annotation,
        segment.category,
        np.concatenate([head.positions, segment.positions[n:]]),
    )


def stitch(segments: Sequence[MotionClip], blend_frames: int = 5, new_id: str = "stitched") -> MotionClip:
    """Concatenate segments, easing each one in from the held last frame of the
    previous one. Total length is the sum of segment lengths."""
    segments = [s for s in segments if s is not None and s.num_frames > 0]
    if not segments:
        raise TooShort("nothing to stitch")
    out = [segments[0]]
    for seg in segments[1:]:
        last = out[-1].pose(out[-1].num_frames - 1)
        n = min(blend_frames, seg.num_frames)
        out.append(splice(hold(last, n, seg), seg, n))
    first = segments[0]
    clip = MotionClip(
        new_id,
        first.skeleton,
        np.concatenate([s.root_positions for s in out]),
        np.concatenate([s.rotations for s in out]),
        first.fps,
        None,
        "script",
        np.concatenate([s.positions for s in out]),
    )
    return clip


def warp_to_ground(clip: MotionClip, goal_ground, new_id: str | None = None) -> MotionClip:
    """Shift the root path so its last frame lands on ``goal_ground`` (x, z).

    The correction eases in with a smoothstep from zero at the first frame,
    so the first frame and the overall shape are kept.
    """
    n = clip.num_frames
    delta = np.zeros(3)
    g = np.asarray(goal_ground, dtype=np.float64)
    delta[0], delta[2] = g[0] - clip.root_positions[-1, 0], g[-1] - clip.root_positions[-1, 2]
    w = smoothstep(np.arange(n) / (n - 1)) if n > 1 else np.ones(1)
    shift = w[:, None] * delta
    return MotionClip(
        new_id or clip.id,
        clip.skeleton,
        clip.root_positions + shift,
        clip.rotations,
        clip.fps,
        clip.annotation,
        clip.category,
        clip.positions + shift[:, None, :],
    )
