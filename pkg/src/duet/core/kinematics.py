from __future__ import annotations

import numpy as np

from duet.core import rotations as rot
from duet.core.model import NUM_JOINTS, MotionClip, Skeleton
from duet.errors import LengthMismatch, MalformedRotation


def forward_kinematics(skeleton: Skeleton, root_position, joint_rotations) -> np.ndarray:
    """World joint positions from a root translation and local 6D rotations.

    Accepts a single pose (``(3,)``, ``(21, 6)``) or a batch of frames
    (``(F, 3)``, ``(F, 21, 6)``); returns ``(..., 21, 3)``.
    """
    root = np.asarray(root_position, dtype=np.float64)
    r6 = np.asarray(joint_rotations, dtype=np.float64)
    if r6.shape[-2:] != (NUM_JOINTS, 6):
        raise MalformedRotation(f"expected {NUM_JOINTS} 6D rotations, got shape {r6.shape}")
    local = rot.rot6d_to_matrix(r6)
    batch = r6.shape[:-2]
    glob = np.empty(batch + (NUM_JOINTS, 3, 3))
    pos = np.empty(batch + (NUM_JOINTS, 3))
    glob[..., 0, :, :] = local[..., 0, :, :]
    pos[..., 0, :] = root
    offsets = skeleton.rest_offsets
    for j in range(1, NUM_JOINTS):
        p = skeleton.parent_index[j]
        glob[..., j, :, :] = glob[..., p, :, :] @ local[..., j, :, :]
        pos[..., j, :] = pos[..., p, :] + glob[..., p, :, :] @ offsets[j]
    return pos


def _positions(motion) -> np.ndarray:
    if isinstance(motion, MotionClip):
        return motion.positions
    return np.asarray(motion, dtype=np.float64)


def joint_distance_tensor(motion_a, motion_b) -> np.ndarray:
    """``D[i, j1, j2]`` = distance between joint j1 of a and joint j2 of b at frame i.

    Accepts clips or raw ``(F, J, 3)`` position arrays.
    """
    a = _positions(motion_a)
    b = _positions(motion_b)
    if a.shape[0] != b.shape[0]:
        raise LengthMismatch(f"frame counts differ: {a.shape[0]} vs {b.shape[0]}")
    diff = a[:, :, None, :] - b[:, None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def resample(clip: MotionClip, target_fps: float) -> MotionClip:
    """Re-time a clip: linear root/position interpolation, slerp for rotations."""
    if not target_fps > 0:
        raise ValueError("target_fps must be positive")
    if target_fps == clip.fps:
        return clip
    n_out = int(round(clip.duration * target_fps)) + 1
    if clip.num_frames > 1:
        n_out = max(n_out, 2)  # keep both end poses
    src_t = np.arange(n_out) * clip.fps / target_fps
    src_t = np.minimum(src_t, clip.num_frames - 1)
    # the last output frame is pinned to the last source frame
    src_t[-1] = clip.num_frames - 1
    lo = np.floor(src_t).astype(int)
    hi = np.minimum(lo + 1, clip.num_frames - 1)
    u = src_t - lo
    root = clip.root_positions[lo] * (1.0 - u)[:, None] + clip.root_positions[hi] * u[:, None]
    r6 = rot.slerp6d(clip.rotations[lo], clip.rotations[hi], u)
    # exact source frames stay bit-identical
    exact = u == 0.0
    root[exact] = clip.root_positions[lo[exact]]
    r6[exact] = clip.rotations[lo[exact]]
    return MotionClip(clip.id, clip.skeleton, root, r6, target_fps, clip.annotation, clip.category)
