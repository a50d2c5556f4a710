"""Kinematic matching features ``{t, f, b, h, p}`` of length ``5k + 193``.

All quantities are expressed in the character's local frame at the window's
anchor (first) frame: origin at the hip's ground projection, +z along the
facing direction, +x to the character's left.

* t (2k): ground-projected hip positions for the k window frames
* f (3k): facing directions for the k window frames
* b (189): per joint ``[6D rotation | 3D position]`` of the anchor pose
* h (1): hip height of the anchor pose
* p (3): partner hip position relative to own hip
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from duet.core import rotations as rot
from duet.core.model import NUM_JOINTS, MotionClip

BODY_DIM = NUM_JOINTS * 9
GROUPS = ("t", "f", "b", "h", "p")


def feature_length(k: int) -> int:
    return 5 * k + BODY_DIM + 4


@dataclass(frozen=True)
class FeatureLayout:
    k: int

    @property
    def length(self) -> int:
        return feature_length(self.k)

    def slices(self) -> dict[str, slice]:
        k = self.k
        b0 = 5 * k
        return {
            "t": slice(0, 2 * k),
            "f": slice(2 * k, 5 * k),
            "b": slice(b0, b0 + BODY_DIM),
            "h": slice(b0 + BODY_DIM, b0 + BODY_DIM + 1),
            "p": slice(b0 + BODY_DIM + 1, b0 + BODY_DIM + 4),
        }

    def split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        x = np.asarray(x)
        if x.shape[-1] != self.length:
            raise ValueError(f"feature length {x.shape[-1]} != 5k+193 = {self.length}")
        return {g: x[..., s] for g, s in self.slices().items()}


def local_frame(root_position: np.ndarray, facing: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World->local rotation (undoing yaw) and the ground origin (x, 0, z)."""
    yaw = rot.yaw_of(facing)
    inv = rot.yaw_matrix(-yaw)
    origin = np.array(root_position, dtype=np.float64, copy=True)
    origin[..., 1] = 0.0
    return inv, origin


def body_features(root_position, rotations, positions) -> tuple[np.ndarray, float]:
    """``b`` and ``h`` for a single pose, expressed in its own local frame."""
    root_position = np.asarray(root_position, dtype=np.float64)
    root_mat = rot.rot6d_to_matrix(rotations[0])
    inv, origin = local_frame(root_position, rot.facing_from_matrix(root_mat))
    r6 = np.array(rotations, dtype=np.float64, copy=True)
    r6[0] = rot.matrix_to_rot6d(inv @ root_mat)
    local_pos = (np.asarray(positions) - origin) @ inv.T
    b = np.concatenate([r6, local_pos], axis=-1).reshape(-1)
    return b, float(root_position[1])


def to_local(inv: np.ndarray, origin: np.ndarray, world: np.ndarray) -> np.ndarray:
    return (np.asarray(world, dtype=np.float64) - origin) @ inv.T


def window_starts(num_frames: int, k: int, stride: int) -> np.ndarray:
    if num_frames < k:
        return np.array([0])
    return np.arange(0, num_frames - k + 1, stride)


def extract_window(clip: MotionClip, start: int, k: int, partner: MotionClip | None = None) -> np.ndarray:
    """Feature vector of the k-frame window starting at ``start``.

    Frames past the end of the clip are clamped to the last frame.
    """
    n = clip.num_frames
    idx = np.minimum(start + np.arange(k), n - 1)
    anchor = idx[0]
    inv, origin = local_frame(clip.root_positions[anchor], clip.facings[anchor])
    ground = clip.root_positions[idx].copy()
    ground[:, 1] = 0.0
    t = to_local(inv, origin, ground)[:, [0, 2]]
    f = clip.facings[idx] @ inv.T
    b, h = body_features(clip.root_positions[anchor], clip.rotations[anchor], clip.positions[anchor])
    if partner is not None:
        p_idx = min(anchor, partner.num_frames - 1)
        p = (partner.root_positions[p_idx] - clip.root_positions[anchor]) @ inv.T
    else:
        p = np.zeros(3)
    x = np.concatenate([t.reshape(-1), f.reshape(-1), b, [h], p])
    if x.size != feature_length(k) or not np.all(np.isfinite(x)):
        raise ValueError("malformed feature vector")
    return x


def extract_clip_windows(
    clip: MotionClip, k: int, stride: int, partner: MotionClip | None = None
) -> tuple[np.ndarray, np.ndarray]:
    starts = window_starts(clip.num_frames, k, stride)
    feats = np.stack([extract_window(clip, int(s), k, partner) for s in starts])
    return starts, feats
