"""Query feature vectors built from the current pose and a target path."""

from __future__ import annotations

import numpy as np

from duet.core.model import Pose, Trajectory
from duet.motiondb.features import body_features, feature_length, local_frame, to_local


def extract_query_features(
    current_pose: Pose,
    target_trajectory: Trajectory | None,
    partner_position=None,
    k: int = 30,
    fps: float = 30.0,
    start_time: float | None = None,
    converge: bool = False,
    max_correction: float = np.inf,
) -> np.ndarray:
    """Feature vector laid out like a database window.

    ``t``/``f`` sample the trajectory at ``start_time + i / fps``
    (i = 0..k-1, clamped at the trajectory ends) and express the samples in
    the pose's local frame. Without a trajectory the character stays put.

    With ``converge`` the samples are shifted so the path starts at the
    character and the shift fades out linearly over the window, turning a
    tracking offset into a gradual correction rather than a jump. Only
    ``max_correction`` metres of the offset are corrected within one window,
    so a large lead or lag never asks for a sharp sideways or backward step.
    """
    root = current_pose.root_position
    inv, origin = local_frame(root, current_pose.facing)
    if target_trajectory is None:
        t = np.zeros((k, 2))
        f = np.tile([0.0, 0.0, 1.0], (k, 1))
    else:
        t0 = target_trajectory.times[0] if start_time is None else start_time
        pos2, facing = target_trajectory.sample(t0 + np.arange(k) / fps)
        ground = np.stack([pos2[:, 0], np.zeros(k), pos2[:, 1]], axis=-1)
        if converge:
            fade = 1.0 - np.arange(k) / max(k - 1, 1)
            offset = ground[0] - origin
            norm = float(np.linalg.norm(offset))
            capped = offset * min(1.0, max_correction / norm) if norm > 0 else offset
            ground = ground - offset + (1.0 - fade)[:, None] * capped
        t = to_local(inv, origin, ground)[:, [0, 2]]
        f = facing @ inv.T
    b, h = body_features(root, current_pose.joint_rotations, current_pose.joint_positions)
    if partner_position is None:
        p = np.zeros(3)
    else:
        p = (np.asarray(partner_position, dtype=np.float64) - root) @ inv.T
    x = np.concatenate([t.reshape(-1), f.reshape(-1), b, [h], p])
    assert x.size == feature_length(k)
    return x
