"""Rotation helpers: 6D continuous representation, yaw frames, slerp.

Conventions: right-handed, y-up, character forward is +z. A 6D rotation
stores the first two columns of the rotation matrix, ``[c0 | c1]``.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from duet.errors import MalformedRotation

PARALLEL_EPS = 1e-9
UP = np.array([0.0, 1.0, 0.0])
FORWARD = np.array([0.0, 0.0, 1.0])


def rot6d_to_matrix(r6: np.ndarray) -> np.ndarray:
    """Gram-Schmidt a ``(..., 6)`` array into proper rotation matrices."""
    r6 = np.asarray(r6, dtype=np.float64)
    a1 = r6[..., 0:3]
    a2 = r6[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1)
    n2 = np.linalg.norm(a2, axis=-1)
    cross = np.linalg.norm(np.cross(a1, a2), axis=-1)
    if np.any(n1 < PARALLEL_EPS) or np.any(n2 < PARALLEL_EPS) or np.any(
        cross <= PARALLEL_EPS * n1 * n2
    ):
        raise MalformedRotation("6D rotation has zero or parallel columns")
    b1 = a1 / n1[..., None]
    b2 = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    b2 = b2 / np.linalg.norm(b2, axis=-1, keepdims=True)
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    return np.concatenate([mat[..., :, 0], mat[..., :, 1]], axis=-1)


def orthonormalize6d(r6: np.ndarray) -> np.ndarray:
    return matrix_to_rot6d(rot6d_to_matrix(r6))


def identity6d(shape: tuple[int, ...] = ()) -> np.ndarray:
    out = np.zeros(shape + (6,))
    out[..., 0] = 1.0
    out[..., 4] = 1.0
    return out


def yaw_matrix(yaw: np.ndarray | float) -> np.ndarray:
    """Rotation about +y by ``yaw`` radians; maps +z to (sin, 0, cos)."""
    yaw = np.asarray(yaw, dtype=np.float64)
    c, s = np.cos(yaw), np.sin(yaw)
    z, o = np.zeros_like(yaw), np.ones_like(yaw)
    return np.stack(
        [np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)],
        axis=-2,
    )


def axis_angle_matrix(axis: np.ndarray, angle: np.ndarray | float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    angle = np.asarray(angle, dtype=np.float64)
    rotvec = axis / np.linalg.norm(axis) * angle[..., None]
    return Rotation.from_rotvec(rotvec.reshape(-1, 3)).as_matrix().reshape(angle.shape + (3, 3))


def facing_from_matrix(mat: np.ndarray) -> np.ndarray:
    """Ground-projected unit forward direction of a root orientation."""
    fwd = np.asarray(mat)[..., :, 2].copy()
    fwd[..., 1] = 0.0
    norm = np.linalg.norm(fwd, axis=-1, keepdims=True)
    norm = np.where(norm < 1e-12, 1.0, norm)
    fwd = fwd / norm
    # looking straight up/down has no ground facing; fall back to +z
    degenerate = np.linalg.norm(fwd, axis=-1) < 0.5
    if np.any(degenerate):
        fwd = np.where(degenerate[..., None], FORWARD, fwd)
    return fwd


def yaw_of(facing: np.ndarray) -> np.ndarray:
    facing = np.asarray(facing, dtype=np.float64)
    return np.arctan2(facing[..., 0], facing[..., 2])


def facing_of_yaw(yaw: np.ndarray | float) -> np.ndarray:
    yaw = np.asarray(yaw, dtype=np.float64)
    return np.stack([np.sin(yaw), np.zeros_like(yaw), np.cos(yaw)], axis=-1)


def wrap_angle(a: np.ndarray | float) -> np.ndarray:
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def matrix_to_quat(mat: np.ndarray) -> np.ndarray:
    """``(..., 3, 3)`` -> ``(..., 4)`` quaternions in scipy's (x, y, z, w) order."""
    mat = np.asarray(mat, dtype=np.float64)
    flat = Rotation.from_matrix(mat.reshape(-1, 3, 3)).as_quat()
    return flat.reshape(mat.shape[:-2] + (4,))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    flat = Rotation.from_quat(q.reshape(-1, 4)).as_matrix()
    return flat.reshape(q.shape[:-1] + (3, 3))


def quat_slerp(q0: np.ndarray, q1: np.ndarray, u: np.ndarray | float) -> np.ndarray:
    """Shortest-arc spherical interpolation, broadcasting ``u`` over leading axes."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    dot = np.sum(q0 * q1, axis=-1, keepdims=True)
    q1 = np.where(dot < 0.0, -q1, q1)
    dot = np.abs(dot)
    while u.ndim < q0.ndim:
        u = u[..., None]
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_t = np.sin(theta)
    small = sin_t < 1e-9
    safe = np.where(small, 1.0, sin_t)
    w0 = np.where(small, 1.0 - u, np.sin((1.0 - u) * theta) / safe)
    w1 = np.where(small, u, np.sin(u * theta) / safe)
    out = w0 * q0 + w1 * q1
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def slerp6d(a: np.ndarray, b: np.ndarray, u: np.ndarray | float) -> np.ndarray:
    """Interpolate 6D rotations on the sphere; exact at ``u`` = 0 and 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ma, mb = rot6d_to_matrix(a), rot6d_to_matrix(b)
    q = quat_slerp(matrix_to_quat(ma), matrix_to_quat(mb), u)
    out = matrix_to_rot6d(quat_to_matrix(q))
    u = np.asarray(u, dtype=np.float64)
    while u.ndim < np.ndim(out) - 1:
        u = u[..., None]
    # pin endpoints bit-exactly to the inputs
    out = np.where(np.broadcast_to(u[..., None] == 0.0, out.shape), a, out)
    out = np.where(np.broadcast_to(u[..., None] == 1.0, out.shape), b, out)
    return out
