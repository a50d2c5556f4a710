from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from duet.core import rotations as rot
from duet.core.clipio import clip_from_json, clip_to_json
from duet.core.kinematics import forward_kinematics, joint_distance_tensor, resample
from duet.core.model import NUM_JOINTS, GridMap, MotionClip, Pose, Scene, Skeleton, Spot, Trajectory, default_skeleton
from duet.errors import InvalidClip, InvalidSkeleton, LengthMismatch, MalformedRotation

SK = default_skeleton()
finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def random_rotations(rng, shape=()):
    return rot.matrix_to_rot6d(np.asarray(rot.Rotation.random(int(np.prod(shape)) or 1, random_state=rng.integers(1 << 31)).as_matrix()).reshape(shape + (3, 3)))


def random_clip(rng, n=12, cid="c"):
    root = rng.normal(size=(n, 3))
    return MotionClip(cid, SK, root, random_rotations(rng, (n, NUM_JOINTS)), 30.0)


def fk_oracle(skeleton, root, r6):
    """Per-joint recursion via explicit parent chains."""
    mats = [rot.rot6d_to_matrix(r) for r in r6]
    out = np.zeros((NUM_JOINTS, 3))
    for j in range(NUM_JOINTS):
        chain = []
        k = j
        while k != -1:
            chain.append(k)
            k = skeleton.parent_index[k]
        chain.reverse()
        p = np.array(root, float)
        g = np.eye(3)
        for a, b in zip(chain, chain[1:]):
            g = g @ mats[a]
            p = p + g @ skeleton.rest_offsets[b]
        out[j] = p
    return out


def test_rot6d_roundtrip_and_repair(rng):
    m = rot.Rotation.random(50, random_state=1).as_matrix()
    r6 = rot.matrix_to_rot6d(m)
    assert np.allclose(rot.rot6d_to_matrix(r6), m, atol=1e-12)
    noisy = r6 * 3.0 + 0.01 * rng.normal(size=r6.shape)
    rep = rot.rot6d_to_matrix(noisy)
    assert np.allclose(rep @ np.swapaxes(rep, -1, -2), np.eye(3), atol=1e-12)
    assert np.allclose(np.linalg.det(rep), 1.0)


@pytest.mark.parametrize("bad", [np.zeros(6), np.array([1, 0, 0, 2, 0, 0.0])])
def test_degenerate_6d_rejected(bad):
    with pytest.raises(MalformedRotation):
        rot.rot6d_to_matrix(bad)


def test_yaw_convention():
    assert np.allclose(rot.yaw_matrix(np.pi / 2) @ rot.FORWARD, [1, 0, 0])
    for y in np.linspace(-3, 3, 13):
        assert np.isclose(rot.wrap_angle(rot.yaw_of(rot.facing_of_yaw(y)) - y), 0.0, atol=1e-12)


def test_slerp_endpoints_and_midpoint():
    a = rot.identity6d()
    b = rot.matrix_to_rot6d(rot.yaw_matrix(1.0))
    assert np.allclose(rot.slerp6d(a, b, 0.0), a)
    assert np.allclose(rot.slerp6d(a, b, 1.0), b)
    assert np.allclose(rot.rot6d_to_matrix(rot.slerp6d(a, b, 0.5)), rot.yaw_matrix(0.5))


def test_forward_kinematics_matches_chain_oracle(rng):
    for _ in range(5):
        root = rng.normal(size=3)
        r6 = random_rotations(rng, (NUM_JOINTS,))
        assert np.allclose(forward_kinematics(SK, root, r6), fk_oracle(SK, root, r6), atol=1e-12)


def test_forward_kinematics_rest_pose():
    pos = forward_kinematics(SK, np.zeros(3), rot.identity6d((NUM_JOINTS,)))
    for j in range(1, NUM_JOINTS):
        p = SK.parent_index[j]
        assert np.allclose(pos[j] - pos[p], SK.rest_offsets[j])


@given(arrays(np.float64, 3, elements=finite), arrays(np.float64, 3, elements=finite))
def test_fk_translation_equivariant(root, shift):
    r6 = random_rotations(np.random.default_rng(0), (NUM_JOINTS,))
    a = forward_kinematics(SK, root, r6)
    b = forward_kinematics(SK, root + shift, r6)
    assert np.allclose(b - a, shift, atol=1e-9)


@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_joint_distance_tensor_transpose_symmetry(n, seed):
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(n, NUM_JOINTS, 3)), r.normal(size=(n, NUM_JOINTS, 3))
    dab, dba = joint_distance_tensor(a, b), joint_distance_tensor(b, a)
    assert np.array_equal(dab, np.swapaxes(dba, 1, 2))
    i, j1, j2 = n - 1, seed % NUM_JOINTS, (seed // 7) % NUM_JOINTS
    assert np.isclose(dab[i, j1, j2], np.linalg.norm(a[i, j1] - b[i, j2]))


def test_joint_distance_length_mismatch(rng):
    with pytest.raises(LengthMismatch):
        joint_distance_tensor(rng.normal(size=(3, NUM_JOINTS, 3)), rng.normal(size=(4, NUM_JOINTS, 3)))


@given(st.sampled_from([12.0, 24.0, 45.0, 60.0, 90.0]), st.integers(2, 20), st.integers(0, 1000))
def test_resample_preserves_endpoints(fps, n, seed):
    clip = random_clip(np.random.default_rng(seed), n)
    out = resample(clip, fps)
    assert out.fps == fps
    assert np.allclose(out.positions[0], clip.positions[0], atol=1e-6)
    assert np.allclose(out.positions[-1], clip.positions[-1], atol=1e-6)
    assert np.allclose(out.rotations[-1], clip.rotations[-1], atol=1e-6)


def test_resample_double_rate_keeps_source_frames(rng):
    clip = random_clip(rng, 10)
    out = resample(clip, 60.0)
    assert out.num_frames == 19
    assert np.array_equal(out.root_positions[::2], clip.root_positions)


def test_skeleton_validation():
    with pytest.raises(InvalidSkeleton):
        Skeleton(SK.joint_names[:-1], SK.parent_index[:-1], SK.rest_offsets[:-1])
    parents = list(SK.parent_index)
    parents[3] = 5
    with pytest.raises(InvalidSkeleton):
        Skeleton(SK.joint_names, tuple(parents), SK.rest_offsets)
    assert Skeleton.from_json(SK.to_json()) == SK


def test_clip_validation(rng):
    with pytest.raises(InvalidClip):
        MotionClip("x", SK, np.zeros((0, 3)), np.zeros((0, NUM_JOINTS, 6)), 30.0)
    with pytest.raises(InvalidClip):
        MotionClip("x", SK, np.zeros((2, 3)), random_rotations(rng, (2, NUM_JOINTS)), 0.0)
    with pytest.raises(InvalidClip):
        MotionClip("x", SK, np.zeros((2, 3)), random_rotations(rng, (2, NUM_JOINTS)), 30.0, category="dance")


def test_clip_json_roundtrip(rng):
    clip = random_clip(rng, 7)
    back = clip_from_json(clip_to_json(clip))
    assert back.id == clip.id and back.num_frames == 7
    assert np.allclose(back.positions, clip.positions, atol=1e-12)


def test_pose_facing_and_ground(rng):
    r6 = rot.identity6d((NUM_JOINTS,))
    r6[0] = rot.matrix_to_rot6d(rot.yaw_matrix(0.7))
    pose = Pose.from_rotations(SK, [1.0, 0.9, 2.0], r6)
    assert np.isclose(pose.yaw, 0.7)
    assert np.array_equal(pose.ground, [1.0, 2.0])


def test_trajectory_validation_and_sampling():
    t = np.array([0.0, 1.0, 2.0])
    p = np.array([[0, 0], [1, 0], [2, 0.0]])
    f = np.tile([0, 0, 1.0], (3, 1))
    tr = Trajectory(t, p, f)
    pos, _ = tr.sample([0.5, 5.0])
    assert np.allclose(pos, [[0.5, 0], [2, 0]])
    assert np.isclose(tr.arc_length(), 2.0)
    assert np.array_equal(tr.nearest_index(np.array([0.4, 0.6, 9.0])), [0, 1, 2])
    with pytest.raises(ValueError):
        Trajectory(t[::-1], p, f)
    assert Trajectory.from_json(tr.to_json()).to_json() == tr.to_json()


def test_grid_geometry():
    g = GridMap(4, 3, frozenset({(1, 1)}), cell_size=0.5)
    assert g.cell_center((0, 0)).tolist() == [0.25, 0.25]
    assert g.world_to_cell([0.74, 1.2]) == (1, 2)
    assert g.snap([0.75, 0.75]) != (1, 1)
    assert (1, 1) not in g.free_cells() and len(g.free_cells()) == 11
    assert sorted(g.neighbors((0, 1))) == [(0, 0), (0, 2)]
    assert GridMap.from_json(g.to_json()).to_json() == g.to_json()


def test_scene_rejects_spot_on_blocked_cell():
    g = GridMap(2, 2, frozenset({(0, 0)}))
    with pytest.raises(ValueError):
        Scene((Spot("s", np.array([0.2, 0, 0.2]), np.array([0, 0, 1.0])),), g)
    sc = Scene((Spot("s", np.array([0.7, 0, 0.7]), np.array([0, 0, 1.0])),), g)
    assert Scene.from_json(sc.to_json()).spot("s").ground.tolist() == [0.7, 0.7]
