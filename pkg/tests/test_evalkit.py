from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duet.core import rotations as rot
from duet.core.model import NUM_JOINTS, MotionClip, Trajectory, default_skeleton
from duet.errors import ShapeMismatch
from duet.evalkit import (
    TrajProtocolConfig,
    contact_preservation,
    diversity_proxy,
    make_trajectory,
    place_seed,
    run_traj_protocol,
    seed_windows,
    trajectory_error,
)
from duet.momat.follow import follow_trajectory

SK = default_skeleton()


def clip_on(xz: np.ndarray, fps: float = 30.0, height: float = 0.9) -> MotionClip:
    n = xz.shape[0]
    root = np.stack([xz[:, 0], np.full(n, height), xz[:, 1]], axis=-1)
    r6 = np.broadcast_to(rot.matrix_to_rot6d(np.eye(3)), (n, NUM_JOINTS, 6)).copy()
    return MotionClip("m", SK, root, r6, fps)


def straight(n: int, length: float) -> Trajectory:
    times = np.arange(n) / 30.0
    z = np.linspace(0.0, length, n)
    return Trajectory(times, np.stack([np.zeros(n), z], axis=-1), np.tile([0.0, 0.0, 1.0], (n, 1)))


def test_error_zero_on_path_and_constant_offset():
    tr = make_trajectory("circle", 4.0)
    assert trajectory_error(clip_on(tr.positions), tr) == pytest.approx(0.0, abs=1e-12)
    line = straight(60, 3.0)
    shifted = line.positions + [0.5, 0.0]
    assert trajectory_error(clip_on(shifted), line) == pytest.approx(0.5, abs=1e-12)


def test_error_matches_per_frame_oracle(rng):
    tr = make_trajectory("wave", 3.0)
    for n in (5, tr.times.size, tr.times.size + 20):
        xz = rng.normal(size=(n, 2))
        expect = np.mean([np.hypot(*(xz[i] - tr.positions[min(i, tr.times.size - 1)])) for i in range(n)])
        assert trajectory_error(clip_on(xz), tr) == pytest.approx(expect, abs=1e-9)


@given(st.floats(-50, 50), st.floats(-50, 50), st.integers(0, 2 ** 16))
def test_error_translation_invariant(dx, dz, seed):
    r = np.random.default_rng(seed)
    base = make_trajectory("square", 2.0)
    xz = base.positions + r.normal(scale=0.3, size=base.positions.shape)
    moved = Trajectory(base.times, base.positions + [dx, dz], base.facings)
    e0 = trajectory_error(clip_on(xz), base)
    e1 = trajectory_error(clip_on(xz + [dx, dz]), moved)
    assert e1 == pytest.approx(e0, abs=1e-9)


def test_trajectory_shapes():
    wave = make_trajectory("wave", 30.0)
    assert np.allclose(wave.positions[:, 0], 2.0 * np.sin(wave.positions[:, 1]))
    circle = make_trajectory("circle", 30.0)
    centre = circle.positions.mean(axis=0)
    assert np.allclose(np.linalg.norm(circle.positions - [2.5, 0.0], axis=1), 2.5)
    assert centre == pytest.approx([2.5, 0.0], abs=0.01)
    square = make_trajectory("square", 30.0)
    assert np.ptp(square.positions, axis=0) == pytest.approx([5.0, 5.0])
    with pytest.raises(ValueError):
        make_trajectory("spiral")


def test_straight_line_followed_closely(db):
    line = straight(int(5.0 / 1.2 * 30) + 1, 5.0)
    errs = []
    for w in seed_windows(db)[:5]:
        motion = follow_trajectory(db, place_seed(db, int(w), line), line)
        errs.append(trajectory_error(motion, line))
    assert np.mean(errs) < 0.5


def test_protocol_report_and_determinism(db):
    cfg = TrajProtocolConfig("circle", n_seeds=3, duration=6.0)
    a = run_traj_protocol(db, cfg, seed=4)
    b = run_traj_protocol(db, cfg, seed=4)
    assert a == b
    assert len(a.errors) == 3
    assert abs(a.mean - np.mean(a.errors)) < 1e-12
    assert a.std == pytest.approx(np.std(a.errors))
    one = run_traj_protocol(db, TrajProtocolConfig("wave", n_seeds=1, duration=3.0), seed=0)
    assert one.std == 0.0
    with pytest.raises(ValueError):
        TrajProtocolConfig("wave", n_seeds=0)


def test_contact_preservation(rng):
    x, y = rng.normal(size=(2, 4, NUM_JOINTS, 3))
    same = contact_preservation((x, y), (x, y), gamma=1.0)
    assert same.mean_abs_error == 0.0 and same.active_count > 0
    far = contact_preservation((x, y + 100.0), (x, y + 100.0), gamma=0.3)
    assert far.empty and far.active_count == 0 and far.mean_abs_error == 0.0
    rx, ry = x + rng.normal(scale=0.1, size=x.shape), y
    rep = contact_preservation((rx, ry), (x, y), gamma=1.5)
    d_ref = np.linalg.norm(x[:, :, None] - y[:, None, :], axis=-1)
    d = np.linalg.norm(rx[:, :, None] - ry[:, None, :], axis=-1)
    mask = d_ref < 1.5
    assert rep.active_count == int(mask.sum())
    assert rep.mean_abs_error == pytest.approx(np.abs(d_ref - d)[mask].mean(), abs=1e-12)
    with pytest.raises(ShapeMismatch):
        contact_preservation((x, y[:2]), (x, y))


def test_diversity_proxy(rng):
    a = rng.normal(size=(6, NUM_JOINTS, 3))
    assert diversity_proxy([a, a.copy()]) == 0.0
    assert diversity_proxy([a, a + [1.0, 0.0, 0.0]]) == pytest.approx(1.0)
    ms = rng.normal(size=(3, 6, NUM_JOINTS, 3))

    def rms(p, q):
        return np.mean([np.sqrt(np.mean([np.sum((p[f, j] - q[f, j]) ** 2) for j in range(NUM_JOINTS)])) for f in range(6)])

    expect = np.mean([rms(ms[0], ms[1]), rms(ms[0], ms[2]), rms(ms[1], ms[2])])
    assert diversity_proxy(list(ms)) == pytest.approx(expect, abs=1e-9)
    with pytest.raises(ShapeMismatch):
        diversity_proxy([a])
    with pytest.raises(ShapeMismatch):
        diversity_proxy([a, a[:3]])
