from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from duet.core import rotations as rot
from duet.core.kinematics import forward_kinematics
from duet.core.model import NUM_JOINTS, Pose, Trajectory, default_skeleton
from duet.evalkit import make_trajectory, place_seed, seed_windows
from duet.momat.blend import Anchor, blend_transition, hold, splice, stitch, warp_to_ground
from duet.momat.follow import FollowConfig, FollowLog, follow_trajectory
from duet.momat.interactive import match_interactive_pair
from duet.momat.query import extract_query_features
from duet.momat.search import MatchQuery, MatchResult, Weights, kinematic_stage, match, select_candidate, semantic_stage, zscore
from duet.scheduler.world import idle_clips
from oracles import brute_force_ranking


def random_query(db, r):
    w = int(r.integers(db.num_windows))
    ref = db.window_ref(w)
    pose = db.clips[ref.clip_id].pose(ref.start)
    kind = ["wave", "circle", "square"][int(r.integers(3))]
    traj = make_trajectory(kind, 2.0, db.config.fps)
    shifted = type(traj)(traj.times, traj.positions - traj.positions[0] + pose.ground, traj.facings)
    partner = None if r.random() < 0.5 else pose.root_position + r.normal(size=3)
    return extract_query_features(pose, shifted, partner, db.config.k, db.config.fps)


def two_stage_ranking(db, q, text):
    cands = semantic_stage(db, text, db.num_windows)
    ranked = kinematic_stage(cands, q, db.norm_stats, Weights(), db.num_windows)
    return [r.ref for r in ranked]


def test_two_stage_equals_brute_force_sample(db):
    r = np.random.default_rng(5)
    ids = [(w.clip_id, w.start) for w in map(db.window_ref, range(db.num_windows))]
    for _ in range(5):
        q = random_query(db, r)
        assert two_stage_ranking(db, q, "walk forward") == brute_force_ranking(db.features, ids, q, db.config.k)


def test_semantic_stage_orders_by_text(db):
    c = semantic_stage(db, "hug", 12)
    assert len(c) == 12
    assert np.all(np.diff(c.text_scores) <= 0)
    assert any("hug" in db.annotations[cid][0] for cid, _ in c.refs())


@given(st.floats(0.01, 100.0))
@settings(max_examples=25)
def test_weight_scaling_keeps_ranking(db, c):
    q = random_query(db, np.random.default_rng(9))
    cands = semantic_stage(db, "turn left", 80)
    a = [x.ref for x in kinematic_stage(cands, q, db.norm_stats, Weights(), 20)]
    b = [x.ref for x in kinematic_stage(cands, q, db.norm_stats, Weights().scaled(c), 20)]
    assert a == b


def test_zscore_degenerate():
    assert zscore(np.full(4, 3.0)).tolist() == [0, 0, 0, 0]
    z = zscore(np.array([1.0, 2.0, 3.0]))
    assert abs(z.mean()) < 1e-12 and abs(z.std() - 1) < 1e-12


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights(0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        Weights(b=-1.0)
    with pytest.raises(ValueError):
        MatchQuery(None, "x", K1=3, K2=5)


def test_select_candidate_tolerance(rng):
    mk = lambda s: MatchResult("c", 0, 0, s)
    ranked = [mk(-10.0), mk(-9.8), mk(-5.0)]
    picks = {select_candidate(ranked, np.random.default_rng(i)).score for i in range(40)}
    assert picks == {-10.0, -9.8}
    assert select_candidate([mk(1.0), mk(3.0)], rng).score == 1.0


def test_match_reproducible_with_seed(db):
    pose = db.clips[idle_clips(db, "standing")[0]].pose(0)
    q = MatchQuery(pose, "wave hello", None, pose.root_position + [0, 0, 1.0], 30, 10)
    a = match(db, q, np.random.default_rng(3))
    b = match(db, q, np.random.default_rng(3))
    assert a == b


def test_blend_transition_endpoints(db):
    a = db.clips["walk_000"].slice(0, 10)
    b = db.clips["walk_050"].slice(0, 10)
    out = blend_transition(a, b, 6)
    assert np.array_equal(out.root_positions[0], a.root_positions[0])
    assert np.array_equal(out.rotations[-1], b.rotations[5])
    assert out.num_frames == 6


def test_stitch_seams_are_continuous(db):
    segs = [db.clips["walk_000"].slice(0, 20), db.clips["walk_070"].slice(0, 15), db.clips["idle_stand_0"].slice(0, 12)]
    out = stitch(segs, 5)
    assert out.num_frames == 47
    for seam in (20, 35):
        assert np.max(np.abs(out.positions[seam] - out.positions[seam - 1])) < 1e-6
    assert np.allclose(out.positions, forward_kinematics(out.skeleton, out.root_positions, out.rotations), atol=1e-9)


def test_splice_keeps_length_and_tail(db):
    seg = db.clips["walk_010"].slice(0, 12)
    prev = db.clips["walk_020"].slice(0, 12)
    out = splice(prev, seg, 5)
    assert out.num_frames == 12 and np.array_equal(out.positions[5:], seg.positions[5:])


def test_anchor_places_frame():
    from duet.synth import walk_clip
    from duet.core.model import default_skeleton

    clip = walk_clip("w", default_skeleton(), 1.0, 0.0, 30)
    out = Anchor.placing(clip, 0, [2.0, 0, 3.0], 0.5).frames(clip, [0, 10])
    assert np.allclose(out.root_positions[0, [0, 2]], [2.0, 3.0])
    assert np.isclose(rot.yaw_of(out.facings[0]), 0.5)


def test_warp_to_ground(db):
    clip = db.clips["walk_030"]
    out = warp_to_ground(clip, [5.0, -1.0])
    assert np.allclose(out.root_positions[-1, [0, 2]], [5.0, -1.0])
    assert np.array_equal(out.root_positions[0], clip.root_positions[0])


def test_follow_trajectory_reproducible_and_tracks(db):
    traj = make_trajectory("circle", 4.0, db.config.fps)
    pose = place_seed(db, int(seed_windows(db)[0]), traj)
    log = FollowLog()
    a = follow_trajectory(db, pose, traj, FollowConfig(), np.random.default_rng(1), log)
    b = follow_trajectory(db, pose, traj, FollowConfig(), np.random.default_rng(1))
    assert a.equals(b)
    assert a.num_frames == int(4.0 * db.config.fps) + 1
    assert log.matches
    step = np.linalg.norm(np.diff(a.root_positions[:, [0, 2]], axis=0), axis=1)
    assert step.max() < 0.15


def test_interactive_pair_match(db):
    pose = db.clips[idle_clips(db, "standing")[0]].pose(0)
    other = Anchor.placing(db.clips[idle_clips(db, "standing")[1]], 0, pose.root_position + [0, 0, 1.0], np.pi).frames(
        db.clips[idle_clips(db, "standing")[1]], [0]
    ).pose(0)
    m = match_interactive_pair(db, "hug", pose, other)
    assert db.partner_of(m.active.clip_id) == m.passive.clip_id
    assert m.active.start == m.passive.start
    world, yaw = m.passive_placement(np.zeros(3), 0.0)
    assert world[2] > 0.3  # partner is placed in front
    only = [a for a, _ in db.pair_links][:2]
    assert match_interactive_pair(db, "hug", pose, other, clip_ids=only).active.clip_id in only



@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 5.0))
def test_converged_query_starts_at_character_and_caps_correction(dx, dz, cap):
    k, n = 30, 60
    line = Trajectory(np.arange(n) / 30.0, np.stack([np.zeros(n), np.linspace(0.0, 2.0, n)], axis=-1), np.tile([0.0, 0.0, 1.0], (n, 1)))
    eye = np.broadcast_to(rot.matrix_to_rot6d(np.eye(3)), (NUM_JOINTS, 6))
    pose = Pose.from_rotations(default_skeleton(), [dx, 0.9, dz], eye)
    q = extract_query_features(pose, line, None, k, 30.0, 0.0, converge=True, max_correction=cap)
    t = q[: 2 * k].reshape(k, 2)  # facing +z, so the local frame only translates
    assert np.allclose(t[0], 0.0, atol=1e-12)
    disp = line.sample(np.array([(k - 1) / 30.0]))[0][0] - line.positions[0]
    offset = line.positions[0] - [dx, dz]
    norm = np.linalg.norm(offset)
    expect = offset * min(1.0, cap / norm) if norm > 0 else offset
    assert np.allclose(t[-1] - disp, expect, atol=1e-9)
