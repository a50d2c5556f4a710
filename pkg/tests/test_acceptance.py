"""Acceptance criteria, one test each, reporting a pass/fail line per criterion."""

from __future__ import annotations

import itertools
import json
import math
import time
from importlib import resources

import numpy as np
import pytest

from duet.behavior import Behavior, End, parse, serialize
from duet.errors import MalformedBehavior, NoSolution, Timeout
from duet.evalkit import TrajProtocolConfig, run_traj_protocol
from duet.mogen import contact_guidance_step, contact_loss, forward_noise, linear_beta_schedule
from duet.motiondb.database import BuildConfig
from duet.motiondb.storage import load, save
from duet.pathfind import detect_conflicts, plan_cbs
from duet.scheduler.schema import transcript_schema
from duet.sociomind.memory import DEFAULT_PARAMS, MemoryItem, MemoryStore, forgetting_rate, retrieve_memories
from duet.sociomind.mind import BackgroundCandidate, select_background
from duet.synth import build_database
from episodes import invariant_failures, run_seeded, transcript_bytes
from oracles import brute_force_ranking, forgetting_closed_form, joint_state_optimum
from test_mogen import gradient_rel_error, violation_fixture
from test_momat import random_query, two_stage_ranking
from test_motiondb import check_zscore, small_db
from test_pathfind import random_instance, valid_path

jsonschema = pytest.importorskip("jsonschema")


def record(lines: list, number: int, ok: bool, detail: str) -> None:
    lines.append(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    print(lines[-1])


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def test_c01_forgetting_curve_conformance(acceptance_report):
    dts = np.linspace(0.0, 40.0, 10)
    ns = range(5)
    ps = np.linspace(1.0, 9.0, 10)
    as_ = (0.0, 0.1, 0.4, 0.8)
    ks = (0.5, 1.0, 2.0, 4.0, 8.0)

    def sweep():
        grid = np.empty((10, 5, 10, 4, 5))
        worst = 0.0
        for idx in itertools.product(range(10), range(5), range(10), range(4), range(5)):
            i, n, j, l, m = idx
            r = forgetting_rate(dts[i], ns[n], ps[j], as_[l], ks[m])
            grid[idx] = r
            worst = max(worst, abs(r - forgetting_closed_form(dts[i], ns[n], ps[j], as_[l], ks[m])))
        return grid, worst

    (grid, worst), elapsed = timed(sweep)
    floor = np.asarray(as_)[None, None, None, :, None]
    monotone = bool(
        np.all(np.diff(grid, axis=0) <= 1e-15)
        and np.all(np.diff(grid, axis=1) >= -1e-15)
        and np.all(np.diff(grid, axis=2) >= -1e-15)
        and np.all(grid >= floor - 1e-15)
        and np.all(grid <= 1.0 + 1e-15)
    )
    ok = grid.size == 10**4 and worst < 1e-9 and monotone and elapsed < 1.0
    record(acceptance_report, 1, ok, f"{grid.size} points, max |r - closed form| {worst:.1e}, monotone {monotone}, {elapsed:.2f} s")
    assert ok


def retention_time(kind: str, n: int, p: float, target: float) -> float:
    prm = DEFAULT_PARAMS[kind]
    return -math.log((target - prm.a) / (1 - prm.a)) * 2**n * p / prm.k


def test_c02_memory_threshold_semantics(acceptance_report):
    constants = {"event": (0.4, 4.0, 0.6), "thought": (0.1, 2.0, 0.3)}
    wrong, cases = [], 0
    for kind, (a, k, tf) in constants.items():
        prm = DEFAULT_PARAMS[kind]
        if (prm.a, prm.k, prm.threshold) != (a, k, tf):
            wrong.append((kind, "constants"))
        for n, p in itertools.product(range(4), (1, 3, 5, 9)):
            for eps in (1e-6, -1e-6, 0.05, -0.05):
                t = retention_time(kind, n, p, tf + eps)
                store = MemoryStore()
                store.add(MemoryItem(kind, "the old bookshelf", poignancy=p, access_count=n, last_access_episode=0))
                # a fractional current episode places retention just above or below the threshold
                got = retrieve_memories(store, "bookshelf", 3, t)
                cases += 1
                if (forgetting_rate(t, n, p, a, k) >= tf) != (eps > 0) or (len(got) == 1) != (eps > 0):
                    wrong.append((kind, n, p, eps))
    ok = not wrong
    record(acceptance_report, 2, ok, f"{cases} cases at a/k/T_f 0.4/4/0.6 and 0.1/2/0.3 incl. +-1e-6, {len(wrong)} wrong")
    assert ok, wrong[:5]


def test_c03_retrieval_oracle_equivalence(db, acceptance_report):
    r = np.random.default_rng(2024)
    ids = [(w.clip_id, w.start) for w in map(db.window_ref, range(db.num_windows))]
    queries = [random_query(db, r) for _ in range(200)]
    texts = [str(r.choice(["walk forward", "stand still", "sit down", "shake hands"])) for _ in queries]
    ranked, elapsed = timed(lambda: [two_stage_ranking(db, q, t) for q, t in zip(queries, texts)])
    agree = sum(got == brute_force_ranking(db.features, ids, q, db.config.k) for got, q in zip(ranked, queries))
    ok = agree == 200 and elapsed < 30.0
    record(acceptance_report, 3, ok, f"{agree}/200 full rankings agree over {db.num_windows} windows, {elapsed:.1f} s")
    assert ok


def test_c04_zscore_contract(db, acceptance_report):
    built = {
        "default corpus": db,
        "seed 1 k=10": build_database(1, 40, BuildConfig(k=10, stride=5)),
        "seed 2 k=20": build_database(2, 30, BuildConfig(k=20, stride=7)),
        "hand-built": small_db(),
    }
    bad = []
    for name, d in built.items():
        try:
            check_zscore(d)
        except AssertionError:
            bad.append(name)
    ok = not bad
    record(acceptance_report, 4, ok, f"{len(built) - len(bad)}/{len(built)} built databases within 1e-9 on mean and std")
    assert ok, bad


def test_c05_trajectory_ablation(db, acceptance_report):
    parts, ok = [], True

    def run():
        nonlocal ok
        for kind in ("square", "circle", "wave"):
            on = run_traj_protocol(db, TrajProtocolConfig(kind, n_seeds=50, duration=30.0), seed=0)
            off = run_traj_protocol(db, TrajProtocolConfig(kind, n_seeds=50, duration=30.0, kinematic_features_enabled=False), seed=0)
            ratio = off.mean / on.mean
            ok = ok and on.mean < 0.5 and ratio >= 5.0
            parts.append(f"{kind} {on.mean:.3f}+-{on.std:.3f} m vs {off.mean:.2f} m ({ratio:.0f}x)")

    _, elapsed = timed(run)
    ok = ok and elapsed < 300.0
    record(acceptance_report, 5, ok, "; ".join(parts) + f"; {elapsed:.0f} s")
    assert ok


def test_c06_cbs_optimality(acceptance_report):
    r = np.random.default_rng(99)
    counts = {"solved": 0, "unsolvable": 0}
    problems = []

    def run():
        for i in range(100):
            g, s, t = random_instance(r, max_agents=3, max_side=4)
            opt = joint_state_optimum(g, s, t)
            if opt is None:
                try:
                    plan_cbs(g, s, t, max_nodes=2000, cost_bound=4 * g.width * g.height)
                    problems.append((i, "planned an unsolvable instance"))
                except (NoSolution, Timeout):
                    counts["unsolvable"] += 1
                continue
            paths = plan_cbs(g, s, t)
            for p, a, b in zip(paths, s, t):
                valid_path(g, p, a, b)
            if detect_conflicts(paths) is not None:
                problems.append((i, "conflict"))
            if sum(p.cost for p in paths) != opt:
                problems.append((i, "suboptimal"))
            counts["solved"] += 1

    _, elapsed = timed(run)
    ok = not problems and elapsed < 120.0
    record(acceptance_report, 6, ok, f"{counts['solved']} optimal and conflict-free, {counts['unsolvable']} unsolvable rejected, {len(problems)} problems, {elapsed:.1f} s")
    assert ok, problems[:5]


def test_c07_contact_guidance_gradient(acceptance_report):
    worst = max(gradient_rel_error(seed) for seed in range(50))
    increases = 0
    # a pair distance shrinks by at most 2 * lambda * joints per step, so a 2.5 m gap stays violated for 20 steps
    for seed in range(50):
        c, pair = violation_fixture(np.random.default_rng(seed), gap=2.5)
        losses = [contact_loss(pair, c)]
        for _ in range(20):
            pair = contact_guidance_step(pair, c, 0.01)
            losses.append(contact_loss(pair, c))
        increases += int(np.sum(np.diff(losses) > 0))
    ok = worst < 1e-4 and increases == 0
    record(acceptance_report, 7, ok, f"max relative gradient error {worst:.1e} over 50 instances, {increases} increases in 50 x 20 steps at lambda 0.01")
    assert ok


def test_c08_diffusion_forward_marginals(acceptance_report):
    sched = linear_beta_schedule()
    n, value = 10**4, 0.7
    rng = np.random.default_rng(8)
    x0 = np.zeros((n, 1, 3))
    x0[:, 0, 0] = value  # one scalar per sample, samples run along the frame axis
    worst = 0.0
    for t in (1, 500, 1000):
        ab = sched.alpha_bar(t)
        var = 1.0 - ab
        sample = forward_noise((x0, x0), t, sched, rng)[0][:, 0, 0]
        z_mean = abs(sample.mean() - math.sqrt(ab) * value) / math.sqrt(var / n)
        z_var = abs(sample.var(ddof=1) - var) / (var * math.sqrt(2.0 / (n - 1)))
        worst = max(worst, z_mean, z_var)
    ok = sched.T == 1000 and sched.betas[0] == 1e-4 and math.isclose(sched.betas[-1], 0.02) and worst < 3.0
    record(acceptance_report, 8, ok, f"largest mean/variance deviation {worst:.2f} sigma at t = 1, 500, 1000 with {n} samples")
    assert ok


def test_c09_scheduler_invariants(db, scene, acceptance_report):
    failures, nondeterministic, steps = [], [], 0
    for seed in range(100):
        tr, provider = run_seeded(db, scene, seed)
        steps += len(tr.steps)
        failures += [(seed, f) for f in invariant_failures(tr, provider)]
        again, _ = run_seeded(db, scene, seed)
        if transcript_bytes(again) != transcript_bytes(tr):
            nondeterministic.append(seed)
    ok = not failures and not nondeterministic
    record(acceptance_report, 9, ok, f"100 episodes ({steps} rounds), {len(failures)} invariant failures, {len(nondeterministic)} non-identical reruns")
    assert ok, (failures[:5], nondeterministic[:5])


def test_c10_topic_selection(acceptance_report):
    r = np.random.default_rng(10)
    mismatches = ties = 0
    for _ in range(1000):
        na, nb = (int(v) for v in r.integers(0, 6, size=2))
        if na + nb == 0:
            nb = 1
        # narrow score ranges make equal top scores common
        ca = [BackgroundCandidate(f"a{i}", int(r.integers(1, 4)), int(r.integers(1, 4))) for i in range(na)]
        cb = [BackgroundCandidate(f"b{i}", int(r.integers(1, 4)), int(r.integers(1, 4))) for i in range(nb)]
        pool = ca + cb
        scores = [2 * c.emergency + c.poignancy for c in pool]
        ties += scores.count(max(scores)) > 1
        if select_background(ca, cb) is not pool[scores.index(max(scores))]:
            mismatches += 1
    ok = mismatches == 0 and ties > 0
    record(acceptance_report, 10, ok, f"1000 candidate sets ({ties} with tied best score), {mismatches} mismatches")
    assert ok


ALPHABET = list("abcxyz <>/_-.,!?\n\t") + ["é", "字", "🙂", "<speech>", "</", "END"]
KEYS = ["speech", "motion", "place", "mood", "x_1"]


def random_behavior(r: np.random.Generator) -> Behavior | None:
    entries = []
    for _ in range(int(r.integers(1, 5))):
        key = str(r.choice(KEYS))
        value = "".join(r.choice(ALPHABET, size=int(r.integers(0, 12))))
        entries.append((key, value))
    try:
        return Behavior(tuple(entries))
    except MalformedBehavior:
        return None


def test_c11_dsl_round_trip_and_fuzz(acceptance_report):
    r = np.random.default_rng(11)
    made = broken = 0
    while made < 10**4:
        b = random_behavior(r)
        if b is None:
            continue
        made += 1
        broken += parse(serialize(b)) != b
    crashes = 0
    for _ in range(10**5):
        data = r.bytes(int(r.integers(0, 64)))
        try:
            out = parse(data)
            crashes += not (out is End or isinstance(out, Behavior))
        except MalformedBehavior:
            pass
        except Exception:
            crashes += 1
    ok = broken == 0 and crashes == 0
    record(acceptance_report, 11, ok, f"{made} round trips with {broken} mismatches, 100000 random byte strings with {crashes} crashes")
    assert ok


def test_c12_persistence(db, scene, tmp_path, acceptance_report):
    save(db, tmp_path / "db.bin")
    back = load(tmp_path / "db.bin")
    save(back, tmp_path / "again.bin")
    same_bytes = (tmp_path / "db.bin").read_bytes() == (tmp_path / "again.bin").read_bytes()
    arrays_equal = back.equals(db) and np.array_equal(back.features, db.features)
    checked_in = json.loads(resources.files("duet.data").joinpath("transcript.schema.json").read_text(encoding="utf-8"))
    validator = jsonschema.Draft202012Validator(checked_in)
    invalid = 0
    for seed in range(5):
        tr, _ = run_seeded(db, scene, seed, max_rounds=3)
        invalid += not validator.is_valid(json.loads(json.dumps(tr.to_json())))
    ok = same_bytes and arrays_equal and invalid == 0 and checked_in == transcript_schema()
    record(acceptance_report, 12, ok, f"db round trip bit-exact {same_bytes and arrays_equal}, {5 - invalid}/5 transcripts valid against the checked-in schema")
    assert ok
