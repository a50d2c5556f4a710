"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import itertools
import math

import numpy as np

RANK_WEIGHTS = {"b": 1.0, "t": 3.0, "f": 1.0, "h": 1.0, "p": 1.0}


def group_slices(k: int) -> dict[str, slice]:
    return {"t": slice(0, 2 * k), "f": slice(2 * k, 5 * k), "b": slice(5 * k, 5 * k + 189), "h": slice(5 * k + 189, 5 * k + 190), "p": slice(5 * k + 190, 5 * k + 193)}


def brute_force_ranking(features: np.ndarray, ids: list[tuple[str, int]], query: np.ndarray, k: int, tie_tol: float = 1e-9) -> list[tuple[str, int]]:
    """Full-database ranking by the weighted sum of per-term z-scored distances."""
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    zf = (features - mean) / std
    zq = (query - mean) / std
    sl = group_slices(k)
    dist = {}
    for g in "tbhp":
        dist[g] = np.sqrt(((zf[:, sl[g]] - zq[sl[g]]) ** 2).sum(axis=1))
    fq = query[sl["f"]]
    ff = features[:, sl["f"]]
    nq, nf = np.linalg.norm(fq), np.linalg.norm(ff, axis=1)
    cos = np.where(nf * nq > 0, ff @ fq / np.where(nf * nq > 0, nf * nq, 1.0), 0.0)
    dist["f"] = 1.0 - cos
    total = np.zeros(len(ids))
    for g, d in dist.items():
        s = d.std()
        z = np.zeros_like(d) if s < 1e-12 else (d - d.mean()) / s
        total += RANK_WEIGHTS[g] * z
    # scores within 1e-9 (relative above 1) of their neighbour form one tie run
    by_score = sorted(range(len(ids)), key=lambda i: total[i])
    group, g = {}, 0
    for prev, cur in zip([None] + by_score, by_score):
        if prev is not None and total[cur] - total[prev] > tie_tol * max(1.0, abs(total[cur])):
            g += 1
        group[cur] = g
    order = sorted(range(len(ids)), key=lambda i: (group[i], ids[i][0], ids[i][1]))
    return [ids[i] for i in order]


def forgetting_closed_form(dT, N, p, a, k):
    return a + (1 - a) * math.exp(-k * dT / (2**N * p))


def joint_state_optimum(grid, starts, goals, horizon=None):
    """Minimum sum of costs by breadth-first search over joint configurations.

    Uses the standard cost: each agent pays one per step until it reaches its
    goal for the last time. Search state is (positions, arrived-forever flags
    implied by cost accounting), explored with Dijkstra on joint moves.
    """
    import heapq

    n = len(starts)
    starts, goals = tuple(map(tuple, starts)), tuple(map(tuple, goals))
    if any(not grid.is_free(s) for s in starts + goals):
        return None
    horizon = horizon or grid.width * grid.height * 2 + 4
    # state: positions, done flags (agent has committed to staying at goal)
    start = (starts, tuple(False for _ in range(n)))
    if all(s == g for s, g in zip(starts, goals)):
        return 0
    pq = [(0, 0, start)]
    seen = {}
    counter = itertools.count()
    while pq:
        cost, t, (pos, done) = heapq.heappop(pq)
        if all(done):
            return cost
        key = (pos, done)
        if key in seen and seen[key] <= cost:
            continue
        seen[key] = cost
        if t > horizon:
            continue
        options = []
        for i in range(n):
            if done[i]:
                options.append([(pos[i], True)])
                continue
            opts = [(c, False) for c in [pos[i]] + grid.neighbors(pos[i])]
            if pos[i] == goals[i]:
                opts.append((pos[i], True))
            options.append(opts)
        for combo in itertools.product(*options):
            newpos = tuple(c for c, _ in combo)
            newdone = tuple(d for _, d in combo)
            if len(set(newpos)) < n:
                continue
            if any(newpos[i] == pos[j] and newpos[j] == pos[i] for i in range(n) for j in range(i + 1, n) if i != j and pos[i] != pos[j]):
                continue
            # committing costs nothing; moving or waiting costs one per unfinished agent
            step = sum(1 for i in range(n) if not newdone[i])
            # a committed agent entering "done" this step does so without moving
            if any(newdone[i] and not done[i] and newpos[i] != pos[i] for i in range(n)):
                continue
            heapq.heappush(pq, (cost + step, t + 1, (newpos, newdone)))
    return None
