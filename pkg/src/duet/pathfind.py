"""Conflict-based search over a 4-connected grid with unit-time moves and waits."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from duet.core import rotations as rot
from duet.core.model import GridMap, Trajectory
from duet.errors import NoPath, NoSolution, Timeout

Cell = tuple[int, int]
DEFAULT_NODE_BUDGET = 100_000
DEFAULT_SPEED = 1.2


@dataclass(frozen=True)
class Constraint:
    """Vertex ``(cell, t)`` or edge ``(cell -> cell_b between t and t+1)`` ban."""

    agent: int
    cell: Cell
    t: int
    cell_b: Cell | None = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("constraint time must be non-negative")

    @property
    def is_edge(self) -> bool:
        return self.cell_b is not None


@dataclass(frozen=True)
class AgentPath:
    agent: int
    cells: tuple[Cell, ...]  # cells[t] is the position at step t

    @property
    def cost(self) -> int:
        return len(self.cells) - 1

    def at(self, t: int) -> Cell:
        return self.cells[min(t, len(self.cells) - 1)]

    def to_json(self) -> dict:
        return {"agent": self.agent, "cost": self.cost, "cells": [list(c) for c in self.cells]}


@dataclass(frozen=True)
class Conflict:
    kind: str  # "vertex" or "edge"
    agents: tuple[int, int]
    t: int
    cell: Cell
    cell_b: Cell | None = None  # edge: agents[0] moves cell -> cell_b


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def low_level_search(grid: GridMap, start: Cell, goal: Cell, constraints: Iterable[Constraint] = (), agent: int = 0) -> AgentPath:
    """Space-time A* honoring the constraints addressed to ``agent``.

    Open-list priority is ``(f, t, cell)``. The goal is accepted only once no
    later vertex constraint would force the agent off it.
    """
    start, goal = tuple(start), tuple(goal)
    if not (grid.is_free(start) and grid.is_free(goal)):
        raise NoPath("start and goal must be free cells")
    vertex: set[tuple[Cell, int]] = set()
    edge: set[tuple[Cell, Cell, int]] = set()
    latest = -1
    goal_block = -1
    for c in constraints:
        if c.agent != agent:
            continue
        latest = max(latest, c.t)
        if c.is_edge:
            edge.add((tuple(c.cell), tuple(c.cell_b), c.t))
        else:
            vertex.add((tuple(c.cell), c.t))
            if tuple(c.cell) == goal:
                goal_block = max(goal_block, c.t)
    if (start, 0) in vertex:
        raise NoPath("start cell is forbidden at t=0")
    horizon = latest + 1 + len(grid.free_cells())
    open_: list = [(manhattan(start, goal), 0, start)]
    parent: dict[tuple[Cell, int], tuple[Cell, int] | None] = {(start, 0): None}
    closed: set[tuple[Cell, int]] = set()
    while open_:
        f, t, cell = heapq.heappop(open_)
        if (cell, t) in closed:
            continue
        closed.add((cell, t))
        if cell == goal and t > goal_block:
            node = (cell, t)
            cells = []
            while node is not None:
                cells.append(node[0])
                node = parent[node]
            return AgentPath(agent, tuple(reversed(cells)))
        if t >= horizon:
            continue
        for nxt in [cell] + grid.neighbors(cell):
            state = (nxt, t + 1)
            if state in closed or state in vertex or (cell, nxt, t) in edge:
                continue
            if state not in parent:
                parent[state] = (cell, t)
                heapq.heappush(open_, (t + 1 + manhattan(nxt, goal), t + 1, nxt))
    raise NoPath(f"no path from {start} to {goal} under the given constraints")


def detect_conflicts(paths: Sequence[AgentPath]) -> Conflict | None:
    """Earliest conflict: at each t, vertex conflicts over pairs (i<j), then
    swap conflicts on the move from t to t+1."""
    if len(paths) < 2:
        return None
    horizon = max(len(p.cells) for p in paths)
    pairs = list(itertools.combinations(range(len(paths)), 2))
    for t in range(horizon):
        for i, j in pairs:
            if paths[i].at(t) == paths[j].at(t):
                return Conflict("vertex", (paths[i].agent, paths[j].agent), t, paths[i].at(t))
        for i, j in pairs:
            a0, a1 = paths[i].at(t), paths[i].at(t + 1)
            b0, b1 = paths[j].at(t), paths[j].at(t + 1)
            if a0 != a1 and a0 == b1 and a1 == b0:
                return Conflict("edge", (paths[i].agent, paths[j].agent), t, a0, a1)
    return None


@dataclass(order=True)
class _Node:
    cost: int
    node_id: int
    constraints: tuple = field(compare=False)
    paths: tuple = field(compare=False)


def plan_cbs(
    grid: GridMap,
    starts: Sequence[Cell],
    goals: Sequence[Cell],
    max_nodes: int = DEFAULT_NODE_BUDGET,
    cost_bound: int | None = None,
) -> list[AgentPath]:
    """Minimum sum-of-costs conflict-free paths.

    Best-first over the constraint tree keyed on ``(sum of costs, node id)``.
    Raises NoSolution when the tree is exhausted (nodes above ``cost_bound``
    are discarded) and Timeout after ``max_nodes`` generated nodes.
    """
    starts = [tuple(s) for s in starts]
    goals = [tuple(g) for g in goals]
    if len(starts) != len(goals):
        raise ValueError("one goal per start")
    for c in starts + goals:
        if not grid.is_free(c):
            raise ValueError(f"cell {c} is not free")
    if len(set(starts)) != len(starts) or len(set(goals)) != len(goals):
        raise ValueError("starts and goals must be mutually distinct")
    try:
        root_paths = tuple(low_level_search(grid, s, g, (), i) for i, (s, g) in enumerate(zip(starts, goals)))
    except NoPath as exc:
        raise NoSolution(str(exc)) from exc
    counter = itertools.count()
    root = _Node(sum(p.cost for p in root_paths), next(counter), (), root_paths)
    if cost_bound is not None and root.cost > cost_bound:
        raise NoSolution("optimal unconstrained cost already exceeds the bound")
    open_ = [root]
    generated = 1
    while open_:
        node = heapq.heappop(open_)
        conflict = detect_conflicts(node.paths)
        if conflict is None:
            return list(node.paths)
        i, j = conflict.agents
        if conflict.kind == "vertex":
            branches = [Constraint(i, conflict.cell, conflict.t), Constraint(j, conflict.cell, conflict.t)]
        else:
            branches = [
                Constraint(i, conflict.cell, conflict.t, conflict.cell_b),
                Constraint(j, conflict.cell_b, conflict.t, conflict.cell),
            ]
        for con in branches:
            if generated >= max_nodes:
                raise Timeout(f"constraint tree exceeded {max_nodes} nodes")
            constraints = node.constraints + (con,)
            a = con.agent
            try:
                new_path = low_level_search(grid, starts[a], goals[a], constraints, a)
            except NoPath:
                continue
            paths = list(node.paths)
            paths[a] = new_path
            child = _Node(sum(p.cost for p in paths), next(counter), constraints, tuple(paths))
            generated += 1
            if cost_bound is not None and child.cost > cost_bound:
                continue
            heapq.heappush(open_, child)
    raise NoSolution("constraint tree exhausted")


def path_to_trajectory(
    path: AgentPath | Sequence[Cell],
    cell_size: float = 0.5,
    speed: float = DEFAULT_SPEED,
    initial_facing=None,
    start_time: float = 0.0,
) -> Trajectory:
    """Cell centers visited at ``speed``; one sample per grid step.

    Facing follows the motion direction, corner samples take the spherical
    midpoint of the incoming and outgoing directions, and wait steps keep the
    previous facing.
    """
    cells = path.cells if isinstance(path, AgentPath) else tuple(tuple(c) for c in path)
    if speed <= 0 or cell_size <= 0:
        raise ValueError("speed and cell size must be positive")
    pts = (np.asarray(cells, dtype=np.float64) + 0.5) * cell_size
    n = len(pts)
    dt = cell_size / speed
    times = start_time + np.arange(n) * dt
    init_yaw = 0.0 if initial_facing is None else float(rot.yaw_of(np.asarray(initial_facing, float)))
    steps = np.diff(pts, axis=0)
    step_yaw = [None if np.allclose(s, 0.0) else float(np.arctan2(s[0], s[1])) for s in steps]
    yaws = []
    current = init_yaw
    for k in range(n):
        incoming = step_yaw[k - 1] if k > 0 else None
        outgoing = step_yaw[k] if k < n - 1 else None
        if incoming is not None and outgoing is not None:
            current = incoming + 0.5 * float(rot.wrap_angle(outgoing - incoming))
        elif outgoing is not None and k == 0:
            current = outgoing
        elif incoming is not None:
            current = incoming
        yaws.append(current)
    return Trajectory(times, pts, rot.facing_of_yaw(np.array(yaws)))
