"""Skeleton, pose, clip, trajectory, grid and scene primitives.

Everything here is immutable after construction: arrays are copied and
flagged read-only so instances can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from duet.core import rotations as rot
from duet.errors import InvalidClip, InvalidSkeleton

NUM_JOINTS = 21
CATEGORIES = ("basic", "interactive", "script")
BASIC_STATES = ("standing", "seated")


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Skeleton:
    joint_names: tuple[str, ...]
    parent_index: tuple[int, ...]
    rest_offsets: np.ndarray

    def __post_init__(self):
        names = tuple(self.joint_names)
        parents = tuple(int(p) for p in self.parent_index)
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "parent_index", parents)
        object.__setattr__(self, "rest_offsets", _frozen(self.rest_offsets))
        if len(names) != NUM_JOINTS:
            raise InvalidSkeleton(f"expected {NUM_JOINTS} joints, got {len(names)}")
        if len(set(names)) != len(names):
            raise InvalidSkeleton("joint names must be unique")
        if len(parents) != NUM_JOINTS or self.rest_offsets.shape != (NUM_JOINTS, 3):
            raise InvalidSkeleton("parent/offset arrays must cover every joint")
        if parents[0] != -1 or any(p == -1 for p in parents[1:]):
            raise InvalidSkeleton("joint 0 must be the single root")
        # parents precede children, which also rules out cycles
        for j, p in enumerate(parents[1:], start=1):
            if not 0 <= p < j:
                raise InvalidSkeleton(f"joint {names[j]!r} has parent {p} out of order")

    def index(self, name: str) -> int:
        return self.joint_names.index(name)

    def __eq__(self, other):
        if not isinstance(other, Skeleton):
            return NotImplemented
        return (
            self.joint_names == other.joint_names
            and self.parent_index == other.parent_index
            and np.array_equal(self.rest_offsets, other.rest_offsets)
        )

    def __hash__(self):
        return hash((self.joint_names, self.parent_index, self.rest_offsets.tobytes()))

    def to_json(self) -> dict:
        return {
            "joints": [
                {"name": n, "parent": (None if p < 0 else self.joint_names[p]), "offset": o.tolist()}
                for n, p, o in zip(self.joint_names, self.parent_index, self.rest_offsets)
            ]
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Skeleton":
        joints = doc["joints"]
        names = [j["name"] for j in joints]
        parents = []
        for j in joints:
            p = j.get("parent")
            if p is None or p == -1:
                parents.append(-1)
            elif isinstance(p, int):
                parents.append(p)
            else:
                if p not in names:
                    raise InvalidSkeleton(f"unknown parent {p!r}")
                parents.append(names.index(p))
        return cls(tuple(names), tuple(parents), np.array([j["offset"] for j in joints], dtype=float))


# 21-joint body without fingers. Offsets are metres in the rest pose, y-up,
# +z forward, +x to the character's left.
_DEFAULT_JOINTS = [
    ("hips", None, (0.0, 0.0, 0.0)),
    ("spine", "hips", (0.0, 0.10, 0.0)),
    ("chest", "spine", (0.0, 0.20, 0.0)),
    ("neck", "chest", (0.0, 0.22, 0.0)),
    ("head", "neck", (0.0, 0.10, 0.0)),
    ("l_collar", "chest", (0.07, 0.16, 0.0)),
    ("l_shoulder", "l_collar", (0.12, 0.0, 0.0)),
    ("l_elbow", "l_shoulder", (0.0, -0.28, 0.0)),
    ("l_wrist", "l_elbow", (0.0, -0.25, 0.0)),
    ("r_collar", "chest", (-0.07, 0.16, 0.0)),
    ("r_shoulder", "r_collar", (-0.12, 0.0, 0.0)),
    ("r_elbow", "r_shoulder", (0.0, -0.28, 0.0)),
    ("r_wrist", "r_elbow", (0.0, -0.25, 0.0)),
    ("l_hip", "hips", (0.09, -0.05, 0.0)),
    ("l_knee", "l_hip", (0.0, -0.40, 0.0)),
    ("l_ankle", "l_knee", (0.0, -0.40, 0.0)),
    ("l_toe", "l_ankle", (0.0, -0.05, 0.13)),
    ("r_hip", "hips", (-0.09, -0.05, 0.0)),
    ("r_knee", "r_hip", (0.0, -0.40, 0.0)),
    ("r_ankle", "r_knee", (0.0, -0.40, 0.0)),
    ("r_toe", "r_ankle", (0.0, -0.05, 0.13)),
]


def default_skeleton() -> Skeleton:
    names = [n for n, _, _ in _DEFAULT_JOINTS]
    parents = [-1 if p is None else names.index(p) for _, p, _ in _DEFAULT_JOINTS]
    return Skeleton(tuple(names), tuple(parents), np.array([o for _, _, o in _DEFAULT_JOINTS]))


@dataclass(frozen=True, eq=False)
class Pose:
    root_position: np.ndarray
    joint_rotations: np.ndarray
    joint_positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "root_position", _frozen(self.root_position))
        object.__setattr__(self, "joint_rotations", _frozen(self.joint_rotations))
        object.__setattr__(self, "joint_positions", _frozen(self.joint_positions))

    @classmethod
    def from_rotations(cls, skeleton: Skeleton, root_position, joint_rotations) -> "Pose":
        from duet.core.kinematics import forward_kinematics

        r6 = rot.orthonormalize6d(joint_rotations)
        return cls(np.asarray(root_position, float), r6, forward_kinematics(skeleton, root_position, r6))

    @property
    def root_matrix(self) -> np.ndarray:
        return rot.rot6d_to_matrix(self.joint_rotations[0])

    @property
    def facing(self) -> np.ndarray:
        return rot.facing_from_matrix(self.root_matrix)

    @property
    def yaw(self) -> float:
        return float(rot.yaw_of(self.facing))

    @property
    def ground(self) -> np.ndarray:
        """Hip position projected on the ground, as (x, z)."""
        return self.root_position[[0, 2]].copy()


@dataclass(frozen=True, eq=False)
class MotionClip:
    """A skeletal motion. Holds per-frame arrays; ``frames`` yields Poses."""

    id: str
    skeleton: Skeleton
    root_positions: np.ndarray  # (F, 3)
    rotations: np.ndarray  # (F, 21, 6), orthonormalized
    fps: float
    annotation: str | None = None
    category: str = "basic"
    positions: np.ndarray | None = None  # (F, 21, 3), derived when omitted

    def __post_init__(self):
        root = np.asarray(self.root_positions, dtype=np.float64)
        r6 = np.asarray(self.rotations, dtype=np.float64)
        if root.ndim != 2 or root.shape[1] != 3 or root.shape[0] == 0:
            raise InvalidClip(f"clip {self.id!r}: frames must be non-empty (F, 3) roots")
        if r6.shape != (root.shape[0], NUM_JOINTS, 6):
            raise InvalidClip(f"clip {self.id!r}: rotations must be (F, {NUM_JOINTS}, 6)")
        if not self.fps > 0:
            raise InvalidClip(f"clip {self.id!r}: fps must be positive")
        if self.category not in CATEGORIES:
            raise InvalidClip(f"clip {self.id!r}: unknown category {self.category!r}")
        if not (np.all(np.isfinite(root)) and np.all(np.isfinite(r6))):
            raise InvalidClip(f"clip {self.id!r}: non-finite values")
        object.__setattr__(self, "root_positions", _frozen(root))
        object.__setattr__(self, "rotations", _frozen(r6))
        object.__setattr__(self, "fps", float(self.fps))
        if self.positions is None:
            from duet.core.kinematics import forward_kinematics

            pos = forward_kinematics(self.skeleton, root, r6)
        else:
            pos = np.asarray(self.positions, dtype=np.float64)
            if pos.shape != (root.shape[0], NUM_JOINTS, 3):
                raise InvalidClip(f"clip {self.id!r}: positions shape mismatch")
        object.__setattr__(self, "positions", _frozen(pos))

    @classmethod
    def from_raw(cls, id, skeleton, root_positions, rotations, fps, annotation=None, category="basic"):
        """Build a clip, repairing 6D rotations with Gram-Schmidt first."""
        return cls(id, skeleton, root_positions, rot.orthonormalize6d(rotations), fps, annotation, category)

    @property
    def num_frames(self) -> int:
        return int(self.root_positions.shape[0])

    def __len__(self) -> int:
        return self.num_frames

    @property
    def duration(self) -> float:
        return (self.num_frames - 1) / self.fps

    def pose(self, i: int) -> Pose:
        return Pose(self.root_positions[i], self.rotations[i], self.positions[i])

    @property
    def frames(self) -> list[Pose]:
        return [self.pose(i) for i in range(self.num_frames)]

    @cached_property
    def root_matrices(self) -> np.ndarray:
        return rot.rot6d_to_matrix(self.rotations[:, 0])

    @cached_property
    def facings(self) -> np.ndarray:
        return rot.facing_from_matrix(self.root_matrices)

    def slice(self, start: int, stop: int, new_id: str | None = None) -> "MotionClip":
        return MotionClip(
            new_id or self.id,
            self.skeleton,
            self.root_positions[start:stop],
            self.rotations[start:stop],
            self.fps,
            self.annotation,
            self.category,
            self.positions[start:stop],
        )

    def equals(self, other: "MotionClip") -> bool:
        """Structural, bit-exact equality."""
        return (
            self.id == other.id
            and self.skeleton == other.skeleton
            and self.fps == other.fps
            and self.annotation == other.annotation
            and self.category == other.category
            and np.array_equal(self.root_positions, other.root_positions)
            and np.array_equal(self.rotations, other.rotations)
            and np.array_equal(self.positions, other.positions)
        )


def concat_clips(clips: Sequence[MotionClip], new_id: str) -> MotionClip:
    first = clips[0]
    return MotionClip(
        new_id,
        first.skeleton,
        np.concatenate([c.root_positions for c in clips]),
        np.concatenate([c.rotations for c in clips]),
        first.fps,
        first.annotation,
        first.category,
        np.concatenate([c.positions for c in clips]),
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timed ground path: times (N,), positions (N, 2) as (x, z), unit facings (N, 3)."""

    times: np.ndarray
    positions: np.ndarray
    facings: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        p = _frozen(self.positions)
        f = _frozen(self.facings)
        if t.ndim != 1 or t.size == 0 or p.shape != (t.size, 2) or f.shape != (t.size, 3):
            raise ValueError("trajectory arrays must be (N,), (N, 2), (N, 3) with N >= 1")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if np.any(np.abs(np.linalg.norm(f, axis=1) - 1.0) > 1e-6):
            raise ValueError("trajectory facings must be unit vectors")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "facings", f)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def sample(self, times: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
        """Positions and facings at ``times``, clamped to the ends."""
        times = np.atleast_1d(np.asarray(times, dtype=np.float64))
        x = np.interp(times, self.times, self.positions[:, 0])
        z = np.interp(times, self.times, self.positions[:, 1])
        yaw = np.unwrap(rot.yaw_of(self.facings))
        facing = rot.facing_of_yaw(np.interp(times, self.times, yaw))
        return np.stack([x, z], axis=-1), facing

    def nearest_index(self, times: np.ndarray) -> np.ndarray:
        """Index of the sample whose timestamp is closest to each of ``times``."""
        times = np.asarray(times, dtype=np.float64)
        right = np.clip(np.searchsorted(self.times, times), 0, len(self) - 1)
        left = np.clip(right - 1, 0, len(self) - 1)
        use_left = np.abs(times - self.times[left]) <= np.abs(self.times[right] - times)
        return np.where(use_left, left, right)

    def arc_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))

    def to_json(self) -> dict:
        return {
            "times": self.times.tolist(),
            "positions": self.positions.tolist(),
            "facings": self.facings.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Trajectory":
        return cls(np.array(doc["times"], float), np.array(doc["positions"], float), np.array(doc["facings"], float))


@dataclass(frozen=True, eq=False)
class GridMap:
    """4-connected occupancy grid; cell (cx, cy) covers world x, z in
    ``[cx*cell_size, (cx+1)*cell_size) x [cy*cell_size, (cy+1)*cell_size)``."""

    width: int
    height: int
    blocked: frozenset = field(default_factory=frozenset)
    cell_size: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "blocked", frozenset(tuple(map(int, c)) for c in self.blocked))
        if self.width <= 0 or self.height <= 0 or self.cell_size <= 0:
            raise ValueError("grid dimensions and cell size must be positive")

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and tuple(cell) not in self.blocked

    def neighbors(self, cell) -> list[tuple[int, int]]:
        x, y = cell
        out = []
        for nx, ny in ((x - 1, y), (x, y - 1), (x, y + 1), (x + 1, y)):
            if self.is_free((nx, ny)):
                out.append((nx, ny))
        return out

    def free_cells(self) -> list[tuple[int, int]]:
        return [(x, y) for x in range(self.width) for y in range(self.height) if (x, y) not in self.blocked]

    def cell_center(self, cell) -> np.ndarray:
        return (np.asarray(cell, dtype=np.float64) + 0.5) * self.cell_size

    def world_to_cell(self, ground) -> tuple[int, int]:
        g = np.asarray(ground, dtype=np.float64)
        return int(np.floor(g[0] / self.cell_size)), int(np.floor(g[1] / self.cell_size))

    def snap(self, ground, exclude: Iterable = ()) -> tuple[int, int]:
        """Nearest free cell center to a ground point; ties broken by cell order."""
        excluded = {tuple(c) for c in exclude}
        g = np.asarray(ground, dtype=np.float64)
        best, best_d = None, np.inf
        for cell in self.free_cells():
            if cell in excluded:
                continue
            d = float(np.sum((self.cell_center(cell) - g) ** 2))
            if d < best_d - 1e-12:
                best, best_d = cell, d
        if best is None:
            raise ValueError("grid has no free cell")
        return best

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "cell_size": self.cell_size,
            "blocked": sorted([list(c) for c in self.blocked]),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GridMap":
        return cls(int(doc["width"]), int(doc["height"]), frozenset(tuple(c) for c in doc.get("blocked", [])), float(doc.get("cell_size", 0.5)))


@dataclass(frozen=True, eq=False)
class Spot:
    name: str
    position: np.ndarray
    facing: np.ndarray
    basic_state: str = "standing"

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position))
        f = np.asarray(self.facing, dtype=np.float64)
        if abs(np.linalg.norm(f) - 1.0) > 1e-6:
            raise ValueError(f"spot {self.name!r}: facing must be a unit vector")
        object.__setattr__(self, "facing", _frozen(f))
        if self.basic_state not in BASIC_STATES:
            raise ValueError(f"spot {self.name!r}: unknown basic state {self.basic_state!r}")

    @property
    def ground(self) -> np.ndarray:
        return self.position[[0, 2]].copy()


@dataclass(frozen=True, eq=False)
class Scene:
    spots: tuple[Spot, ...]
    grid: GridMap

    def __post_init__(self):
        spots = tuple(self.spots)
        object.__setattr__(self, "spots", spots)
        names = [s.name for s in spots]
        if len(set(names)) != len(names):
            raise ValueError("spot names must be unique")
        for s in spots:
            if not self.grid.is_free(self.grid.world_to_cell(s.ground)):
                raise ValueError(f"spot {s.name!r} does not lie on a free grid cell")

    def spot(self, name: str) -> Spot | None:
        for s in self.spots:
            if s.name == name:
                return s
        return None

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "spots": [
                {"name": s.name, "position": s.position.tolist(), "facing": s.facing.tolist(), "basic_state": s.basic_state}
                for s in self.spots
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Scene":
        spots = tuple(
            Spot(s["name"], np.array(s["position"], float), np.array(s["facing"], float), s.get("basic_state", "standing"))
            for s in doc["spots"]
        )
        return cls(spots, GridMap.from_json(doc["grid"]))
