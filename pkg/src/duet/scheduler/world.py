"""World state for a two-character episode: scene, bodies and configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from duet.core import rotations as rot
from duet.core.model import MotionClip, Pose, Scene, Spot
from duet.errors import NoIdleClip
from duet.momat.blend import Anchor, hold, splice
from duet.momat.follow import FollowConfig, clip_speed
from duet.motiondb.database import MotionDatabase
from duet.sociomind.state import PsychState

ROLES = ("active", "passive")
SEATED_HIP_MAX = 0.7  # hip heights below this count as seated
SEAT_SETBACK = 0.25  # a seated hip sits this far behind its spot


@dataclass
class SchedulerConfig:
    max_rounds: int = 12
    introspection_period: int = 2
    blend_frames: int = 5
    walk_speed: float = 1.2
    K1: int = 12
    K2: int = 5
    lambda_topic: float = 2.0
    refine_contact: bool = False
    refine_steps: int = 100
    follow: FollowConfig = field(default_factory=FollowConfig)
    max_cbs_nodes: int = 100000


@dataclass
class CharacterState:
    """Body of one character. ``location`` is a spot name or None."""

    id: str
    role: str
    pose: Pose
    location: str | None
    basic_state: str
    pending: list = field(default_factory=list)

    def ground(self) -> np.ndarray:
        return self.pose.ground.copy()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "role": self.role,
            "location": self.location,
            "basic_state": self.basic_state,
            "root_position": self.pose.root_position.tolist(),
            "yaw": float(self.pose.yaw),
        }


def is_seated_clip(clip: MotionClip) -> bool:
    return float(np.mean(clip.root_positions[:, 1])) < SEATED_HIP_MAX


def idle_clips(db: MotionDatabase, basic_state: str) -> list[str]:
    """Stationary basic clips of the requested posture, in database order."""
    seated = basic_state == "seated"

    def build():
        return tuple(
            cid
            for cid, c in db.clips.items()
            if c.category == "basic" and clip_speed(c) < 0.05 and is_seated_clip(c) == seated
        )

    return list(db.memo(("idle_clips", seated), build))


def transition_clip_for(db: MotionDatabase, kind: str) -> MotionClip | None:
    """A clip starting seated and ending standing (``stand_up``) or the reverse."""
    for cid in db.clip_ids:
        c = db.clips[cid]
        if c.category != "basic" or c.num_frames < 2:
            continue
        s0 = c.root_positions[0, 1] < SEATED_HIP_MAX
        s1 = c.root_positions[-1, 1] < SEATED_HIP_MAX
        if kind == "stand_up" and s0 and not s1:
            return c
        if kind == "sit_down" and not s0 and s1:
            return c
    return None


def place_pose(db: MotionDatabase, ground, yaw: float, basic_state: str) -> Pose:
    ids = idle_clips(db, basic_state)
    if not ids:
        raise NoIdleClip(f"database has no {basic_state} idle clip")
    clip = db.clips[ids[0]]
    return Anchor.placing(clip, 0, ground, yaw).frames(clip, [0]).pose(0)


def idle_filler(db: MotionDatabase, pose: Pose, basic_state: str, n: int, new_id: str = "idle") -> MotionClip | None:
    """``n`` frames of idling that start from ``pose``; ping-pong through the clip."""
    if n <= 0:
        return None
    ids = idle_clips(db, basic_state)
    if not ids:
        raise NoIdleClip(f"database has no {basic_state} idle clip")
    clip = db.clips[ids[0]]
    period = 2 * (clip.num_frames - 1)
    i = (1 + np.arange(n)) % period
    idx = np.where(i < clip.num_frames, i, period - i)
    seg = Anchor.between(clip, 0, pose).frames(clip, idx, new_id)
    return splice(hold(pose, min(5, n), seg), seg, min(5, n))


@dataclass
class World:
    scene: Scene
    db: MotionDatabase
    characters: dict  # name -> CharacterState
    order: tuple  # (first, second) character names
    config: SchedulerConfig = field(default_factory=SchedulerConfig)
    seed: int = 0
    rng: np.random.Generator = None

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)
        actives = [c for c in self.characters.values() if c.role == "active"]
        if len(self.characters) != 2 or len(actives) != 1:
            raise ValueError("a world holds exactly two characters, one of them active")

    @property
    def active(self) -> CharacterState:
        return next(c for c in self.characters.values() if c.role == "active")

    @property
    def passive(self) -> CharacterState:
        return next(c for c in self.characters.values() if c.role == "passive")

    def swap_roles(self) -> None:
        for c in self.characters.values():
            c.role = "passive" if c.role == "active" else "active"

    def set_active(self, name: str) -> None:
        for c in self.characters.values():
            c.role = "active" if c.id == name else "passive"

    def place_character(self, name: str, place: str | None) -> None:
        """Teleport a character onto a spot (used when an episode starts)."""
        ch = self.characters[name]
        spot = self.scene.spot(place) if place else None
        if spot is None:
            return
        ch.pose = spot_pose(self.db, spot)
        ch.location = spot.name
        ch.basic_state = spot.basic_state


def spot_pose(db: MotionDatabase, spot: Spot) -> Pose:
    yaw = float(rot.yaw_of(spot.facing))
    ground = spot.ground
    if spot.basic_state == "seated":
        ground = ground - SEAT_SETBACK * spot.facing[[0, 2]]
    return place_pose(db, ground, yaw, spot.basic_state)


# -- initial settings -----------------------------------------------------
@dataclass(frozen=True)
class CharacterSetup:
    name: str
    state: PsychState
    place: str | None = None
    motion: str = ""
    emotion: str = ""


@dataclass(frozen=True)
class InitialSetting:
    """Characters (first named starts active), background and opening topics."""

    characters: tuple
    background: str
    topics: tuple = ()

    @classmethod
    def from_json(cls, doc: dict) -> "InitialSetting":
        chars = []
        for c in doc["characters"]:
            state = PsychState.from_json(c.get("state", {}))
            if c.get("emotion"):
                state = replace(state, emotion_text=str(c["emotion"]))
            chars.append(CharacterSetup(str(c["name"]), state, c.get("place"), str(c.get("motion", "")), str(c.get("emotion", ""))))
        if len(chars) != 2 or chars[0].name == chars[1].name:
            raise ValueError("a setting names exactly two distinct characters")
        return cls(tuple(chars), str(doc.get("background", "")), tuple(str(t) for t in doc.get("topics", [])))

    def to_json(self) -> dict:
        return {
            "characters": [
                {"name": c.name, "state": c.state.to_json(), "place": c.place, "motion": c.motion, "emotion": c.emotion}
                for c in self.characters
            ],
            "background": self.background,
            "topics": list(self.topics),
        }


def load_setting(path=None) -> InitialSetting:
    if path is None:
        text = resources.files("duet.data").joinpath("default_setting.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return InitialSetting.from_json(json.loads(text))


def make_world(scene: Scene, db: MotionDatabase, setting: InitialSetting, config: SchedulerConfig | None = None, seed: int = 0) -> World:
    chars = {}
    free = [s for s in scene.spots]
    for i, c in enumerate(setting.characters):
        spot = scene.spot(c.place) if c.place else None
        if spot is None:
            spot = free[i % len(free)]
        chars[c.name] = CharacterState(c.name, "active" if i == 0 else "passive", spot_pose(db, spot), spot.name, spot.basic_state)
    return World(scene, db, chars, tuple(c.name for c in setting.characters), config or SchedulerConfig(), seed)
