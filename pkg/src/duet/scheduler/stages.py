"""The four per-round stages: Behave, Move, Align and Synthesize."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from duet.behavior import Behavior, End
from duet.core import rotations as rot
from duet.core.model import MotionClip
from duet.errors import BehaviorEnd, NoPath, NoSolution, Timeout
from duet.momat.blend import Anchor, stitch, warp_to_ground
from duet.momat.follow import follow_trajectory
from duet.momat.interactive import InteractiveMatch, match_interactive_pair
from duet.pathfind import AgentPath, detect_conflicts, path_to_trajectory, plan_cbs
from duet.scheduler.world import SEAT_SETBACK, World, idle_filler, is_seated_clip, place_pose, transition_clip_for
from duet.sociomind.mind import generate_behavior

PLACEMENT_DISTANCE = 1.0  # assumed partner distance before a pair is matched


@dataclass(frozen=True)
class Target:
    cell: tuple
    ground: np.ndarray  # where the hips end up (seat set-back applied)
    basic_state: str
    location: str | None
    yaw: float | None  # fixed facing for seated targets

    def to_json(self) -> dict:
        return {"cell": list(self.cell), "location": self.location, "basic_state": self.basic_state}


@dataclass
class Segment:
    kind: str  # stand_up | walk | sit_down | filler | interaction | idle
    source: str
    frames: tuple  # source frame range [a, b)
    clip: MotionClip

    def manifest(self, character: str, offset: int) -> dict:
        return {
            "character": character,
            "kind": self.kind,
            "source": self.source,
            "frames": list(self.frames),
            "output": [offset, offset + self.clip.num_frames],
        }


@dataclass
class InteractionStep:
    round: int
    active: str
    passive: str
    active_behavior: Behavior
    passive_behavior: Behavior | None = None
    approval: bool | None = None
    match: InteractiveMatch | None = None
    targets: dict = field(default_factory=dict)
    shared_anchor: bool = True  # passive interaction placed relative to the active
    paths: dict = field(default_factory=dict)
    movements: dict = field(default_factory=dict)  # name -> list[Segment]
    interactions: dict = field(default_factory=dict)  # name -> Segment
    motions: dict = field(default_factory=dict)  # name -> stitched MotionClip
    logs: dict = field(default_factory=dict)

    def movement_frames(self, name: str) -> int:
        return sum(s.clip.num_frames for s in self.movements.get(name, []))

    def manifest(self) -> list:
        out = []
        for name in (self.active, self.passive):
            offset = 0
            for seg in self.movements.get(name, []) + ([self.interactions[name]] if name in self.interactions else []):
                out.append(seg.manifest(name, offset))
                offset += seg.clip.num_frames
        return out

    def to_json(self) -> dict:
        from duet.behavior import serialize

        return {
            "round": self.round,
            "active": self.active,
            "passive": self.passive,
            "active_behavior": serialize(self.active_behavior),
            "passive_behavior": None if self.passive_behavior is None else serialize(self.passive_behavior),
            "approval": self.approval,
            "match": None if self.match is None else self.match.to_json(),
            "targets": {k: v.to_json() for k, v in self.targets.items()},
            "paths": {k: [list(c) for c in v] for k, v in self.paths.items()},
            "segments": self.manifest(),
            "frames": {k: v.num_frames for k, v in self.motions.items()},
            "logs": self.logs,
        }


def _yaw_towards(src, dst, fallback: float) -> float:
    d = np.asarray(dst, float) - np.asarray(src, float)
    if np.linalg.norm(d) < 1e-6:
        return float(fallback)
    return float(np.arctan2(d[0], d[1]))


def _spot_target(world: World, spot) -> Target:
    grid = world.scene.grid
    ground = spot.ground
    if spot.basic_state == "seated":
        ground = ground - SEAT_SETBACK * spot.facing[[0, 2]]
    yaw = float(rot.yaw_of(spot.facing)) if spot.basic_state == "seated" else None
    return Target(grid.world_to_cell(spot.ground), ground, spot.basic_state, spot.name, yaw)


def _stay_target(world: World, name: str) -> Target:
    ch = world.characters[name]
    spot = world.scene.spot(ch.location) if ch.location else None
    if spot is not None:
        return _spot_target(world, spot)
    cell = world.scene.grid.snap(ch.ground())
    yaw = float(ch.pose.yaw) if ch.basic_state == "seated" else None
    return Target(cell, ch.ground(), ch.basic_state, None, yaw)


def _active_yaw(target: Target, partner_ground, current_yaw: float) -> float:
    return target.yaw if target.yaw is not None else _yaw_towards(target.ground, partner_ground, current_yaw)


def _placement_target(world: World, active_target: Target, yaw_a: float, offset_xz, exclude) -> Target:
    grid = world.scene.grid
    ground = active_target.ground + rot.yaw_matrix(yaw_a)[[0, 2]][:, [0, 2]] @ np.asarray(offset_xz, float)
    cell = grid.snap(ground, exclude=exclude)
    return Target(cell, ground, "standing", None, None)


def step_behave(world: World, minds: dict, context, background: str, topics, provider) -> InteractionStep:
    """Active behavior from its mind, then a matched interaction pair."""
    a, p = world.active, world.passive
    beh = generate_behavior(minds[a.id], p.id, background, topics, context, provider)
    if beh is End:
        raise BehaviorEnd(f"{a.id} ended the conversation")
    step = InteractionStep(round=-1, active=a.id, passive=p.id, active_behavior=beh)

    place = (beh.get("place") or "").strip()
    spot = world.scene.spot(place) if place else None
    t_a = _spot_target(world, spot) if spot is not None else _stay_target(world, a.id)
    yaw_a = _active_yaw(t_a, p.ground(), a.pose.yaw)
    companion = world.scene.spot(f"{spot.name}_2") if spot is not None else None
    if companion is not None and t_a.basic_state == "seated":
        t_p = _spot_target(world, companion)
        step.shared_anchor = False
    else:
        t_p = _placement_target(world, t_a, yaw_a, [0.0, PLACEMENT_DISTANCE], [t_a.cell])

    # prospective poses at the destinations drive the pair match
    yaw_p = t_p.yaw if t_p.yaw is not None else _yaw_towards(t_p.ground, t_a.ground, p.pose.yaw)
    pose_a = place_pose(world.db, t_a.ground, yaw_a, t_a.basic_state)
    pose_p = place_pose(world.db, t_p.ground, yaw_p, t_p.basic_state)
    cfg = world.config
    pool = posture_pool(world, t_a.basic_state)
    m = match_interactive_pair(world.db, beh.get("motion") or beh.get("speech"), pose_a, pose_p, cfg.K1, cfg.K2, rng=world.rng, clip_ids=pool)
    step.match = m
    if step.shared_anchor:
        t_p = _placement_target(world, t_a, yaw_a, m.offset[[0, 2]], [t_a.cell])
    step.targets = {a.id: t_a, p.id: t_p}

    passive_text = world.db.annotations[m.passive.clip_id][0] or "respond"
    entries = {"motion": passive_text}
    if t_p.location:
        entries["place"] = t_p.location
    step.passive_behavior = Behavior.of(**entries)
    step.logs["behave"] = {
        "active_clip": m.active.clip_id,
        "passive_clip": m.passive.clip_id,
        "start": m.active.start,
        "score": m.active.score,
    }
    if cfg.refine_contact:
        step.logs["refine"] = refine_pair(world, m)
    return step


def posture_pool(world: World, basic_state: str):
    """Active pair clips whose posture matches ``basic_state``; None when there are none."""
    seated = basic_state == "seated"
    ids = {a for a, _ in world.db.pair_links if is_seated_clip(world.db.clips[a]) == seated}
    return ids or None


def refine_pair(world: World, m: InteractiveMatch) -> dict:
    """Contact-guided resampling of the matched pair's joint positions (logged only)."""
    from duet.mogen import ContactConstraint, contact_loss, linear_beta_schedule, sample_with_guidance

    a = world.db.clips[m.active.clip_id].positions[m.active.start :]
    b = world.db.clips[m.passive.clip_id].positions[m.passive.start :]
    c = ContactConstraint.from_pair((a, b))
    sched = linear_beta_schedule(world.config.refine_steps)
    seed = int(world.rng.integers(2**31))
    guided = sample_with_guidance(sched, None, (a, b), c, np.random.default_rng(seed))
    plain = sample_with_guidance(sched, None, (a, b), None, np.random.default_rng(seed))
    return {"contact_loss_guided": contact_loss(guided, c), "contact_loss_unguided": contact_loss(plain, c)}


def _anchored_transition(world: World, kind: str, pose, ground=None, yaw=None) -> Segment | None:
    clip = transition_clip_for(world.db, kind)
    if clip is None:
        return None
    if ground is None:
        anchor = Anchor.between(clip, 0, pose)
    else:
        anchor = Anchor.placing(clip, 0, ground, yaw)
    idx = np.arange(1, clip.num_frames)
    return Segment(kind, clip.id, (1, clip.num_frames), anchor.frames(clip, idx, kind))


def step_move(world: World, step: InteractionStep) -> dict:
    """Conflict-free grid paths, walked by trajectory following, with posture
    changes inserted around the walk when the basic state changes."""
    grid = world.scene.grid
    names = (step.active, step.passive)
    starts, goals = [], []
    for n in names:
        ch = world.characters[n]
        starts.append(grid.snap(ch.ground(), exclude=starts))
    goals = [step.targets[n].cell for n in names]
    if goals[0] == goals[1]:
        goals[1] = grid.snap(step.targets[names[1]].ground, exclude=[goals[0]])
    try:
        paths = plan_cbs(grid, starts, goals, max_nodes=world.config.max_cbs_nodes)
    except (NoSolution, Timeout, ValueError) as exc:
        raise NoPath(f"no joint path: {exc}") from exc
    if detect_conflicts(paths) is not None:
        raise NoPath("planner returned conflicting paths")

    for n, path in zip(names, paths):
        ch = world.characters[n]
        target = step.targets[n]
        step.paths[n] = list(path.cells)
        segs: list[Segment] = []
        pose = ch.pose
        moves = len(set(path.cells)) > 1
        standing = ch.basic_state == "standing"
        if not standing and (moves or target.basic_state == "standing" or target.location != ch.location):
            seg = _anchored_transition(world, "stand_up", pose)
            if seg is not None:
                segs.append(seg)
                pose = seg.clip.pose(seg.clip.num_frames - 1)
            standing = True
        if moves:
            traj = path_to_trajectory(path, grid.cell_size, world.config.walk_speed, pose.facing)
            walk = follow_trajectory(world.db, pose, traj, world.config.follow, world.rng)
            walk = warp_to_ground(walk, _walk_goal(world, target))
            if walk.num_frames > 1:
                segs.append(Segment("walk", "follow", (1, walk.num_frames), walk.slice(1, walk.num_frames, "walk")))
                pose = walk.pose(walk.num_frames - 1)
        if standing and target.basic_state == "seated":
            spot = world.scene.spot(target.location) if target.location else None
            ground = spot.ground if spot is not None else pose.ground
            yaw = target.yaw if target.yaw is not None else pose.yaw
            seg = _anchored_transition(world, "sit_down", pose, ground, yaw)
            if seg is not None:
                segs.append(seg)
        step.movements[n] = segs
    step.logs["move"] = {n: step.movement_frames(n) for n in names}
    return step.movements


def _walk_goal(world: World, target: Target) -> np.ndarray:
    """Where the hips should stand when the walk ends (in front of a seat when seated)."""
    spot = world.scene.spot(target.location) if target.location else None
    if target.basic_state == "seated" and spot is not None:
        return spot.ground
    return target.ground


def _end_pose(world: World, step: InteractionStep, name: str):
    segs = step.movements.get(name, [])
    if segs:
        c = segs[-1].clip
        return c.pose(c.num_frames - 1)
    return world.characters[name].pose


def step_align(world: World, step: InteractionStep) -> dict:
    """Idle filler appended to the shorter movement so both end together."""
    names = (step.active, step.passive)
    lengths = {n: step.movement_frames(n) for n in names}
    longest = max(lengths.values())
    for n in names:
        gap = longest - lengths[n]
        if gap > 0:
            state = step.targets[n].basic_state if step.movements.get(n) else world.characters[n].basic_state
            filler = idle_filler(world.db, _end_pose(world, step, n), state, gap, "filler")
            step.movements.setdefault(n, []).append(Segment("filler", "idle", (0, gap), filler))
    after = {n: step.movement_frames(n) for n in names}
    if len(set(after.values())) != 1:
        raise AssertionError(f"movement lengths differ after align: {after}")
    step.logs["align"] = {"frames": after[step.active], "filled": {n: longest - lengths[n] for n in names}}
    return step.movements


def step_synthesize(world: World, step: InteractionStep, approval: bool) -> dict:
    """Movement then interaction per character, blended at every seam.

    A passive that declines idles for the interaction's duration instead.
    """
    m = step.match
    a_clip = world.db.clips[m.active.clip_id]
    p_clip = world.db.clips[m.passive.clip_id]
    s = m.active.start
    idx = np.arange(s, a_clip.num_frames)
    a_end = _end_pose(world, step, step.active)
    p_end = _end_pose(world, step, step.passive)
    t_a = step.targets[step.active]
    yaw_a = t_a.yaw if t_a.yaw is not None else _yaw_towards(a_end.ground, p_end.ground, a_end.yaw)
    anchor_a = Anchor.placing(a_clip, s, a_end.ground, yaw_a)
    step.interactions[step.active] = Segment("interaction", a_clip.id, (s, a_clip.num_frames), anchor_a.frames(a_clip, idx, "interaction"))
    if approval:
        if step.shared_anchor:
            anchor_p = anchor_a
        else:
            t_p = step.targets[step.passive]
            yaw_p = t_p.yaw if t_p.yaw is not None else _yaw_towards(p_end.ground, a_end.ground, p_end.yaw)
            anchor_p = Anchor.placing(p_clip, s, p_end.ground, yaw_p)
        seg = Segment("interaction", p_clip.id, (s, p_clip.num_frames), anchor_p.frames(p_clip, idx, "interaction"))
    else:
        state = step.targets[step.passive].basic_state if step.movements.get(step.passive) else world.characters[step.passive].basic_state
        seg = Segment("idle", "idle", (0, idx.size), idle_filler(world.db, p_end, state, idx.size, "idle"))
    step.interactions[step.passive] = seg
    step.approval = bool(approval)
    bf = world.config.blend_frames
    for n in (step.active, step.passive):
        segments = [sg.clip for sg in step.movements.get(n, [])] + [step.interactions[n].clip]
        step.motions[n] = stitch(segments, bf, f"{n}_round{step.round}")
    frames = {n: c.num_frames for n, c in step.motions.items()}
    if len(set(frames.values())) != 1:
        raise AssertionError(f"round motions differ in length: {frames}")
    step.logs["synthesize"] = {"approval": step.approval, "frames": frames[step.active]}
    return step.motions


def commit_step(world: World, step: InteractionStep) -> None:
    """Advance the bodies to the end of the round."""
    for n, clip in step.motions.items():
        ch = world.characters[n]
        ch.pose = clip.pose(clip.num_frames - 1)
        t = step.targets[n]
        ch.location = t.location
        ch.basic_state = t.basic_state
