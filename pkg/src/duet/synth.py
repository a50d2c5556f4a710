"""Procedural motion corpus and default scene.

Stands in for a motion-capture dataset: walk cycles over a range of speeds
and turn rates, standing/seated idles, sit/stand transitions and two-person
interaction pairs recorded in a shared world frame.
"""

from __future__ import annotations

import numpy as np

from duet.core import rotations as rot
from duet.core.model import GridMap, MotionClip, Scene, Skeleton, Spot, default_skeleton
from duet.motiondb.database import BuildConfig, MotionDatabase

FPS = 30.0
X, Y, Z = np.eye(3)
STAND_HIP = 0.92
SEAT_HIP = 0.50


def _rx(a):
    return rot.axis_angle_matrix(X, np.asarray(a, float))


def _ry(a):
    return rot.axis_angle_matrix(Y, np.asarray(a, float))


def _rz(a):
    return rot.axis_angle_matrix(Z, np.asarray(a, float))


def build_clip(
    clip_id: str,
    skeleton: Skeleton,
    root: np.ndarray,
    yaw: np.ndarray,
    joint_mats: dict[str, np.ndarray],
    annotation: str | None,
    category: str = "basic",
    root_tilt: np.ndarray | None = None,
    fps: float = FPS,
) -> MotionClip:
    """Assemble a clip from per-frame root yaw and local joint matrices."""
    n = root.shape[0]
    mats = np.broadcast_to(np.eye(3), (n, skeleton.rest_offsets.shape[0], 3, 3)).copy()
    mats[:, 0] = _ry(yaw) if root_tilt is None else _ry(yaw) @ root_tilt
    for name, m in joint_mats.items():
        mats[:, skeleton.index(name)] = m
    return MotionClip(clip_id, skeleton, root, rot.matrix_to_rot6d(mats), fps, annotation, category)


def _arc(n, speed, turn_rate, yaw0=0.0, origin=(0.0, 0.0), fps=FPS):
    t = np.arange(n) / fps
    yaw = yaw0 + turn_rate * t
    if abs(turn_rate) < 1e-9:
        x = origin[0] + speed * t * np.sin(yaw0)
        z = origin[1] + speed * t * np.cos(yaw0)
    else:
        x = origin[0] + speed / turn_rate * (np.cos(yaw0) - np.cos(yaw))
        z = origin[1] + speed / turn_rate * (np.sin(yaw) - np.sin(yaw0))
    return x, z, yaw


def _gait(n, speed, phase0, fps=FPS):
    t = np.arange(n) / fps
    cadence = 0.55 + 0.35 * speed  # stride cycles per second
    phase = phase0 + 2.0 * np.pi * cadence * t
    amp = 0.12 + 0.3 * min(speed, 1.6)
    s = np.sin(phase)
    return phase, amp, s


def walk_clip(clip_id, skeleton, speed, turn_rate, n_frames=90, phase0=0.0, annotation=None) -> MotionClip:
    x, z, yaw = _arc(n_frames, speed, turn_rate)
    phase, amp, s = _gait(n_frames, speed, phase0)
    hip_y = STAND_HIP - 0.02 * speed + 0.012 * speed * np.cos(2.0 * phase)
    root = np.stack([x, hip_y, z], axis=-1)
    tilt = _rx(0.04 * speed) @ _rz(0.03 * s - 0.06 * turn_rate * speed)
    knee_l = 0.15 + 0.9 * amp * np.maximum(0.0, np.sin(phase + 0.8))
    knee_r = 0.15 + 0.9 * amp * np.maximum(0.0, np.sin(phase + np.pi + 0.8))
    joints = {
        "spine": _ry(-0.08 * s * speed),
        "l_hip": _rx(-amp * s),
        "r_hip": _rx(amp * s),
        "l_knee": _rx(knee_l),
        "r_knee": _rx(knee_r),
        "l_ankle": _rx(-0.15 * amp * np.cos(phase)),
        "r_ankle": _rx(0.15 * amp * np.cos(phase)),
        "l_shoulder": _rx(0.7 * amp * s) @ _rz(0.08 * np.ones(n_frames)),
        "r_shoulder": _rx(-0.7 * amp * s) @ _rz(-0.08 * np.ones(n_frames)),
        "l_elbow": _rx(-0.25 - 0.2 * amp * np.ones(n_frames)),
        "r_elbow": _rx(-0.25 - 0.2 * amp * np.ones(n_frames)),
    }
    if annotation is None:
        annotation = describe_walk(speed, turn_rate)
    return build_clip(clip_id, skeleton, root, yaw, joints, annotation, root_tilt=tilt)


def describe_walk(speed: float, turn_rate: float) -> str:
    pace = "slowly" if speed < 0.6 else "at a steady pace" if speed < 1.0 else "briskly" if speed < 1.3 else "quickly"
    side = "left" if turn_rate > 0 else "right"
    if abs(turn_rate) < 0.15:
        turn = "straight ahead"
    elif abs(turn_rate) < 0.6:
        turn = f"curving {side}"
    else:
        turn = f"turning sharply {side}"
    return f"walk {pace} {turn}"


def _seated_joints(n, sway):
    ones = np.ones(n)
    return {
        "spine": _rx(-0.05 + 0.02 * sway),
        "l_hip": _rx(-np.pi / 2 * ones) @ _rz(0.05 * ones),
        "r_hip": _rx(-np.pi / 2 * ones) @ _rz(-0.05 * ones),
        "l_knee": _rx(np.pi / 2 * ones),
        "r_knee": _rx(np.pi / 2 * ones),
        "l_shoulder": _rx(-0.35 * ones),
        "r_shoulder": _rx(-0.35 * ones),
        "l_elbow": _rx(-1.1 * ones),
        "r_elbow": _rx(-1.1 * ones),
    }


def idle_clip(clip_id, skeleton, seated=False, n_frames=90, phase0=0.0) -> MotionClip:
    t = np.arange(n_frames) / FPS
    sway = np.sin(phase0 + 2.0 * np.pi * 0.25 * t)
    if seated:
        root = np.stack([0.01 * sway, SEAT_HIP + 0.004 * sway, np.zeros(n_frames)], -1)
        joints = _seated_joints(n_frames, sway)
        text = "sit idle on a seat"
    else:
        root = np.stack([0.015 * sway, STAND_HIP + 0.005 * sway, np.zeros(n_frames)], -1)
        joints = {
            "spine": _rz(0.02 * sway),
            "l_hip": _rz(0.03 + 0.02 * sway),
            "r_hip": _rz(-0.03 + 0.02 * sway),
            "l_shoulder": _rz(0.06 + 0.01 * sway),
            "r_shoulder": _rz(-0.06 - 0.01 * sway),
            "l_elbow": _rx(-0.15 * np.ones(n_frames)),
            "r_elbow": _rx(-0.15 * np.ones(n_frames)),
        }
        text = "stand idle"
    return build_clip(clip_id, skeleton, root, np.zeros(n_frames), joints, text)


def _smooth(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def transition_clip(clip_id, skeleton, kind: str, n_frames=45) -> MotionClip:
    """``kind`` is "stand_up" (seated -> standing) or "sit_down"."""
    u = _smooth(np.linspace(0.0, 1.0, n_frames))
    if kind == "sit_down":
        u = 1.0 - u
    # u = 1 standing, u = 0 seated; the seat is 0.25 m behind the standing spot
    hip_y = SEAT_HIP + (STAND_HIP - SEAT_HIP) * u
    z = -0.25 * (1.0 - u)
    root = np.stack([np.zeros(n_frames), hip_y, z], -1)
    lean = 0.5 * np.sin(np.pi * u)
    hip = -np.pi / 2 * (1.0 - u) - 0.3 * np.sin(np.pi * u)
    knee = np.pi / 2 * (1.0 - u) + 0.3 * np.sin(np.pi * u)
    joints = {
        "spine": _rx(lean),
        "l_hip": _rx(hip),
        "r_hip": _rx(hip),
        "l_knee": _rx(knee),
        "r_knee": _rx(knee),
        "l_shoulder": _rx(-0.35 * (1.0 - u)),
        "r_shoulder": _rx(-0.35 * (1.0 - u)),
    }
    text = "stand up from the seat" if kind == "stand_up" else "sit down on the seat"
    return build_clip(clip_id, skeleton, root, np.zeros(n_frames), joints, text)


# interaction gestures: (active right-arm pitch peak, passive right-arm pitch peak,
# inward yaw, hip separation, bump/shake frequency)
_GESTURES = {
    "shake hands": dict(active=-1.05, passive=-1.05, inward=0.35, dist=0.95, osc=2.0, both=False, passive_text="shake hands back"),
    "high five": dict(active=-2.6, passive=-2.6, inward=0.2, dist=0.95, osc=0.0, both=False, passive_text="give a high five back"),
    "fist bump": dict(active=-1.3, passive=-1.3, inward=0.3, dist=1.0, osc=0.0, both=False, passive_text="bump fists back"),
    "hug": dict(active=-1.2, passive=-1.2, inward=0.6, dist=0.45, osc=0.0, both=True, passive_text="hug back"),
    "wave hello": dict(active=-2.8, passive=-2.7, inward=-0.2, dist=1.5, osc=3.0, both=False, passive_text="wave back"),
    "pat on the shoulder": dict(active=-1.4, passive=-0.1, inward=0.0, dist=0.7, osc=1.5, both=False, passive_text="nod and smile"),
}


def _arm_motion(n, peak, inward, osc, side_sign):
    t = np.linspace(0.0, 1.0, n)
    env = _smooth(t / 0.3) * _smooth((1.0 - t) / 0.3)
    wiggle = 0.08 * np.sin(2.0 * np.pi * osc * t * n / FPS) if osc else 0.0
    pitch = peak * env + wiggle * env
    elbow = -0.3 * env
    yaw = side_sign * inward * env
    return _ry(yaw) @ _rx(pitch), _rx(elbow)


def interaction_pair(
    pair_id: str,
    skeleton: Skeleton,
    gesture: str,
    n_frames=60,
    lateral=0.0,
    dist_scale=1.0,
    seated=False,
    mirror=False,
) -> tuple[MotionClip, MotionClip]:
    """Active at the origin facing +z; passive facing it.

    ``lateral`` shifts the passive along the active's +x (left) axis.
    """
    g = _GESTURES[gesture]
    dist = g["dist"] * dist_scale
    hip = SEAT_HIP if seated else STAND_HIP
    zeros = np.zeros(n_frames)
    arm = "l" if mirror else "r"
    sign = 1.0 if mirror else -1.0

    def body(peak):
        sh, el = _arm_motion(n_frames, peak, g["inward"], g["osc"], -sign)
        j = _seated_joints(n_frames, zeros) if seated else {}
        j = dict(j)
        j[f"{arm}_shoulder"] = sh
        j[f"{arm}_elbow"] = el
        if g["both"]:
            other = "r" if arm == "l" else "l"
            sh2, el2 = _arm_motion(n_frames, peak, g["inward"], g["osc"], sign)
            j[f"{other}_shoulder"] = sh2
            j[f"{other}_elbow"] = el2
        return j

    a_root = np.stack([zeros, np.full(n_frames, hip), zeros], -1)
    p_root = np.stack([np.full(n_frames, lateral), np.full(n_frames, hip), np.full(n_frames, dist)], -1)
    text = gesture + (" while seated" if seated else "")
    active = build_clip(f"{pair_id}_a", skeleton, a_root, zeros, body(g["active"]), text, "interactive")
    passive = build_clip(
        f"{pair_id}_p", skeleton, p_root, np.full(n_frames, np.pi), body(g["passive"]), g["passive_text"], "interactive"
    )
    return active, passive


def corpus(seed: int = 0, n_walk: int = 200, skeleton: Skeleton | None = None):
    """Yield ``(clip, annotation, pair_link)`` ingestion records."""
    skeleton = skeleton or default_skeleton()
    rng = np.random.default_rng(seed)
    records = []
    # a deterministic grid for coverage plus random fill
    grid_speeds = np.linspace(0.3, 1.6, 10)
    grid_turns = np.linspace(-1.0, 1.0, 10)
    params = [(s, w) for s in grid_speeds for w in grid_turns]
    while len(params) < n_walk:
        params.append((rng.uniform(0.25, 1.7), rng.uniform(-1.1, 1.1)))
    for i, (speed, turn) in enumerate(params[:n_walk]):
        clip = walk_clip(f"walk_{i:03d}", skeleton, float(speed), float(turn), phase0=float(rng.uniform(0, 2 * np.pi)))
        records.append((clip, None, None))
    for i in range(3):
        records.append((idle_clip(f"idle_stand_{i}", skeleton, False, phase0=float(i)), None, None))
        records.append((idle_clip(f"idle_seated_{i}", skeleton, True, phase0=float(i)), None, None))
    records.append((transition_clip("stand_up_0", skeleton, "stand_up"), None, None))
    records.append((transition_clip("sit_down_0", skeleton, "sit_down"), None, None))
    n = 0
    for gesture in _GESTURES:
        for variant, (lateral, scale, mirror) in enumerate([(0.0, 1.0, False), (0.25, 1.1, False), (-0.25, 0.95, True)]):
            a, p = interaction_pair(f"pair_{n:02d}", skeleton, gesture, lateral=lateral, dist_scale=scale, mirror=mirror)
            records += [(p, None, None), (a, None, p.id)]
            n += 1
    for gesture in ("shake hands", "wave hello", "fist bump"):
        a, p = interaction_pair(f"pair_{n:02d}", skeleton, gesture, seated=True)
        records += [(p, None, None), (a, None, p.id)]
        n += 1
    return records


def build_database(seed: int = 0, n_walk: int = 200, config: BuildConfig = BuildConfig()) -> MotionDatabase:
    skeleton = default_skeleton()
    db = MotionDatabase(skeleton, config)
    for clip, annotation, link in corpus(seed, n_walk, skeleton):
        db.ingest(clip, annotation, link)
    db.build_index()
    return db


def default_scene() -> Scene:
    """An 8 m x 6 m living room with a sofa, dining table, desk and bookshelf."""
    blocked = set()

    def block(x0, x1, y0, y1):
        for x in range(x0, x1):
            for y in range(y0, y1):
                blocked.add((x, y))

    block(0, 16, 11, 12)  # back wall strip
    block(1, 6, 9, 11)  # sofa
    block(9, 12, 4, 6)  # dining table
    block(13, 16, 0, 2)  # desk
    block(0, 1, 2, 7)  # bookshelf
    grid = GridMap(16, 12, frozenset(blocked), 0.5)

    def spot(name, cell, yaw, state):
        c = grid.cell_center(cell)
        return Spot(name, np.array([c[0], 0.0, c[1]]), rot.facing_of_yaw(yaw), state)

    spots = (
        spot("center", (7, 6), 0.0, "standing"),
        spot("center_2", (7, 8), np.pi, "standing"),
        spot("bookshelf", (1, 4), -np.pi / 2, "standing"),
        spot("bookshelf_2", (3, 4), np.pi / 2, "standing"),
        spot("sofa", (2, 8), np.pi, "seated"),
        spot("sofa_2", (4, 8), np.pi, "seated"),
        spot("table", (10, 3), 0.0, "seated"),
        spot("table_2", (10, 6), np.pi, "seated"),
        spot("desk", (14, 2), np.pi, "seated"),
        spot("desk_2", (12, 2), np.pi / 2, "standing"),
    )
    return Scene(spots, grid)
