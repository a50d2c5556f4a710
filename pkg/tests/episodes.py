"""Seeded mock episodes with scheduler invariant checks."""

from __future__ import annotations

import json

from duet.scheduler import SchedulerConfig, load_setting, make_minds, make_world, run_episode
from duet.sociomind.provider import MockProvider


class WatchingProvider:
    """Mock provider that records whether exactly one character was active at every call."""

    def __init__(self, inner, world):
        self.inner = inner
        self.world = world
        self.role_violations = 0

    def complete(self, prompt, params=None):
        roles = sorted(c.role for c in self.world.characters.values())
        if roles != ["active", "passive"]:
            self.role_violations += 1
        return self.inner.complete(prompt, params)


def run_seeded(db, scene, seed: int, max_rounds: int = 6):
    setting = load_setting()
    world = make_world(scene, db, setting, SchedulerConfig(max_rounds=max_rounds), seed=seed)
    minds = make_minds(setting)
    provider = WatchingProvider(MockProvider(seed), world)
    tr = run_episode(world, minds, setting.background, provider, setting.topics)
    return tr, provider


def invariant_failures(tr, provider) -> list[str]:
    out = []
    if provider.role_violations:
        out.append(f"{provider.role_violations} calls without exactly one active character")
    a, b = tr.characters
    for i in range(1, len(tr.roles)):
        if tr.roles[i] == tr.roles[i - 1]:
            out.append(f"round {i} repeats active {tr.roles[i]}")
    if tr.roles and tr.roles[0] != a:
        out.append("first round not led by the first character")
    for step in tr.steps:
        if {step.active, step.passive} != {a, b}:
            out.append(f"round {step.round} roles {step.active}/{step.passive}")
        moves = {n: step.movement_frames(n) for n in (a, b)}
        if moves[a] != moves[b]:
            out.append(f"round {step.round} movement frames {moves}")
        frames = {n: c.num_frames for n, c in step.motions.items()}
        if len(frames) != 2 or len(set(frames.values())) != 1:
            out.append(f"round {step.round} round frames {frames}")
        has_interaction = step.interactions[step.passive].kind == "interaction"
        if has_interaction != bool(step.approval):
            out.append(f"round {step.round} approval {step.approval} but passive segment {step.interactions[step.passive].kind}")
    return out


def transcript_bytes(tr) -> bytes:
    return json.dumps(tr.to_json(), sort_keys=True).encode("utf-8")
