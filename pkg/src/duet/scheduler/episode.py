"""Episode loop and multi-episode stories."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from duet import __version__
from duet.behavior import Behavior, End, serialize
from duet.errors import BehaviorEnd, NoCandidates
from duet.momat.blend import stitch
from duet.scheduler.stages import InteractionStep, commit_step, step_align, step_behave, step_move, step_synthesize
from duet.scheduler.world import InitialSetting, World, idle_filler
from duet.sociomind.mind import (
    AgentMind,
    BackgroundCandidate,
    Topic,
    Turn,
    approve_passive,
    introspect_emotion,
    propose_backgrounds,
    propose_topics,
    reflect_episode,
    select_background,
)

logger = logging.getLogger(__name__)


@dataclass
class EpisodeTranscript:
    background: str
    characters: tuple
    topics: list = field(default_factory=list)
    steps: list = field(default_factory=list)  # InteractionStep
    roles: list = field(default_factory=list)  # active character per round
    turns: list = field(default_factory=list)  # Turn, in conversation order
    ended_by: str = "max_rounds"
    error: str | None = None
    introspections: list = field(default_factory=list)
    reflections: dict = field(default_factory=dict)
    next_background: BackgroundCandidate | None = None
    next_topics: list = field(default_factory=list)  # topic texts the chosen background refers to
    motions: dict = field(default_factory=dict)  # name -> MotionClip

    def to_json(self) -> dict:
        return {
            "version": __version__,
            "background": self.background,
            "characters": list(self.characters),
            "topics": [t.to_json() if isinstance(t, Topic) else str(t) for t in self.topics],
            "roles": list(self.roles),
            "steps": [s.to_json() for s in self.steps],
            "turns": [t.to_json() for t in self.turns],
            "ended_by": self.ended_by,
            "error": self.error,
            "introspections": self.introspections,
            "reflections": self.reflections,
            "next_background": None if self.next_background is None else self.next_background.to_json(),
            "next_topics": list(self.next_topics),
            "motions": {n: {"frames": c.num_frames, "duration": c.duration} for n, c in self.motions.items()},
        }


def _reflection_json(r) -> dict:
    return {
        "events": [{k: v for k, v in e.to_json().items() if k != "embedding"} for e in r.events],
        "thoughts": [{k: v for k, v in t.to_json().items() if k != "embedding"} for t in r.thoughts],
        "state": r.state.to_json(),
    }


def run_round(world: World, minds: dict, transcript: EpisodeTranscript, provider, round_index: int) -> InteractionStep:
    step = step_behave(world, minds, transcript.turns, transcript.background, transcript.topics, provider)
    step.round = round_index
    step_move(world, step)
    step_align(world, step)
    approval = approve_passive(minds[step.passive], step.active, step.active_behavior, transcript.turns, provider)
    step_synthesize(world, step, approval)
    commit_step(world, step)
    return step


def run_episode(
    world: World,
    minds: dict,
    background: str,
    provider,
    topics=(),
    max_rounds: int | None = None,
    manual_events=(),
    plan_next: bool = True,
) -> EpisodeTranscript:
    """Alternate active/passive rounds until END or ``max_rounds``, then reflect
    and plan the next background.

    On failure the partial transcript is attached to the exception as
    ``exc.transcript``.
    """
    cfg = world.config
    max_rounds = cfg.max_rounds if max_rounds is None else max_rounds
    names = tuple(world.order)
    world.set_active(names[0])
    tr = EpisodeTranscript(background, names, list(topics))
    tracks = {n: [] for n in names}
    try:
        for r in range(max_rounds):
            tr.roles.append(world.active.id)
            try:
                step = run_round(world, minds, tr, provider, r)
            except BehaviorEnd:
                tr.turns.append(Turn(world.active.id, End))
                tr.roles.pop()
                tr.ended_by = "END"
                break
            tr.steps.append(step)
            tr.turns.append(Turn(step.active, step.active_behavior))
            passive_beh = step.passive_behavior if step.approval else Behavior.of(motion="stay still and decline")
            tr.turns.append(Turn(step.passive, passive_beh))
            for n in names:
                tracks[n].append(step.motions[n])
            if cfg.introspection_period > 0 and (r + 1) % cfg.introspection_period == 0:
                for n in names:
                    st = introspect_emotion(minds[n], tr.turns, provider)
                    tr.introspections.append({"round": r, "character": n, "emotion": dict(st.emotion), "text": st.emotion_text})
            world.swap_roles()
        tr.motions = {n: stitch(tracks[n], cfg.blend_frames, n) for n in names if tracks[n]}
        if tr.steps:
            for i, n in enumerate(names):
                partner = names[1 - i]
                tr.reflections[n] = _reflection_json(reflect_episode(minds[n], partner, tr.turns, provider))
            if plan_next:
                tr.next_background, tr.next_topics = plan_next_background(world, minds, names, provider, manual_events)
        for n in names:
            minds[n].background_history.append(background)
            minds[n].advance_episode()
    except Exception as exc:
        tr.ended_by = "error"
        tr.error = f"{type(exc).__name__}: {exc}"
        if tracks and any(tracks.values()) and not tr.motions:
            tr.motions = {n: stitch(tracks[n], cfg.blend_frames, n) for n in names if tracks[n]}
        exc.transcript = tr
        raise
    return tr


def plan_next_background(world: World, minds: dict, names, provider, manual_events=()):
    """Both characters propose topics and backgrounds; the best-scoring one wins.

    Returns the candidate (or None) and the texts of the topics it refers to.
    """
    places = [s.name for s in world.scene.spots]
    pools, topic_lists = [], []
    for i, n in enumerate(names):
        topics = propose_topics(minds[n], manual_events, provider)
        topic_lists.append(topics)
        pools.append(propose_backgrounds(minds[n], names[1 - i], topics, places, provider) if topics else [])
    try:
        cand = select_background(pools[0], pools[1], world.config.lambda_topic)
    except NoCandidates:
        logger.warning("no background candidates; the next episode reuses the current background")
        return None, []
    topics = topic_lists[names.index(cand.proposer)]
    return cand, [topics[i].description for i in cand.topic_ids]


def make_minds(setting: InitialSetting, embedder=None, persona_db=None) -> dict:
    from duet.sociomind.memory import MemoryStore

    minds = {}
    for c in setting.characters:
        store = MemoryStore(embedder) if embedder is not None else None
        minds[c.name] = AgentMind(c.name, c.state, store, persona_db)
    return minds


def apply_background(world: World, minds: dict, cand: BackgroundCandidate) -> None:
    """Initial settings of a selected background: places and emotion texts."""
    from dataclasses import replace

    for name, s in cand.initial_settings.items():
        if name not in world.characters:
            continue
        if s.place and world.scene.spot(s.place) is not None:
            world.place_character(name, s.place)
        if s.emotion:
            minds[name].state = replace(minds[name].state, emotion_text=s.emotion)


def run_story(world: World, minds: dict, setting: InitialSetting, provider, episodes: int, inject_events: dict | None = None, max_rounds: int | None = None):
    """Consecutive episodes; each selected background seeds the next one.

    ``inject_events`` maps an episode index to user-written events fed into
    the topic proposal that follows that episode.
    """
    inject_events = inject_events or {}
    background = setting.background
    topics = list(setting.topics)
    out = []
    for e in range(episodes):
        tr = run_episode(world, minds, background, provider, topics, max_rounds, inject_events.get(e, ()), plan_next=e + 1 < episodes)
        out.append(tr)
        if tr.next_background is not None:
            background = tr.next_background.background
            topics = list(tr.next_topics)
            apply_background(world, minds, tr.next_background)
    return out
