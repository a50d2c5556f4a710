from __future__ import annotations

import copy
import json

import pytest

from duet.behavior import End
from duet.errors import InvalidTranscript
from duet.scheduler import SchedulerConfig, load_setting, make_minds, make_world, run_episode, run_story
from duet.scheduler.schema import transcript_schema, validate_transcript
from duet.sociomind.provider import MockProvider
from episodes import invariant_failures, run_seeded, transcript_bytes

jsonschema = pytest.importorskip("jsonschema")


@pytest.fixture(scope="module")
def episodes(db, scene):
    return [run_seeded(db, scene, s) for s in range(4)]


def test_invariants_hold(episodes):
    for tr, provider in episodes:
        assert invariant_failures(tr, provider) == []
        assert tr.ended_by in ("END", "max_rounds")


def test_approval_both_ways_observed(episodes):
    seen = {bool(s.approval) for tr, _ in episodes for s in tr.steps}
    assert seen == {True, False}


def test_conversation_turns_follow_roles(episodes):
    for tr, _ in episodes:
        speakers = [t.speaker for t in tr.turns if t.behavior is not End]
        expect = [n for step in tr.steps for n in (step.active, step.passive)]
        assert speakers == expect
        if tr.ended_by == "END":
            assert tr.turns[-1].behavior is End


def test_stitched_motion_lengths_agree(episodes):
    for tr, _ in episodes:
        frames = {n: c.num_frames for n, c in tr.motions.items()}
        assert len(frames) == 2 and len(set(frames.values())) == 1


def test_rerun_is_bit_identical(db, scene):
    a, _ = run_seeded(db, scene, 11)
    b, _ = run_seeded(db, scene, 11)
    assert transcript_bytes(a) == transcript_bytes(b)


def test_transcripts_validate(episodes):
    for tr, _ in episodes:
        validate_transcript(json.loads(json.dumps(tr.to_json())))


def test_schema_is_well_formed():
    jsonschema.Draft202012Validator.check_schema(transcript_schema())


def test_schema_rejects_broken_transcripts(episodes):
    doc = json.loads(json.dumps(episodes[0][0].to_json()))
    for mutate in (
        lambda d: d.pop("steps"),
        lambda d: d.update(ended_by="finished"),
        lambda d: d["steps"][0].pop("approval"),
        lambda d: d.update(characters=["only one"]),
    ):
        bad = copy.deepcopy(doc)
        mutate(bad)
        with pytest.raises(InvalidTranscript):
            validate_transcript(bad)


def test_end_on_first_turn_gives_empty_episode(db, scene):
    setting = load_setting()
    world = make_world(scene, db, setting, SchedulerConfig(max_rounds=4))
    minds = make_minds(setting)
    provider = MockProvider(rules=[(r"Your reaction:", "END")])
    tr = run_episode(world, minds, setting.background, provider, setting.topics)
    assert tr.ended_by == "END" and tr.steps == [] and tr.motions == {}
    assert tr.next_background is None
    validate_transcript(json.loads(json.dumps(tr.to_json())))


def test_failure_attaches_partial_transcript(db, scene):
    setting = load_setting()
    world = make_world(scene, db, setting, SchedulerConfig(max_rounds=3))
    minds = make_minds(setting)

    class Broken(MockProvider):
        def complete(self, prompt, params=None):
            if "List the key events" in prompt:
                raise RuntimeError("provider went away")
            return super().complete(prompt, params)

    with pytest.raises(RuntimeError) as info:
        run_episode(world, minds, setting.background, Broken(0), setting.topics)
    tr = info.value.transcript
    assert tr.ended_by == "error" and "provider went away" in tr.error
    assert tr.steps


def test_story_carries_background_and_injected_events(db, scene):
    setting = load_setting()
    world = make_world(scene, db, setting, SchedulerConfig(max_rounds=3), seed=2)
    minds = make_minds(setting)
    provider = MockProvider(2)
    story = run_story(world, minds, setting, provider, 2, {0: ["the neighbour's dog ran away"]})
    assert len(story) == 2
    first, second = story
    if first.next_background is not None:
        assert second.background == first.next_background.background
        assert second.topics == first.next_topics
    assert any("the neighbour's dog ran away" in p for p in provider.calls if "Suggest topics" in p)
    assert second.next_background is None  # no planning after the last episode
    assert all(m.episode == 2 for m in minds.values())
