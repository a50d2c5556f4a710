"""Active-passive scheduling of two characters through Behave/Move/Align/Synthesize."""

from duet.scheduler.episode import (
    EpisodeTranscript,
    apply_background,
    make_minds,
    plan_next_background,
    run_episode,
    run_round,
    run_story,
)
from duet.scheduler.stages import (
    InteractionStep,
    Segment,
    Target,
    commit_step,
    step_align,
    step_behave,
    step_move,
    step_synthesize,
)
from duet.scheduler.world import (
    CharacterSetup,
    CharacterState,
    InitialSetting,
    SchedulerConfig,
    World,
    idle_clips,
    idle_filler,
    load_setting,
    make_world,
    place_pose,
    spot_pose,
)
