"""Motion matching: retrieval, blending, trajectory following and pair matching."""

from duet.momat.blend import Anchor, blend_transition, hold, smoothstep, splice, stitch, warp_to_ground
from duet.momat.follow import FollowConfig, FollowLog, follow_trajectory
from duet.momat.interactive import InteractiveMatch, match_interactive_pair, recorded_placement
from duet.momat.query import extract_query_features
from duet.momat.search import (
    DEFAULT_WEIGHTS,
    CandidateSet,
    MatchQuery,
    MatchResult,
    Weights,
    kinematic_stage,
    match,
    select_candidate,
    semantic_stage,
    text_only_stage,
)

__all__ = [
    "Anchor",
    "CandidateSet",
    "DEFAULT_WEIGHTS",
    "FollowConfig",
    "FollowLog",
    "InteractiveMatch",
    "MatchQuery",
    "MatchResult",
    "Weights",
    "blend_transition",
    "warp_to_ground",
    "extract_query_features",
    "follow_trajectory",
    "hold",
    "kinematic_stage",
    "match",
    "match_interactive_pair",
    "recorded_placement",
    "select_candidate",
    "semantic_stage",
    "smoothstep",
    "splice",
    "stitch",
    "text_only_stage",
]
