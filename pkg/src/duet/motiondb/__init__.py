from duet.motiondb.database import (
    BuildConfig,
    MotionDatabase,
    NormStats,
    WindowRef,
    fit_norm_stats,
    length_penalized_similarity,
)
from duet.motiondb.features import GROUPS, FeatureLayout, extract_window, feature_length
from duet.motiondb.storage import load, save

__all__ = [
    "BuildConfig",
    "FeatureLayout",
    "GROUPS",
    "MotionDatabase",
    "NormStats",
    "WindowRef",
    "extract_window",
    "feature_length",
    "fit_norm_stats",
    "length_penalized_similarity",
    "load",
    "save",
]
