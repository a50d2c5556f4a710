from duet.core.kinematics import forward_kinematics, joint_distance_tensor, resample
from duet.core.model import (
    BASIC_STATES,
    CATEGORIES,
    NUM_JOINTS,
    GridMap,
    MotionClip,
    Pose,
    Scene,
    Skeleton,
    Spot,
    Trajectory,
    concat_clips,
    default_skeleton,
)

__all__ = [
    "BASIC_STATES",
    "CATEGORIES",
    "NUM_JOINTS",
    "GridMap",
    "MotionClip",
    "Pose",
    "Scene",
    "Skeleton",
    "Spot",
    "Trajectory",
    "concat_clips",
    "default_skeleton",
    "forward_kinematics",
    "joint_distance_tensor",
    "resample",
]
