"""Clip interchange format (JSON, metres, seconds, y-up).

``{"id", "fps", "category", "annotation",
   "skeleton": {"joints": [{"name", "parent", "offset": [x, y, z]}]},
   "frames": [{"root": [x, y, z], "rot6d": [[6 floats] x 21]}]}``
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from duet.core.model import MotionClip, Skeleton
from duet.errors import DuetError, InvalidClip


def clip_to_json(clip: MotionClip) -> dict:
    return {
        "id": clip.id,
        "fps": clip.fps,
        "category": clip.category,
        "annotation": clip.annotation,
        "skeleton": clip.skeleton.to_json(),
        "frames": [
            {"root": clip.root_positions[i].tolist(), "rot6d": clip.rotations[i].tolist()}
            for i in range(clip.num_frames)
        ],
    }


def clip_from_json(doc: dict) -> MotionClip:
    try:
        skeleton = Skeleton.from_json(doc["skeleton"])
        frames = doc["frames"]
        root = np.array([f["root"] for f in frames], dtype=float)
        r6 = np.array([f["rot6d"] for f in frames], dtype=float)
        return MotionClip.from_raw(
            str(doc["id"]),
            skeleton,
            root.reshape(-1, 3),
            r6,
            float(doc["fps"]),
            doc.get("annotation"),
            doc.get("category", "basic"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DuetError):
            raise
        raise InvalidClip(f"malformed clip document: {exc}") from exc


def load_clip(path) -> MotionClip:
    return clip_from_json(json.loads(Path(path).read_text()))


def save_clip(clip: MotionClip, path) -> None:
    Path(path).write_text(json.dumps(clip_to_json(clip)))
