"""Binary database file.

Layout (little-endian)::

    magic  b"DLPDB1"
    u8     format version
    repeated sections: 4-byte tag, u64 payload length, payload
    trailing u32 CRC-32 of every preceding byte

A payload is ``u32 header length | JSON header | raw arrays``; the header
lists each array's name, dtype and shape in storage order.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from duet.core.model import MotionClip, Skeleton
from duet.embedding import HashingEmbedder, TextEmbedding
from duet.errors import IoError, VersionMismatch
from duet.motiondb.database import BuildConfig, MotionDatabase, NormStats
from duet.motiondb.features import FeatureLayout

MAGIC = b"DLPDB1"
FORMAT_VERSION = 1
_SECTION_ORDER = (b"CONF", b"SKEL", b"CLIP", b"WIND", b"EMBD", b"PAIR", b"STAT")


def _pack(header: dict, arrays: list[tuple[str, np.ndarray]]) -> bytes:
    meta = dict(header)
    meta["arrays"] = []
    blobs = []
    for name, arr in arrays:
        a = np.ascontiguousarray(arr)
        dt = a.dtype.newbyteorder("<") if a.dtype.byteorder not in ("|",) else a.dtype
        a = a.astype(dt, copy=False)
        meta["arrays"].append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape)})
        blobs.append(a.tobytes())
    head = json.dumps(meta, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(head)) + head + b"".join(blobs)


def _unpack(payload: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(payload) < 4:
        raise IoError("truncated section")
    (hlen,) = struct.unpack_from("<I", payload, 0)
    if 4 + hlen > len(payload):
        raise IoError("truncated section header")
    meta = json.loads(payload[4 : 4 + hlen].decode("utf-8"))
    pos = 4 + hlen
    arrays = {}
    for spec in meta.pop("arrays"):
        dt = np.dtype(spec["dtype"])
        shape = tuple(spec["shape"])
        nbytes = dt.itemsize * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(payload):
            raise IoError(f"truncated array {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(payload, dtype=dt, count=int(np.prod(shape, dtype=np.int64)), offset=pos).reshape(shape).copy()
        pos += nbytes
    if pos != len(payload):
        raise IoError("trailing bytes in section")
    return meta, arrays


def save(db: MotionDatabase, path) -> None:
    ids = db.clip_ids
    sections = {}
    sections[b"CONF"] = _pack({"build": db.config.to_json(), "embedder": {"kind": "hashing", "dim": db.embedder.dim, "char_weight": getattr(db.embedder, "char_weight", 0.5)}}, [])
    sections[b"SKEL"] = _pack(db.skeleton.to_json(), [])
    clip_meta = []
    clip_arrays = []
    for cid in ids:
        c = db.clips[cid]
        clip_meta.append({"id": c.id, "fps": c.fps, "annotation": c.annotation, "category": c.category})
        clip_arrays += [(f"{cid}/root", c.root_positions), (f"{cid}/rot", c.rotations), (f"{cid}/pos", c.positions)]
    sections[b"CLIP"] = _pack({"clips": clip_meta}, clip_arrays)
    sections[b"WIND"] = _pack(
        {}, [("clip_index", db.window_clip_index.astype(np.int64)), ("start", db.window_starts.astype(np.int64)), ("features", db.features)]
    )
    sections[b"EMBD"] = _pack({"ids": ids, "texts": [db.annotations[c][0] for c in ids]}, [("matrix", db.annotation_matrix)])
    sections[b"PAIR"] = _pack({"links": [list(p) for p in db.pair_links]}, [])
    if db.norm_stats is None:
        sections[b"STAT"] = _pack({"fitted": False}, [])
    else:
        ns = db.norm_stats
        sections[b"STAT"] = _pack({"fitted": True, "k": ns.layout.k}, [("mean", ns.mean), ("std", ns.std), ("floored", ns.floored.astype(np.uint8))])
    body = bytearray(MAGIC + struct.pack("<B", FORMAT_VERSION))
    for tag in _SECTION_ORDER:
        payload = sections[tag]
        body += tag + struct.pack("<Q", len(payload)) + payload
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    try:
        Path(path).write_bytes(bytes(body))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load(path) -> MotionDatabase:
    """Read a database; any structural problem raises before a db is built."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 1 or raw[: len(MAGIC)] != MAGIC:
        raise IoError("not a motion database file")
    version = raw[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"file format version {version}, this build reads {FORMAT_VERSION}")
    if len(raw) < len(MAGIC) + 1 + 4:
        raise IoError("truncated file")
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    body = raw[:-4]
    pos = len(MAGIC) + 1
    sections = {}
    while pos < len(body):
        if pos + 12 > len(body):
            raise IoError("truncated section table")
        tag = body[pos : pos + 4]
        (length,) = struct.unpack_from("<Q", body, pos + 4)
        pos += 12
        if pos + length > len(body):
            raise IoError(f"truncated section {tag!r}")
        sections[tag] = body[pos : pos + length]
        pos += length
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise IoError("checksum mismatch")
    missing = [t for t in _SECTION_ORDER if t not in sections]
    if missing:
        raise IoError(f"missing sections {missing}")
    try:
        return _build(sections)
    except (KeyError, ValueError, TypeError) as exc:
        raise IoError(f"corrupt database: {exc}") from exc


def _build(sections: dict) -> MotionDatabase:
    conf, _ = _unpack(sections[b"CONF"])
    skel_doc, _ = _unpack(sections[b"SKEL"])
    clip_doc, clip_arrays = _unpack(sections[b"CLIP"])
    _, wind = _unpack(sections[b"WIND"])
    emb_doc, emb = _unpack(sections[b"EMBD"])
    pair_doc, _ = _unpack(sections[b"PAIR"])
    stat_doc, stat = _unpack(sections[b"STAT"])

    config = BuildConfig.from_json(conf["build"])
    embedder = HashingEmbedder(conf["embedder"]["dim"], conf["embedder"].get("char_weight", 0.5))
    skeleton = Skeleton.from_json(skel_doc)
    db = MotionDatabase(skeleton, config, embedder)
    for meta, text, row in zip(clip_doc["clips"], emb_doc["texts"], emb["matrix"]):
        cid = meta["id"]
        clip = MotionClip(
            cid,
            skeleton,
            clip_arrays[f"{cid}/root"],
            clip_arrays[f"{cid}/rot"],
            meta["fps"],
            meta["annotation"],
            meta["category"],
            clip_arrays[f"{cid}/pos"],
        )
        db.clips[cid] = clip
        db.annotations[cid] = (text, TextEmbedding(row))
    for active, passive in pair_doc["links"]:
        db.pair_links.append((active, passive))
        db._partner[active] = passive
        db._partner[passive] = active
    ids = list(db.clips)
    ci, starts, feats = wind["clip_index"], wind["start"], wind["features"]
    for i, cid in enumerate(ids):
        mask = ci == i
        db._window_blocks[cid] = (starts[mask].copy(), feats[mask].copy())
    if stat_doc["fitted"]:
        db.norm_stats = NormStats(stat["mean"], stat["std"], stat["floored"].astype(bool), FeatureLayout(stat_doc["k"]))
    return db
