"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime error. Diagnostics are
JSON objects on stderr; every JSON output carries the package version.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from duet import __version__
from duet.errors import DuetError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _versioned(doc: dict) -> dict:
    return {"version": __version__, **doc}


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _cell(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a cell as 'x,y', got {text!r}") from None
    return x, y


def _floats(n: int):
    def parse(text: str):
        try:
            vals = [float(v) for v in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers") from None
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {len(vals)}")
        return vals

    return parse


# -- shared loaders -------------------------------------------------------
def _load_db(path: str | None, seed: int = 0):
    from duet.motiondb.storage import load
    from duet.synth import build_database

    if path is None:
        return build_database(seed)
    if not Path(path).exists():
        raise UsageError(f"database file not found: {path}")
    return load(path)


def _require_index(db):
    if db.norm_stats is None:
        raise UsageError("database has no index; run build-index first")


def _load_scene(path: str | None):
    from duet.core.model import Scene
    from duet.synth import default_scene

    return default_scene() if path is None else Scene.from_json(_read_json(path))


def _load_config(path: str | None) -> dict:
    return {} if path is None else _read_json(path)


def _scheduler_config(cfg: dict, args):
    from duet.momat.follow import FollowConfig
    from duet.momat.search import Weights
    from duet.scheduler.world import SchedulerConfig

    sc = SchedulerConfig()
    fields = {k: cfg[k] for k in ("max_rounds", "introspection_period", "blend_frames", "walk_speed", "K1", "K2", "lambda_topic", "refine_contact") if k in cfg}
    if getattr(args, "max_rounds", None) is not None:
        fields["max_rounds"] = args.max_rounds
    if fields.get("max_rounds", 0) < 0 or fields.get("introspection_period", 0) < 0:
        raise UsageError("max_rounds and introspection_period must be non-negative")
    follow = cfg.get("follow", {})
    if "weights" in follow:
        follow = dict(follow, weights=Weights.from_seq(follow["weights"]))
    try:
        return replace(sc, **fields, follow=FollowConfig(**follow))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def _memory_params(cfg: dict):
    from duet.sociomind.memory import DEFAULT_PARAMS, ForgettingParams

    params = dict(DEFAULT_PARAMS)
    for kind, over in cfg.get("memory", {}).items():
        if kind not in params:
            raise UsageError(f"unknown memory kind {kind!r}")
        base = params[kind]
        p = ForgettingParams(float(over.get("a", base.a)), float(over.get("k", base.k)), float(over.get("threshold", base.threshold)))
        if not (0 <= p.a < 1 and p.k > 0 and 0 < p.threshold <= 1):
            raise UsageError(f"memory parameters for {kind!r} out of range")
        params[kind] = p
    return params


def _provider(name: str, seed: int):
    from duet.sociomind.provider import make_provider

    return make_provider(name, seed)


def _clip_doc(clip) -> dict:
    from duet.core.clipio import clip_to_json

    return _versioned(clip_to_json(clip))


def _episode_setup(args):
    from duet.scheduler import load_setting, make_minds, make_world
    from duet.sociomind.memory import MemoryStore

    cfg = _load_config(args.config)
    db = _load_db(args.db, args.seed)
    _require_index(db)
    scene = _load_scene(args.scene)
    setting = load_setting(args.setting)
    world = make_world(scene, db, setting, _scheduler_config(cfg, args), seed=args.seed)
    minds = make_minds(setting)
    params = _memory_params(cfg)
    for m in minds.values():
        m.memory = MemoryStore(m.memory.embedder, params)
    return world, minds, setting, _provider(args.provider, args.seed)


def _write_motions(tr, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, clip in tr.motions.items():
        (directory / f"{name}.json").write_text(json.dumps(_clip_doc(clip)), encoding="utf-8")


# -- commands -------------------------------------------------------------
def cmd_ingest(args) -> int:
    from duet.core.clipio import load_clip
    from duet.motiondb.database import BuildConfig, MotionDatabase
    from duet.motiondb.storage import save
    from duet.synth import corpus

    if args.db:
        db = _load_db(args.db)
    else:
        db = None
    added = []
    if args.synthetic:
        for clip, ann, link in corpus(args.seed, args.n_walk):
            if db is None:
                db = MotionDatabase(clip.skeleton, BuildConfig(k=args.k, stride=args.stride, fps=clip.fps))
            added.append(db.ingest(clip, ann, link))
    links = dict(pair.split("=", 1) for pair in args.pair) if args.pair else {}
    for path in args.clips:
        clip = load_clip(path)
        if db is None:
            db = MotionDatabase(clip.skeleton, BuildConfig(k=args.k, stride=args.stride, fps=clip.fps))
        added.append(db.ingest(clip, None, links.get(clip.id)))
    if db is None:
        raise UsageError("nothing to ingest: give clip files or --synthetic")
    save(db, args.out)
    _emit(_versioned({"database": args.out, "added": len(added), "clips": len(db.clips), "windows": db.num_windows}), None)
    return EXIT_OK


def cmd_build_index(args) -> int:
    from duet.motiondb.storage import save

    db = _load_db(args.db)
    stats = db.build_index()
    save(db, args.out)
    _emit(
        _versioned({"database": args.out, "windows": db.num_windows, "floored_dims": int(stats.floored.sum()), "dims": int(stats.mean.size)}),
        None,
    )
    return EXIT_OK


def _start_pose(db, clip_id: str | None, frame: int):
    from duet.scheduler.world import idle_clips

    if clip_id is None:
        ids = idle_clips(db, "standing") or db.clip_ids
        clip_id = ids[0]
    if clip_id not in db.clips:
        raise UsageError(f"unknown clip {clip_id!r}")
    clip = db.clips[clip_id]
    if not 0 <= frame < clip.num_frames:
        raise UsageError(f"frame {frame} outside clip {clip_id!r}")
    return clip.pose(frame)


def cmd_match(args) -> int:
    from duet.evalkit import make_trajectory
    from duet.momat.search import MatchQuery, Weights, match

    db = _load_db(args.db)
    _require_index(db)
    pose = _start_pose(db, args.pose_clip, args.pose_frame)
    traj = make_trajectory(args.trajectory, args.duration, db.config.fps) if args.trajectory else None
    weights = Weights.from_seq(args.weights) if args.weights else Weights()
    partner = None if args.partner is None else np.asarray(args.partner)
    try:
        q = MatchQuery(pose, args.text, traj, partner, args.K1, args.K2, weights)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rng = None if args.seed is None else np.random.default_rng(args.seed)
    result = match(db, q, rng, args.normalization)
    _emit(_versioned({"query": {"text": args.text, "K1": args.K1, "K2": args.K2, "weights": list(weights.as_tuple())}, "result": result.to_json()}), args.out)
    return EXIT_OK


def cmd_follow(args) -> int:
    from duet.core.model import Trajectory
    from duet.evalkit import make_trajectory, place_seed, seed_windows, trajectory_error
    from duet.momat.follow import FollowConfig, follow_trajectory

    db = _load_db(args.db, args.seed)
    _require_index(db)
    if args.trajectory_file:
        traj = Trajectory.from_json(_read_json(args.trajectory_file))
    else:
        traj = make_trajectory(args.kind, args.duration, db.config.fps)
    rng = np.random.default_rng(args.seed)
    pool = seed_windows(db)
    pose = place_seed(db, int(rng.choice(pool)), traj)
    motion = follow_trajectory(db, pose, traj, FollowConfig(use_kinematics=not args.no_kinematics), rng)
    doc = _clip_doc(motion)
    doc["trajectory_error"] = trajectory_error(motion, traj)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_plan_paths(args) -> int:
    from duet.pathfind import detect_conflicts, plan_cbs

    scene = _load_scene(args.scene)
    if len(args.starts) != len(args.goals):
        raise UsageError("need one goal per start")
    try:
        paths = plan_cbs(scene.grid, args.starts, args.goals, max_nodes=args.max_nodes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(
        _versioned(
            {
                "paths": [p.to_json() for p in paths],
                "sum_of_costs": int(sum(p.cost for p in paths)),
                "conflict_free": detect_conflicts(paths) is None,
            }
        ),
        args.out,
    )
    return EXIT_OK


def cmd_run_episode(args) -> int:
    from duet.scheduler import run_episode

    world, minds, setting, provider = _episode_setup(args)
    try:
        tr = run_episode(world, minds, setting.background, provider, setting.topics)
    except DuetError as exc:
        partial = getattr(exc, "transcript", None)
        if partial is not None and args.out:
            _emit(partial.to_json(), args.out)
        raise
    _emit(tr.to_json(), args.out)
    if args.motions:
        _write_motions(tr, Path(args.motions))
    return EXIT_OK


def _inject_events(path: str | None) -> dict:
    """``{"0": ["text", ...]}`` keyed by episode, or a plain list for episode 0."""
    if path is None:
        return {}
    doc = _read_json(path)
    if isinstance(doc, list):
        return {0: [str(e) for e in doc]}
    if isinstance(doc, dict):
        try:
            return {int(k): [str(e) for e in v] for k, v in doc.items()}
        except (TypeError, ValueError):
            raise UsageError("inject-event keys must be episode indices") from None
    raise UsageError("inject-event file must hold a list or an object")


def _state_point(episode: int, minds: dict) -> dict:
    out = {"episode": episode, "characters": {}}
    names = list(minds)
    for i, n in enumerate(names):
        st = minds[n].state
        rel = st.relationship(names[1 - i])
        out["characters"][n] = {
            "emotion": dict(st.emotion),
            "emotion_text": st.emotion_text,
            "trust": rel.trust,
            "intimacy": rel.intimacy,
            "supportiveness": rel.supportiveness,
        }
    return out


def cmd_run_story(args) -> int:
    from duet.scheduler import run_episode
    from duet.scheduler.episode import apply_background

    if args.episodes < 1:
        raise UsageError("--episodes must be at least 1")
    world, minds, setting, provider = _episode_setup(args)
    injected = _inject_events(args.inject_event)
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    story = {"version": __version__, "setting": setting.to_json(), "episodes": [], "series": [_state_point(-1, minds)]}
    background, topics = setting.background, list(setting.topics)
    status = EXIT_OK
    for e in range(args.episodes):
        ep_dir = root / f"episode_{e:03d}"
        ep_dir.mkdir(exist_ok=True)
        try:
            tr = run_episode(world, minds, background, provider, topics, None, injected.get(e, ()), plan_next=e + 1 < args.episodes)
        except DuetError as exc:
            tr = getattr(exc, "transcript", None)
            if tr is not None:
                _emit(tr.to_json(), str(ep_dir / "transcript.json"))
            story["error"] = f"{type(exc).__name__}: {exc}"
            _emit(story, str(root / "story.json"))
            raise
        _emit(tr.to_json(), str(ep_dir / "transcript.json"))
        _emit(_versioned({"episode": e, "reflections": tr.reflections, "next_background": tr.to_json()["next_background"]}), str(ep_dir / "reflection.json"))
        _write_motions(tr, ep_dir / "motions")
        story["episodes"].append({"index": e, "dir": ep_dir.name, "background": background, "ended_by": tr.ended_by, "rounds": len(tr.steps)})
        story["series"].append(_state_point(e, minds))
        if tr.next_background is not None:
            background, topics = tr.next_background.background, list(tr.next_topics)
            apply_background(world, minds, tr.next_background)
    _emit(story, str(root / "story.json"))
    return status


def cmd_refine_contact(args) -> int:
    from duet.core.clipio import load_clip
    from duet.mogen import ContactConstraint, PriorPullDenoiser, contact_loss, linear_beta_schedule, sample_with_guidance

    a, b = load_clip(args.active), load_clip(args.passive)
    if a.num_frames != b.num_frames:
        raise UsageError("the two motions must have equal frame counts")
    cdoc = _read_json(args.constraint) if args.constraint else {}
    gamma = float(cdoc.get("gamma", 0.3))
    lam = float(cdoc.get("lambda_g", 0.01))
    if "reference" in cdoc:
        ref = cdoc["reference"]
        ref_pair = (np.asarray(ref["x"], float), np.asarray(ref["y"], float))
    else:
        ref_pair = (a.positions, b.positions)
    try:
        constraint = ContactConstraint.from_pair(ref_pair, gamma, lam)
        sched = linear_beta_schedule(int(cdoc.get("T", args.steps)))
    except DuetError as exc:
        raise UsageError(str(exc)) from None
    trace: list = []
    x, y = sample_with_guidance(sched, PriorPullDenoiser(float(cdoc.get("w", 0.8))), (a.positions, b.positions), constraint, np.random.default_rng(args.seed), trace=trace)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = _versioned({"active": a.id, "passive": b.id, "x": x.tolist(), "y": y.tolist(), "contact_loss": contact_loss((x, y), constraint)})
    (out / "refined.json").write_text(json.dumps(doc), encoding="utf-8")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "loss"])
    w.writerows([t, repr(float(v))] for t, v in trace)
    (out / "loss_trace.csv").write_text(buf.getvalue(), encoding="utf-8")
    _emit(_versioned({"out": str(out), "steps": len(trace), "final_contact_loss": doc["contact_loss"]}), None)
    return EXIT_OK


def cmd_eval_traj(args) -> int:
    from duet.evalkit import TrajProtocolConfig, run_traj_protocol

    db = _load_db(args.db)
    _require_index(db)
    modes = {"on": [True], "off": [False], "both": [True, False]}[args.kinematics]
    reports = []
    for kind in args.kind:
        for enabled in modes:
            cfg = TrajProtocolConfig(kind, args.n_seeds, enabled, args.duration)
            reports.append(run_traj_protocol(db, cfg, args.seed))
    _emit(_versioned({"seed": args.seed, "reports": [r.to_json() for r in reports]}), args.out)
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "kinematics", "seed_index", "error"])
        for r in reports:
            for i, e in enumerate(r.errors):
                w.writerow([r.kind, "on" if r.kinematic_features_enabled else "off", i, repr(float(e))])
        Path(args.csv).write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


def cmd_export_transcript(args) -> int:
    from duet.scheduler.schema import validate_transcript

    doc = _read_json(args.transcript)
    validate_transcript(doc)
    if args.format == "json":
        _emit(doc, args.out)
        return EXIT_OK
    lines = [f"# {doc['background']}"]
    for t in doc["turns"]:
        lines.append(f"{t['speaker']}: {t['behavior']}")
    lines.append(f"[ended by {doc['ended_by']}]")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ---------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="duet", description="Two-character interaction engine.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="add clips to a motion database file")
    s.add_argument("clips", nargs="*", help="clip JSON files")
    s.add_argument("--db", help="existing database to extend (left untouched)")
    s.add_argument("--out", required=True, help="database file to write")
    s.add_argument("--pair", action="append", metavar="ACTIVE=PASSIVE", help="link an ingested active clip to its passive partner")
    s.add_argument("--synthetic", action="store_true", help="ingest the built-in synthetic corpus")
    s.add_argument("--n-walk", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k", type=int, default=30)
    s.add_argument("--stride", type=int, default=10)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("build-index", help="fit normalization statistics")
    s.add_argument("--db", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_index)

    s = sub.add_parser("match", help="run one text + kinematic match")
    s.add_argument("--db", required=True)
    s.add_argument("--text")
    s.add_argument("--pose-clip")
    s.add_argument("--pose-frame", type=int, default=0)
    s.add_argument("--trajectory", choices=("wave", "circle", "square"))
    s.add_argument("--duration", type=float, default=30.0)
    s.add_argument("--partner", type=_floats(3), help="partner hip position x,y,z")
    s.add_argument("--K1", type=int, default=50)
    s.add_argument("--K2", type=int, default=10)
    s.add_argument("--weights", type=_floats(5), help="b,t,f,h,p")
    s.add_argument("--normalization", choices=("candidates", "none"), default="candidates")
    s.add_argument("--seed", type=int, help="pick among near ties with this seed")
    s.add_argument("--out")
    s.set_defaults(func=cmd_match)

    s = sub.add_parser("follow", help="follow a trajectory by motion matching")
    s.add_argument("--db")
    s.add_argument("--kind", choices=("wave", "circle", "square"), default="wave")
    s.add_argument("--trajectory-file")
    s.add_argument("--duration", type=float, default=30.0)
    s.add_argument("--no-kinematics", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_follow)

    s = sub.add_parser("plan-paths", help="conflict-free paths on the scene grid")
    s.add_argument("--scene")
    s.add_argument("--starts", type=_cell, nargs="+", required=True)
    s.add_argument("--goals", type=_cell, nargs="+", required=True)
    s.add_argument("--max-nodes", type=int, default=100000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_plan_paths)

    for name, func, help_text in (
        ("run-episode", cmd_run_episode, "run one episode"),
        ("run-story", cmd_run_story, "run consecutive episodes with reflection and planning"),
    ):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--db", help="indexed database (default: synthetic corpus)")
        s.add_argument("--scene")
        s.add_argument("--setting", help="initial setting JSON (default: bundled)")
        s.add_argument("--config", help="parameter overrides JSON")
        s.add_argument("--provider", choices=("mock", "http"), default="mock")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--max-rounds", type=int)
        if name == "run-episode":
            s.add_argument("--out")
            s.add_argument("--motions", help="directory for per-character motion JSON")
        else:
            s.add_argument("--episodes", type=int, default=3)
            s.add_argument("--inject-event", help="JSON events to add to topic proposal")
            s.add_argument("--out", required=True, help="story directory")
        s.set_defaults(func=func)

    s = sub.add_parser("refine-contact", help="contact-guided diffusion refinement of a motion pair")
    s.add_argument("--active", required=True)
    s.add_argument("--passive", required=True)
    s.add_argument("--constraint", help="JSON with gamma, lambda_g, optional reference {x, y}")
    s.add_argument("--steps", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_refine_contact)

    s = sub.add_parser("eval-traj", help="trajectory-following protocol")
    s.add_argument("--db")
    s.add_argument("--kind", nargs="+", choices=("wave", "circle", "square"), default=["wave", "circle", "square"])
    s.add_argument("--n-seeds", type=int, default=50)
    s.add_argument("--duration", type=float, default=30.0)
    s.add_argument("--kinematics", choices=("on", "off", "both"), default="both")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_eval_traj)

    s = sub.add_parser("export-transcript", help="validate and export a transcript")
    s.add_argument("--transcript", required=True)
    s.add_argument("--format", choices=("json", "text"), default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export_transcript)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(json.dumps({"version": __version__, "error": "usage", "message": str(exc)}) + "\n")
        return EXIT_USAGE
    except (DuetError, OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"version": __version__, "error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
