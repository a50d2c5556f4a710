from __future__ import annotations

import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from duet import __version__
from duet.cli import main
from duet.motiondb.storage import load
from duet.scheduler.schema import validate_transcript

jsonschema = pytest.importorskip("jsonschema")


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    raw, indexed = root / "raw.db", root / "indexed.db"
    assert main(["ingest", "--synthetic", "--n-walk", "60", "--out", str(raw)]) == 0
    assert main(["build-index", "--db", str(raw), "--out", str(indexed)]) == 0
    return root


def test_ingest_and_index(work, capsys, tmp_path):
    raw, indexed = work / "raw.db", work / "indexed.db"
    assert load(raw).norm_stats is None
    db = load(indexed)
    assert db.norm_stats is not None and db.num_windows > 0
    before = digest(indexed)
    code, out, _ = run(["build-index", "--db", indexed, "--out", tmp_path / "again.db"], capsys)
    assert code == 0 and json.loads(out)["version"] == __version__
    assert digest(indexed) == before
    assert digest(tmp_path / "again.db") == before


def test_ingest_clip_files_with_pair(work, capsys, tmp_path):
    from duet.core.clipio import clip_to_json

    db = load(work / "indexed.db")
    active, passive = db.pair_links[0]
    for cid in (passive, active):
        (tmp_path / f"{cid}.json").write_text(json.dumps(clip_to_json(db.clips[cid])))
    out = tmp_path / "pair.db"
    code, text, _ = run(["ingest", tmp_path / f"{passive}.json", tmp_path / f"{active}.json", "--pair", f"{active}={passive}", "--out", out], capsys)
    assert code == 0
    small = load(out)
    assert small.pair_links == [(active, passive)] and json.loads(text)["clips"] == 2


def test_match_reports_breakdown(work, capsys):
    code, out, _ = run(["match", "--db", work / "indexed.db", "--text", "walk", "--trajectory", "circle", "--duration", "2", "--seed", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["query"]["weights"] == [1.0, 3.0, 1.0, 1.0, 1.0]
    assert "clip_id" in json.dumps(doc["result"])


def test_follow_and_rerun_identical(work, capsys, tmp_path):
    args = ["follow", "--db", work / "indexed.db", "--kind", "wave", "--seed", "3"]
    assert run(args + ["--out", tmp_path / "a.json"], capsys)[0] == 0
    assert run(args + ["--out", tmp_path / "b.json"], capsys)[0] == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    doc = json.loads((tmp_path / "a.json").read_text())
    assert 0 <= doc["trajectory_error"] < 0.5


def test_plan_paths(capsys):
    code, out, _ = run(["plan-paths", "--starts", "1,1", "3,1", "--goals", "3,1", "1,1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["conflict_free"] and len(doc["paths"]) == 2
    assert doc["sum_of_costs"] >= 4


def test_run_episode_validates(work, capsys, tmp_path):
    out, motions = tmp_path / "ep.json", tmp_path / "mot"
    args = ["run-episode", "--db", work / "indexed.db", "--seed", "2", "--max-rounds", "3", "--out", out, "--motions", motions]
    assert run(args, capsys)[0] == 0
    doc = json.loads(out.read_text())
    validate_transcript(doc)
    assert sorted(p.stem for p in motions.glob("*.json")) == sorted(doc["characters"]) or not doc["steps"]
    again = tmp_path / "ep2.json"
    args[-3] = again
    assert run(args, capsys)[0] == 0
    assert again.read_bytes() == out.read_bytes()


def test_run_story_layout(work, capsys, tmp_path):
    inject = tmp_path / "events.json"
    inject.write_text(json.dumps(["a letter arrived from an old friend"]))
    story = tmp_path / "story"
    before = digest(work / "indexed.db")
    code, _, _ = run(["run-story", "--db", work / "indexed.db", "--episodes", "2", "--max-rounds", "3", "--inject-event", inject, "--out", story], capsys)
    assert code == 0
    assert digest(work / "indexed.db") == before
    doc = json.loads((story / "story.json").read_text())
    assert [e["dir"] for e in doc["episodes"]] == ["episode_000", "episode_001"]
    assert [p["episode"] for p in doc["series"]] == [-1, 0, 1]
    for e in doc["episodes"]:
        d = story / e["dir"]
        validate_transcript(json.loads((d / "transcript.json").read_text()))
        assert (d / "reflection.json").exists() and (d / "motions").is_dir()


def test_refine_contact(work, capsys, tmp_path):
    from duet.core.clipio import clip_to_json

    db = load(work / "indexed.db")
    active, passive = db.pair_links[0]
    for cid in (active, passive):
        (tmp_path / f"{cid}.json").write_text(json.dumps(clip_to_json(db.clips[cid])))
    out = tmp_path / "rc"
    code, text, _ = run(["refine-contact", "--active", tmp_path / f"{active}.json", "--passive", tmp_path / f"{passive}.json", "--steps", "50", "--out", out], capsys)
    assert code == 0
    rows = list(csv.reader((out / "loss_trace.csv").read_text().splitlines()))
    assert rows[0] == ["t", "loss"] and len(rows) == 51
    refined = json.loads((out / "refined.json").read_text())
    assert refined["contact_loss"] == json.loads(text)["final_contact_loss"]


def test_eval_traj_csv(work, capsys, tmp_path):
    out, table = tmp_path / "r.json", tmp_path / "r.csv"
    code, _, _ = run(["eval-traj", "--db", work / "indexed.db", "--kind", "square", "--n-seeds", "2", "--duration", "3", "--out", out, "--csv", table], capsys)
    assert code == 0
    reports = json.loads(out.read_text())["reports"]
    assert [r["kinematic_features_enabled"] for r in reports] == [True, False]
    rows = list(csv.DictReader(table.read_text().splitlines()))
    assert len(rows) == 4 and {r["kinematics"] for r in rows} == {"on", "off"}


def test_export_transcript(work, capsys, tmp_path):
    ep = tmp_path / "ep.json"
    assert run(["run-episode", "--db", work / "indexed.db", "--max-rounds", "2", "--out", ep], capsys)[0] == 0
    code, out, _ = run(["export-transcript", "--transcript", ep, "--format", "text"], capsys)
    assert code == 0 and out.startswith("# ")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": "0"}))
    code, _, err = run(["export-transcript", "--transcript", bad], capsys)
    assert code == 2 and json.loads(err)["error"] == "InvalidTranscript"


def test_usage_errors_exit_one(capsys):
    for argv in (["match"], ["nonsense"], ["plan-paths", "--starts", "1,1", "--goals", "1,1", "2,2"], ["ingest", "--out", "x.db"]):
        code, _, err = run(argv, capsys)
        assert code == 1, argv
        assert json.loads(err)["error"] == "usage"


def test_missing_and_corrupt_files(capsys, tmp_path):
    code, _, err = run(["build-index", "--db", tmp_path / "absent.db", "--out", tmp_path / "o.db"], capsys)
    assert code == 1 and json.loads(err)["error"] == "usage"
    broken = tmp_path / "broken.db"
    broken.write_bytes(b"DLPDB1\x01garbage")
    code, _, err = run(["build-index", "--db", broken, "--out", tmp_path / "o.db"], capsys)
    assert code == 2 and json.loads(err)["error"] == "IoError"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "duet.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
