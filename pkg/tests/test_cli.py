"""End-to-end checks of the command-line stages, run in-process."""
import json
import shutil
import sys
from dataclasses import replace
from datetime import date

import pytest

from hindsight import cli, corpus
from hindsight.embed_io import load_vectors
from hindsight.fixture import read_oracle


def run_ok(argv, capsys=None):
    code = cli.main(argv)
    if code != 0 and capsys is not None:
        raise AssertionError(f"exit {code}: {capsys.readouterr().err}")
    assert code == 0
    return code


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """One full fixture -> report run shared by the read-only tests."""
    workdir = tmp_path_factory.mktemp("chain")
    base = ["--workdir", str(workdir), "--seed", "11"]
    for stage in ("fixture", "validate", "match", "score",
                  "compare", "sweep", "quadrants", "report"):
        assert cli.main([stage] + base) == 0, stage
    return workdir


def test_fixture_writes_every_handoff_file(tmp_path):
    run_ok(["fixture", "--workdir", str(tmp_path), "--n-ideas", "6", "--n-papers", "40"])
    for name in ("papers.jsonl", "ideas.jsonl", "judge.jsonl",
                 "papers.hsve", "ideas.hsve", "oracle.json"):
        assert (tmp_path / name).exists(), name


def test_validate_passes_on_fixture(chain):
    payload = json.loads((chain / "validation.json").read_text())
    assert payload["ok"] is True
    assert payload["violations"] == []


def test_validate_flags_pre_cutoff_paper(tmp_path, capsys):
    run_ok(["fixture", "--workdir", str(tmp_path), "--n-ideas", "4", "--n-papers", "30"])
    papers = corpus.read_papers(tmp_path / "papers.jsonl")
    leaked = papers[0]
    papers[0] = replace(leaked, published=date(2023, 1, 15))
    corpus.write_papers(tmp_path / "papers.jsonl", papers,
                        timestamp="1970-01-01T00:00:00+00:00")
    capsys.readouterr()
    assert cli.main(["validate", "--workdir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert leaked.paper_id in err
    payload = json.loads((tmp_path / "validation.json").read_text())
    assert payload["ok"] is False
    assert any(v["kind"] == "pool_before_cutoff" for v in payload["violations"])


def test_score_without_match_names_the_producer(tmp_path, capsys):
    run_ok(["fixture", "--workdir", str(tmp_path), "--n-ideas", "3", "--n-papers", "30"])
    (tmp_path / "matches.jsonl").unlink(missing_ok=True)
    capsys.readouterr()
    assert cli.main(["score", "--workdir", str(tmp_path)]) == 2
    assert "run `hindsight match` first" in capsys.readouterr().err


def test_match_without_vectors_points_at_embed(tmp_path, capsys):
    run_ok(["fixture", "--workdir", str(tmp_path), "--n-ideas", "3", "--n-papers", "30"])
    (tmp_path / "papers.hsve").unlink()
    capsys.readouterr()
    assert cli.main(["match", "--workdir", str(tmp_path)]) == 2
    assert "hindsight embed" in capsys.readouterr().err


def test_invalid_theta_rejected_before_any_work(tmp_path, capsys):
    assert cli.main(["match", "--workdir", str(tmp_path), "--theta", "1.5"]) == 1
    assert "config error" in capsys.readouterr().err
    assert not any(tmp_path.iterdir()) if tmp_path.exists() else True


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("theta: 0.9\nfrobnicate: 3\n")
    assert cli.main(["validate", "--workdir", str(tmp_path), "--config", str(cfg)]) == 1
    assert "frobnicate" in capsys.readouterr().err


def test_config_file_plus_flag_override(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"workdir: {tmp_path}\ntheta: 0.94\nseed: 5\n")
    run_ok(["fixture", "--config", str(cfg), "--n-ideas", "4", "--n-papers", "30",
            "--seed", "6"])
    oracle = read_oracle(tmp_path / "oracle.json")
    assert oracle.theta_ref == 0.94  # file value survived
    # flag beat the file: regenerating with seed 5 gives different bytes
    first = (tmp_path / "papers.hsve").read_bytes()
    run_ok(["fixture", "--config", str(cfg), "--n-ideas", "4", "--n-papers", "30"])
    assert (tmp_path / "papers.hsve").read_bytes() != first


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "hindsight" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# full-chain behaviour


def test_compare_matches_fixture_oracle(chain):
    compare = json.loads((chain / "compare.json").read_text())
    oracle = read_oracle(chain / "oracle.json")
    stats = oracle.per_system_stats(0.96)
    for system, (mean, match_rate) in stats.items():
        assert compare["systems"][system]["mean"] == pytest.approx(mean, abs=1e-12)
        assert compare["systems"][system]["match_rate"] == pytest.approx(match_rate, abs=1e-12)
    expected_ratio = oracle.ratio(0.96, "RA", "BL")
    if expected_ratio is None:
        assert compare["ratio"] is None
    else:
        assert compare["ratio"] == pytest.approx(expected_ratio, abs=1e-12)


def test_report_bundle_shape(chain):
    report = json.loads((chain / "report" / "report.json").read_text())
    assert report["schema_version"] == 1
    assert report["empty"] is False
    labels = [row["label"] for row in report["table1_system_comparison"]]
    assert labels == ["Score (mean)", "Score (median)", "Match rate", "Avg. matches",
                      "Overall", "Novelty", "Impact", "Feasibility"]
    with_p = {row["label"] for row in report["table1_system_comparison"]
              if row["p_value"] is not None}
    assert with_p == {"Score (mean)", "Overall", "Novelty", "Impact"}
    assert {r["system"] for r in report["table2_correlations"]} == {"RA", "BL"}
    n_scored = len((chain / "scores.jsonl").read_text().splitlines())
    total = sum(n for by_label in report["table3_quadrants"]["counts"].values()
                for n in by_label.values())
    assert total == n_scored
    for name in ("distribution.csv", "scatter.csv", "sweep.csv"):
        assert (chain / "report" / name).exists()


def test_sweep_reuses_frozen_rankings(chain):
    sweep = json.loads((chain / "sweep.json").read_text())
    thetas = [p["theta"] for p in sweep["points"]]
    assert thetas == sorted(thetas)
    oracle = read_oracle(chain / "oracle.json")
    for point in sweep["points"]:
        expected = oracle.per_system_stats(point["theta"])
        for system, entry in point["per_system"].items():
            mean, rate = expected[system]
            assert entry["mean_score"] == pytest.approx(mean, abs=1e-9)
            assert entry["match_rate"] == pytest.approx(rate, abs=1e-12)


def test_rerunning_a_stage_reproduces_identical_bytes(chain):
    target = chain / "scores.jsonl"
    before = target.read_bytes()
    target.unlink()
    assert cli.main(["score", "--workdir", str(chain), "--seed", "11"]) == 0
    assert target.read_bytes() == before


def test_report_rerun_is_byte_stable(chain):
    target = chain / "report" / "report.json"
    before = target.read_bytes()
    assert cli.main(["report", "--workdir", str(chain), "--seed", "11"]) == 0
    assert target.read_bytes() == before


# ---------------------------------------------------------------------------
# encoder subprocess wiring

STUB_OK = """\
import argparse, hashlib, json
import numpy as np
from hindsight.embed_io import write_vectors

ap = argparse.ArgumentParser()
sub = ap.add_subparsers(dest="cmd", required=True)
enc = sub.add_parser("encode")
enc.add_argument("--input", required=True)
enc.add_argument("--output", required=True)
enc.add_argument("--batch-size", type=int, required=True)
args = ap.parse_args()

ids, rows = [], []
with open(args.input, encoding="utf-8") as fh:
    for line in fh:
        rec = json.loads(line)
        seed = int.from_bytes(hashlib.sha256(rec["id"].encode()).digest()[:4], "little")
        vec = np.random.default_rng(seed).normal(size=24)
        rows.append(vec / np.linalg.norm(vec))
        ids.append(rec["id"])
write_vectors(ids, np.asarray(rows, dtype=np.float32), 24, args.output)
print(f"encoded {len(ids)} texts dim=24")
"""

STUB_FAIL = """\
import sys
print("encoder: cannot load model weights", file=sys.stderr)
sys.exit(2)
"""


def prepare_embed_dir(tmp_path, chain):
    workdir = tmp_path / "embed_run"
    workdir.mkdir()
    shutil.copy(chain / "papers.jsonl", workdir / "papers.jsonl")
    shutil.copy(chain / "ideas.jsonl", workdir / "ideas.jsonl")
    return workdir


def test_embed_runs_encoder_per_collection(tmp_path, chain, capsys):
    workdir = prepare_embed_dir(tmp_path, chain)
    stub = tmp_path / "stub_encoder.py"
    stub.write_text(STUB_OK)
    run_ok(["embed", "--workdir", str(workdir),
            "--embedder-command", f"{sys.executable} {stub}",
            "--batch-size", "8"], capsys)
    out = capsys.readouterr().out
    assert "encoded" in out
    papers = load_vectors(workdir / "papers.hsve")
    ideas = load_vectors(workdir / "ideas.hsve")
    assert papers.dim == ideas.dim == 24
    assert len(papers.ids) == len(corpus.read_papers(workdir / "papers.jsonl"))
    # the handoff files the encoder consumed are retained for inspection
    assert (workdir / "embed_input_papers.jsonl").exists()


def test_embed_failure_surfaces_encoder_stderr(tmp_path, chain, capsys):
    workdir = prepare_embed_dir(tmp_path, chain)
    stub = tmp_path / "stub_fail.py"
    stub.write_text(STUB_FAIL)
    capsys.readouterr()
    code = cli.main(["embed", "--workdir", str(workdir),
                     "--embedder-command", f"{sys.executable} {stub}"])
    assert code == 3
    assert "cannot load model weights" in capsys.readouterr().err


def test_embed_missing_binary_is_external_failure(tmp_path, chain, capsys):
    workdir = prepare_embed_dir(tmp_path, chain)
    code = cli.main(["embed", "--workdir", str(workdir),
                     "--embedder-command", "/nonexistent/encoder"])
    assert code == 3
    assert "cannot run encoder" in capsys.readouterr().err
