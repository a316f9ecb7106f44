"""Pipeline entry point: stage subcommands over a shared artifact directory.

Stages hand off through files so any stage can be re-run in isolation:

    ingest    -> papers_raw.jsonl, papers.jsonl, ingest_report.json
    validate  -> validation.json (exit 1 when violations exist)
    embed     -> papers.hsve, ideas.hsve (runs the encoder sidecar)
    match     -> rankings.jsonl, matches.jsonl, match_diagnostics.json
    score     -> impact.jsonl, scores.jsonl
    compare   -> compare.json
    sweep     -> sweep.json
    quadrants -> quadrants.jsonl, quadrant_counts.json
    report    -> report/report.json + plot-data CSVs
    fixture   -> synthetic corpus + vectors + oracle.json

Exit codes: 0 success, 1 validation/config failure, 2 missing inputs,
3 external-service failure.
"""

from __future__ import annotations

import argparse
import json
import shlex
import subprocess
import sys
import time
from pathlib import Path

from filelock import FileLock, Timeout

from hindsight import __version__, analysis, corpus, scorer, stats
from hindsight.analysis import AnalysisError
from hindsight.config import ConfigError, RunConfig, load_config
from hindsight.corpus import CorpusError
from hindsight.embed_io import VectorFormatError, align, load_vectors
from hindsight.fixture import FixtureError, FixtureSpec, generate_fixture, write_fixture
from hindsight.ingest import IngestError, MetadataClient, QueryPlan, ingest_papers, pool_counts
from hindsight.matcher import MatcherError, build_index, filter_matches
from hindsight.scorer import ScoringError
from hindsight.stats import StatsError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_MISSING_INPUT = 2
EXIT_EXTERNAL = 3

LOCK_FILE = ".hindsight.lock"
LOCK_TIMEOUT_SECONDS = 600.0


class StageError(Exception):
    """Stage failure with a designated exit code."""

    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise StageError(f"missing input {path}: {hint}", EXIT_MISSING_INPUT)
    return path


def _produced_by(stage: str) -> str:
    return f"run `hindsight {stage}` first"


def _write_jsonl(path: Path, records) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False,
                                separators=(",", ":")) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def _systems_map(ideas) -> dict[str, str]:
    return {i.idea_id: i.system for i in ideas}


# ---------------------------------------------------------------------------
# stages


def stage_ingest(cfg: RunConfig, args) -> int:
    window_end = cfg.time_split().window_end
    plan = QueryPlan(topics=tuple(cfg.topics), start=cfg.cutoff, end=window_end)
    client = MetadataClient(
        base_url=cfg.api_base_url,
        cache_dir=cfg.cache_directory,
        page_limit=args.page_limit,
    )
    raw, degradation = ingest_papers(plan, client, parallelism=cfg.parallelism)
    deduped = corpus.dedup(raw)
    corpus.write_papers(cfg.papers_raw_file, raw)
    corpus.write_papers(cfg.papers_file, deduped)
    analysis.write_json(cfg.workdir / "ingest_report.json", {
        "counts": pool_counts(raw, deduped),
        "degradation": degradation.to_record(),
        "topics": list(cfg.topics),
        "date_range": plan.date_range,
        "config_hash": cfg.config_hash(),
    })
    print(f"ingested {len(raw)} records, {len(deduped)} after dedup "
          f"({degradation.skipped_malformed} skipped, "
          f"{degradation.missing_abstract} missing abstracts)")
    return EXIT_OK


def stage_validate(cfg: RunConfig, args) -> int:
    papers = corpus.read_papers(_require(cfg.papers_file, _produced_by("ingest")))
    ideas = corpus.read_ideas(_require(
        cfg.ideas_file, "provide an ideas file or run `hindsight fixture`"))
    report = corpus.validate_time_split(cfg.time_split(), papers, ideas)
    analysis.write_json(cfg.workdir / "validation.json", {
        "ok": report.ok,
        "violations": report.to_records(),
        "n_papers": len(papers),
        "n_ideas": len(ideas),
    })
    if report.ok:
        print(f"validation passed: {len(papers)} papers, {len(ideas)} ideas, no leakage")
        return EXIT_OK
    print(f"validation FAILED: {len(report.violations)} violation(s); see validation.json",
          file=sys.stderr)
    for v in report.to_records()[:5]:
        print(f"  {v['kind']}: {v['subject']}: {v['detail']}", file=sys.stderr)
    return EXIT_VALIDATION


def stage_embed(cfg: RunConfig, args) -> int:
    papers = corpus.read_papers(_require(cfg.papers_file, _produced_by("ingest")))
    ideas = corpus.read_ideas(_require(
        cfg.ideas_file, "provide an ideas file or run `hindsight fixture`"))

    jobs = [
        ("papers", [(p.paper_id, corpus.compose_paper_text(p)) for p in papers],
         cfg.paper_vectors_file),
        ("ideas", [(i.idea_id, corpus.compose_idea_text(i)) for i in ideas],
         cfg.idea_vectors_file),
    ]
    base_cmd = shlex.split(cfg.embedder_command)
    for name, texts, out_path in jobs:
        input_path = cfg.workdir / f"embed_input_{name}.jsonl"
        _write_jsonl(input_path, ({"id": doc_id, "text": text} for doc_id, text in texts))
        cmd = base_cmd + [
            "encode",
            "--input", str(input_path),
            "--output", str(out_path),
            "--batch-size", str(cfg.batch_size),
        ]
        started = time.monotonic()
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True)
        except OSError as exc:
            raise StageError(f"cannot run encoder {base_cmd[0]!r}: {exc}", EXIT_EXTERNAL)
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout).strip().splitlines()[-5:]
            raise StageError(
                f"encoder failed on {name} (exit {proc.returncode}): " + " | ".join(tail),
                EXIT_EXTERNAL,
            )
        summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else ""
        try:
            matrix = load_vectors(out_path)
        except VectorFormatError as exc:
            raise StageError(f"encoder produced an unreadable vector file: {exc}", EXIT_EXTERNAL)
        if len(matrix.ids) != len(texts):
            raise StageError(
                f"encoder wrote {len(matrix.ids)} rows for {len(texts)} {name}",
                EXIT_EXTERNAL,
            )
        elapsed = time.monotonic() - started
        print(f"embedded {len(texts)} {name} -> {out_path} ({elapsed:.1f}s) {summary}")
    return EXIT_OK


def stage_match(cfg: RunConfig, args) -> int:
    papers = corpus.read_papers(_require(cfg.papers_file, _produced_by("ingest")))
    ideas = corpus.read_ideas(_require(
        cfg.ideas_file, "provide an ideas file or run `hindsight fixture`"))
    vector_hint = _produced_by("embed") + " or provide vector files"
    paper_matrix = load_vectors(_require(cfg.paper_vectors_file, vector_hint))
    idea_matrix = load_vectors(_require(cfg.idea_vectors_file, vector_hint))

    paper_align = align(paper_matrix, papers)
    idea_align = align(idea_matrix, ideas)
    for name, alignment in (("papers", paper_align), ("ideas", idea_align)):
        if not alignment.complete:
            raise StageError(
                f"{name} vectors and records are misaligned: "
                f"{len(alignment.orphan_rows)} vector row(s) without records "
                f"{sorted(alignment.orphan_rows)[:3]}, "
                f"{len(alignment.orphan_records)} record(s) without vectors "
                f"{sorted(alignment.orphan_records)[:3]}; re-run `hindsight embed`",
                EXIT_VALIDATION,
            )

    idea_ids = [i.idea_id for i in ideas]
    ranking_records = []
    match_records = []
    if idea_ids:
        index = build_index(paper_matrix)
        rankings = analysis.retrieve_rankings(idea_ids, idea_matrix, index, cfg.k)
        for idea_id in idea_ids:
            ranked = rankings[idea_id]
            match_set = filter_matches(ranked, cfg.theta, idea_id, k=cfg.k)
            ranking_records.append({
                "idea_id": idea_id,
                "k": cfg.k,
                "ranking": [[pid, sim] for pid, sim in ranked],
            })
            match_records.append({
                "idea_id": idea_id,
                "theta": cfg.theta,
                "k": cfg.k,
                "matches": [[pid, sim] for pid, sim in match_set.matches],
            })
    _write_jsonl(cfg.workdir / "rankings.jsonl", ranking_records)
    _write_jsonl(cfg.workdir / "matches.jsonl", match_records)
    analysis.write_json(cfg.workdir / "match_diagnostics.json", {
        "n_ideas": len(ideas),
        "n_papers": len(papers),
        "k": cfg.k,
        "theta": cfg.theta,
        "renormalized": {
            "papers": sorted(paper_matrix.renormalized),
            "ideas": sorted(idea_matrix.renormalized),
        },
        "matched_ideas": sum(1 for r in match_records if r["matches"]),
        "config_hash": cfg.config_hash(),
    })
    matched = sum(1 for r in match_records if r["matches"])
    print(f"matched {matched}/{len(ideas)} ideas at theta={cfg.theta}, k={cfg.k}")
    return EXIT_OK


def _read_match_sets(path: Path):
    """matches.jsonl rows -> MatchSet objects, preserving file order."""
    match_sets = []
    for rec in _read_jsonl(path):
        match_sets.append(filter_matches(
            [(pid, float(sim)) for pid, sim in rec["matches"]],
            rec["theta"],
            rec["idea_id"],
            k=rec["k"],
        ))
    return match_sets


def stage_score(cfg: RunConfig, args) -> int:
    papers = corpus.read_papers(_require(cfg.papers_file, _produced_by("ingest")))
    match_sets = _read_match_sets(_require(cfg.workdir / "matches.jsonl", _produced_by("match")))
    table = scorer.build_impact_table(papers, cfg.venue_config())
    _write_jsonl(cfg.workdir / "impact.jsonl", table.to_records())
    scores = [scorer.hindsight_score(m, table) for m in match_sets]
    scorer.write_scores(cfg.workdir / "scores.jsonl", scores, theta=cfg.theta, k=cfg.k)
    positive = sum(1 for s in scores if s.score > 0)
    print(f"scored {len(scores)} ideas ({positive} with positive score) over {len(papers)} papers")
    return EXIT_OK


def stage_compare(cfg: RunConfig, args) -> int:
    scores = scorer.read_scores(_require(cfg.workdir / "scores.jsonl", _produced_by("score")))
    ideas = corpus.read_ideas(_require(
        cfg.ideas_file, "provide an ideas file or run `hindsight fixture`"))
    systems = _systems_map(ideas)

    payload: dict = {
        "theta": cfg.theta,
        "k": cfg.k,
        "treatment": cfg.treatment,
        "baseline": cfg.baseline,
        "config_hash": cfg.config_hash(),
        "empty": not scores,
        "systems": {},
        "mwu": None,
        "ratio": None,
    }
    by_system: dict[str, list] = {}
    for s in scores:
        if s.idea_id not in systems:
            raise StageError(f"score for unknown idea {s.idea_id!r}; re-run `hindsight score`",
                             EXIT_VALIDATION)
        by_system.setdefault(systems[s.idea_id], []).append(s)
    for system, group in sorted(by_system.items()):
        summ = stats.summary([g.score for g in group], [g.match_count for g in group])
        payload["systems"][system] = {
            "n": summ.n,
            "mean": summ.mean,
            "median": summ.median,
            "match_rate": summ.match_rate,
            "avg_matches": summ.avg_matches,
        }
    if cfg.treatment in by_system and cfg.baseline in by_system:
        a = [g.score for g in by_system[cfg.treatment]]
        b = [g.score for g in by_system[cfg.baseline]]
        result = stats.mann_whitney_u(a, b)
        payload["mwu"] = {
            "statistic": result.statistic,
            "p_value": result.p_value,
            "method": result.method,
            "n1": result.n1,
            "n2": result.n2,
        }
        baseline_mean = payload["systems"][cfg.baseline]["mean"]
        if baseline_mean > 0:
            payload["ratio"] = payload["systems"][cfg.treatment]["mean"] / baseline_mean
    analysis.write_json(cfg.workdir / "compare.json", payload)
    if payload["mwu"] is not None:
        print(f"compare: ratio={payload['ratio']}, p={payload['mwu']['p_value']:.4g} "
              f"({payload['mwu']['method']})")
    else:
        print("compare: treatment/baseline pair not present; summaries only")
    return EXIT_OK


def stage_sweep(cfg: RunConfig, args) -> int:
    ranking_records = _read_jsonl(_require(cfg.workdir / "rankings.jsonl", _produced_by("match")))
    papers = corpus.read_papers(_require(cfg.papers_file, _produced_by("ingest")))
    ideas = corpus.read_ideas(_require(
        cfg.ideas_file, "provide an ideas file or run `hindsight fixture`"))
    rankings = {
        rec["idea_id"]: [(pid, float(sim)) for pid, sim in rec["ranking"]]
        for rec in ranking_records
    }
    table = scorer.build_impact_table(papers, cfg.venue_config())
    points = analysis.threshold_sweep(
        rankings, _systems_map(ideas), table, cfg.theta_grid,
        treatment=cfg.treatment, baseline=cfg.baseline,
    )
    analysis.write_json(cfg.workdir / "sweep.json", {
        "theta_grid": list(cfg.theta_grid),
        "k": cfg.k,
        "treatment": cfg.treatment,
        "baseline": cfg.baseline,
        "points": [p.to_record() for p in points],
        "config_hash": cfg.config_hash(),
    })
    defined = [p.ratio for p in points if p.ratio is not None]
    span = f"{min(defined):.2f}x..{max(defined):.2f}x" if defined else "undefined"
    print(f"sweep over {len(points)} thresholds; ratio span {span}")
    return EXIT_OK


def stage_quadrants(cfg: RunConfig, args) -> int:
    scores = scorer.read_scores(_require(cfg.workdir / "scores.jsonl", _produced_by("score")))
    judges = stats.read_judge_scores(_require(
        cfg.judge_file, "provide a judge-scores file or run `hindsight fixture`"))
    ideas = corpus.read_ideas(_require(
        cfg.ideas_file, "provide an ideas file or run `hindsight fixture`"))
    systems = _systems_map(ideas)

    if not scores:
        _write_jsonl(cfg.workdir / "quadrants.jsonl", [])
        analysis.write_json(cfg.workdir / "quadrant_counts.json", {
            "empty": True, "counts": {}, "medians": None, "median_policy": "pooled",
        })
        print("quadrants: empty idea set")
        return EXIT_OK

    hindsight = {s.idea_id: s.score for s in scores}
    overall = {j.idea_id: j.overall for j in judges}
    labels = analysis.classify_quadrants(hindsight, overall)
    _write_jsonl(cfg.workdir / "quadrants.jsonl", (
        {
            "idea_id": idea_id,
            "system": systems[idea_id],
            "hindsight": hindsight[idea_id],
            "judge_overall": overall[idea_id],
            "label": labels[idea_id].value,
        }
        for idea_id in sorted(labels)
    ))
    ids = sorted(hindsight)
    analysis.write_json(cfg.workdir / "quadrant_counts.json", {
        "empty": False,
        "counts": analysis.quadrant_counts(labels, systems),
        "medians": {
            "hindsight": stats.median([hindsight[i] for i in ids]),
            "judge_overall": stats.median([overall[i] for i in ids]),
        },
        "median_policy": "pooled",
    })
    print(f"classified {len(labels)} ideas into quadrants")
    return EXIT_OK


def _table1(cfg: RunConfig, compare: dict, judges, systems) -> list[dict]:
    """System-comparison rows: score summaries, then judge dimensions."""
    t, b = cfg.treatment, cfg.baseline
    sys_stats = compare["systems"]

    def row(label, t_val, b_val, p_value):
        delta = None
        if t_val is not None and b_val is not None:
            delta = t_val - b_val
        return {"label": label, t: t_val, b: b_val, "delta": delta, "p_value": p_value}

    def stat(system, name):
        entry = sys_stats.get(system)
        return entry[name] if entry else None

    mwu_p = compare["mwu"]["p_value"] if compare.get("mwu") else None
    rows = [
        row("Score (mean)", stat(t, "mean"), stat(b, "mean"), mwu_p),
        row("Score (median)", stat(t, "median"), stat(b, "median"), None),
        row("Match rate", stat(t, "match_rate"), stat(b, "match_rate"), None),
        row("Avg. matches", stat(t, "avg_matches"), stat(b, "avg_matches"), None),
    ]
    judge_by_system: dict[str, list] = {}
    for j in judges:
        judge_by_system.setdefault(systems.get(j.idea_id, ""), []).append(j)
    # judge rows: p-values for overall/novelty/impact; feasibility reported without one
    for label, dim, with_p in (
        ("Overall", "overall", True),
        ("Novelty", "novelty", True),
        ("Impact", "impact", True),
        ("Feasibility", "feasibility", False),
    ):
        t_vals = [j.dimension(dim) for j in judge_by_system.get(t, [])]
        b_vals = [j.dimension(dim) for j in judge_by_system.get(b, [])]
        t_mean = sum(t_vals) / len(t_vals) if t_vals else None
        b_mean = sum(b_vals) / len(b_vals) if b_vals else None
        p_value = None
        if with_p and t_vals and b_vals:
            p_value = stats.mann_whitney_u(t_vals, b_vals).p_value
        rows.append(row(label, t_mean, b_mean, p_value))
    return rows


def stage_report(cfg: RunConfig, args) -> int:
    compare = json.loads(_require(cfg.workdir / "compare.json",
                                  _produced_by("compare")).read_text(encoding="utf-8"))
    sweep = json.loads(_require(cfg.workdir / "sweep.json",
                                _produced_by("sweep")).read_text(encoding="utf-8"))
    counts = json.loads(_require(cfg.workdir / "quadrant_counts.json",
                                 _produced_by("quadrants")).read_text(encoding="utf-8"))
    quadrant_records = _read_jsonl(_require(cfg.workdir / "quadrants.jsonl",
                                            _produced_by("quadrants")))
    scores = scorer.read_scores(_require(cfg.workdir / "scores.jsonl", _produced_by("score")))
    judges = stats.read_judge_scores(_require(
        cfg.judge_file, "provide a judge-scores file or run `hindsight fixture`"))
    ideas = corpus.read_ideas(_require(
        cfg.ideas_file, "provide an ideas file or run `hindsight fixture`"))
    systems = _systems_map(ideas)

    empty = not scores
    table2: list[dict] | dict
    if empty:
        table1: list[dict] = []
        table2 = []
    else:
        table1 = _table1(cfg, compare, judges, systems)
        hindsight = {s.idea_id: s.score for s in scores}
        try:
            table2 = [r.to_record() for r in
                      analysis.correlation_matrix(hindsight, judges, systems)]
        except StatsError as exc:
            table2 = {"error": str(exc)}

    report = {
        "schema_version": 1,
        "tool_version": __version__,
        "config": cfg.to_record(),
        "median_policy": "pooled",
        "empty": empty,
        "table1_system_comparison": table1,
        "table2_correlations": table2,
        "table3_quadrants": counts,
        "mwu": compare.get("mwu"),
        "ratio": compare.get("ratio"),
        "sweep": sweep["points"],
    }
    judge_by_id = {j.idea_id: j for j in judges}
    plot_tables = {
        "distribution": (
            ["idea_id", "system", "hindsight_score", "judge_overall"],
            [
                [s.idea_id, systems[s.idea_id], repr(s.score),
                 repr(judge_by_id[s.idea_id].overall) if s.idea_id in judge_by_id else ""]
                for s in scores
            ],
        ),
        "scatter": (
            ["idea_id", "system", "hindsight_score", "judge_overall", "quadrant"],
            [
                [r["idea_id"], r["system"], repr(r["hindsight"]),
                 repr(r["judge_overall"]), r["label"]]
                for r in quadrant_records
            ],
        ),
        "sweep": (
            ["theta", "system", "mean_score", "match_rate", "ratio"],
            [
                [repr(p["theta"]), system, repr(entry["mean_score"]),
                 repr(entry["match_rate"]),
                 "" if p["ratio"] is None else repr(p["ratio"])]
                for p in sweep["points"]
                for system, entry in sorted(p["per_system"].items())
            ],
        ),
    }
    report_path = analysis.emit_report(cfg.report_directory, report, plot_tables)
    print(f"report written to {report_path}")
    return EXIT_OK


def stage_fixture(cfg: RunConfig, args) -> int:
    spec = FixtureSpec(
        n_ideas=args.n_ideas,
        n_papers=args.n_papers,
        seed=cfg.seed,
        theta_ref=cfg.theta,
        k=cfg.k,
        theta_grid=cfg.theta_grid,
        cutoff=cfg.cutoff,
        window_months=cfg.window_months,
        weight_citations=cfg.weight_citations,
        weight_venue=cfg.weight_venue,
        systems=(cfg.treatment, cfg.baseline),
        match_probability={cfg.treatment: 0.8, cfg.baseline: 0.4},
    )
    fixture = generate_fixture(spec)
    paths = write_fixture(fixture, cfg.workdir)
    print(f"fixture: {len(fixture.papers)} papers, {len(fixture.ideas)} ideas, "
          f"dim {fixture.paper_vectors.shape[1]}, seed {spec.seed} -> {cfg.workdir}")
    for name in sorted(paths):
        print(f"  {name}: {paths[name]}")
    return EXIT_OK


STAGES = {
    "ingest": stage_ingest,
    "validate": stage_validate,
    "embed": stage_embed,
    "match": stage_match,
    "score": stage_score,
    "compare": stage_compare,
    "sweep": stage_sweep,
    "quadrants": stage_quadrants,
    "report": stage_report,
    "fixture": stage_fixture,
}


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    shared.add_argument("--workdir", type=Path, default=None, help="artifact directory")
    shared.add_argument("--theta", type=float, default=None, help="similarity threshold")
    shared.add_argument("--k", type=int, default=None, help="retrieval depth")
    shared.add_argument("--cutoff", default=None, help="time-split cutoff date (ISO)")
    shared.add_argument("--report-dir", type=Path, default=None, help="report output directory")
    shared.add_argument("--cache-dir", type=Path, default=None, help="API response cache directory")
    shared.add_argument("--seed", type=int, default=None, help="fixture random seed")
    shared.add_argument("--ideas", type=Path, default=None, help="ideas file path")
    shared.add_argument("--judge", type=Path, default=None, help="judge-scores file path")

    parser = argparse.ArgumentParser(
        prog="hindsight",
        description="Time-split evaluation of generated research ideas against later literature.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="stage", required=True)

    descriptions = {
        "ingest": "fetch the post-cutoff paper pool and deduplicate it",
        "validate": "check the pool and ideas for temporal leakage",
        "embed": "encode papers and ideas into vector files via the encoder sidecar",
        "match": "retrieve top-k papers per idea and apply the similarity threshold",
        "score": "build the impact table and score every idea",
        "compare": "summarize scores per system and test the difference",
        "sweep": "re-apply a threshold grid to the fixed rankings",
        "quadrants": "median-split ideas by (score, judge overall)",
        "report": "aggregate all stage outputs into the report bundle",
        "fixture": "generate a synthetic corpus with a known-answer oracle",
    }
    stage_parsers = {}
    for name, help_text in descriptions.items():
        stage_parsers[name] = sub.add_parser(name, parents=[shared], help=help_text)

    stage_parsers["ingest"].add_argument(
        "--page-limit", type=int, default=None,
        help="maximum result pages per topic query (default: all)")
    stage_parsers["ingest"].add_argument(
        "--parallelism", type=int, default=None, help="concurrent topic queries")
    stage_parsers["ingest"].add_argument(
        "--api-base-url", default=None, help="metadata API base URL")
    stage_parsers["embed"].add_argument(
        "--embedder-command", default=None, help="encoder executable (default: hs-embed)")
    stage_parsers["embed"].add_argument(
        "--batch-size", type=int, default=None, help="encoder batch size")
    stage_parsers["fixture"].add_argument(
        "--n-ideas", type=int, default=100, help="fixture idea count")
    stage_parsers["fixture"].add_argument(
        "--n-papers", type=int, default=2000, help="fixture paper count")
    return parser


def _config_from_args(args) -> RunConfig:
    overrides = {
        "workdir": args.workdir,
        "theta": args.theta,
        "k": args.k,
        "cutoff": args.cutoff,
        "report_dir": args.report_dir,
        "cache_dir": args.cache_dir,
        "seed": args.seed,
        "ideas_path": args.ideas,
        "judge_path": args.judge,
        "parallelism": getattr(args, "parallelism", None),
        "api_base_url": getattr(args, "api_base_url", None),
        "embedder_command": getattr(args, "embedder_command", None),
        "batch_size": getattr(args, "batch_size", None),
    }
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"hindsight: config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"hindsight: cannot read config: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT

    cfg.workdir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(cfg.workdir / LOCK_FILE)
    try:
        with lock.acquire(timeout=LOCK_TIMEOUT_SECONDS):
            return STAGES[args.stage](cfg, args)
    except Timeout:
        print(f"hindsight: another run holds the lock on {cfg.workdir}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"hindsight {args.stage}: {exc}", file=sys.stderr)
        return exc.code
    except IngestError as exc:
        print(f"hindsight {args.stage}: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (CorpusError, VectorFormatError, MatcherError, ScoringError,
            StatsError, AnalysisError, FixtureError, ConfigError) as exc:
        print(f"hindsight {args.stage}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"hindsight {args.stage}: missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT


def run(argv=None) -> None:
    raise SystemExit(main(argv))


if __name__ == "__main__":
    run()
