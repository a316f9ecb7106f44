"""Experiment-level analyses: threshold sweep, quadrant split, correlations, reports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from hindsight.embed_io import EmbeddingMatrix
from hindsight.fixture import (  # noqa: F401  (fixture generation is part of the analysis surface)
    Fixture,
    FixtureError,
    FixtureOracle,
    FixtureSpec,
    PlantedMatch,
    generate_fixture,
    write_fixture,
)
from hindsight.matcher import SimilarityIndex, top_k_batch
from hindsight.scorer import ImpactTable
from hindsight.stats import JUDGE_DIMENSIONS, JudgeScores, median, spearman

Ranking = Sequence[tuple[str, float]]


class AnalysisError(ValueError):
    """Analysis input contract violated."""


class QuadrantLabel(Enum):
    TRUE_POSITIVE = "TruePositive"
    HIDDEN_GEM = "HiddenGem"
    OVERHYPED = "Overhyped"
    TRUE_NEGATIVE = "TrueNegative"


@dataclass(frozen=True)
class SystemSweep:
    mean_score: float
    match_rate: float


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    per_system: dict[str, SystemSweep]
    ratio: float | None  # treatment mean / baseline mean; None when undefined

    def to_record(self) -> dict:
        return {
            "theta": self.theta,
            "per_system": {
                name: {"mean_score": s.mean_score, "match_rate": s.match_rate}
                for name, s in sorted(self.per_system.items())
            },
            "ratio": self.ratio,
        }


def retrieve_rankings(
    idea_ids: Sequence[str],
    idea_matrix: EmbeddingMatrix,
    index: SimilarityIndex,
    k: int,
) -> dict[str, list[tuple[str, float]]]:
    """One top-k retrieval per idea; the single retrieval reused by all analyses."""
    rows = np.stack([idea_matrix.row(i) for i in idea_ids])
    ranked = top_k_batch(index, rows, k)
    return {idea_id: ranked[i] for i, idea_id in enumerate(idea_ids)}


def _score_at(ranking: Ranking, theta: float, impact: ImpactTable) -> float:
    best = 0.0
    for pid, sim in ranking:
        if sim >= theta:
            h = impact.h(pid)
            if h > best:
                best = h
    return best


def threshold_sweep(
    rankings: Mapping[str, Ranking],
    systems: Mapping[str, str],
    impact: ImpactTable,
    theta_grid: Sequence[float],
    treatment: str = "RA",
    baseline: str = "BL",
) -> list[SweepPoint]:
    """Re-filter the fixed top-k rankings at each threshold of the grid.

    Retrieval is never re-run: ``rankings`` is the single top-k pass, and
    each grid point only re-applies the threshold. The ratio compares the
    treatment system's mean score to the baseline's and is None whenever
    the baseline mean is zero.
    """
    if not theta_grid:
        raise AnalysisError("theta grid must be non-empty")
    if any(a >= b for a, b in zip(theta_grid, theta_grid[1:])):
        raise AnalysisError("theta grid must be strictly increasing")
    missing = sorted(set(rankings) ^ set(systems))
    if missing:
        raise AnalysisError(f"rankings and system labels disagree on ideas: {missing[:5]}")

    by_system: dict[str, list[str]] = {}
    for idea_id, system in systems.items():
        by_system.setdefault(system, []).append(idea_id)

    points = []
    for theta in theta_grid:
        per_system = {}
        for system, idea_ids in sorted(by_system.items()):
            scores = [_score_at(rankings[i], theta, impact) for i in idea_ids]
            per_system[system] = SystemSweep(
                mean_score=sum(scores) / len(scores),
                match_rate=sum(1 for s in scores if s > 0) / len(scores),
            )
        ratio = None
        if treatment in per_system and baseline in per_system:
            denom = per_system[baseline].mean_score
            if denom > 0:
                ratio = per_system[treatment].mean_score / denom
        points.append(SweepPoint(theta=float(theta), per_system=per_system, ratio=ratio))
    return points


def classify_quadrants(
    hindsight: Mapping[str, float],
    judge_overall: Mapping[str, float],
) -> dict[str, QuadrantLabel]:
    """Median-split every idea by (hindsight score, judge overall score).

    Medians are pooled across all ideas, and "high" means strictly greater
    than the pooled median, so an idea sitting exactly on both medians is a
    TrueNegative.
    """
    diff = sorted(set(hindsight) ^ set(judge_overall))
    if diff:
        raise AnalysisError(f"idea sets disagree between scores and judge records: {diff[:10]}")
    if not hindsight:
        raise AnalysisError("cannot classify an empty idea set")
    ids = sorted(hindsight)
    h_median = median([hindsight[i] for i in ids])
    j_median = median([judge_overall[i] for i in ids])
    labels = {}
    for idea_id in ids:
        h_high = hindsight[idea_id] > h_median
        j_high = judge_overall[idea_id] > j_median
        if h_high and j_high:
            labels[idea_id] = QuadrantLabel.TRUE_POSITIVE
        elif h_high:
            labels[idea_id] = QuadrantLabel.HIDDEN_GEM
        elif j_high:
            labels[idea_id] = QuadrantLabel.OVERHYPED
        else:
            labels[idea_id] = QuadrantLabel.TRUE_NEGATIVE
    return labels


def quadrant_counts(
    labels: Mapping[str, QuadrantLabel],
    systems: Mapping[str, str],
) -> dict[str, dict[str, int]]:
    """Per-system quadrant counts (every idea counted exactly once)."""
    counts: dict[str, dict[str, int]] = {}
    for idea_id, label in labels.items():
        system = systems[idea_id]
        row = counts.setdefault(system, {q.value: 0 for q in QuadrantLabel})
        row[label.value] += 1
    return counts


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class CorrelationRow:
    system: str
    dimension: str
    rho: float
    p_value: float
    stars: str
    n: int

    def to_record(self) -> dict:
        return {
            "system": self.system,
            "dimension": self.dimension,
            "rho": self.rho,
            "p_value": self.p_value,
            "stars": self.stars,
            "n": self.n,
        }


def correlation_matrix(
    hindsight: Mapping[str, float],
    judges: Sequence[JudgeScores],
    systems: Mapping[str, str],
) -> list[CorrelationRow]:
    """Spearman rho between hindsight scores and every judge dimension, per system."""
    judge_by_id = {j.idea_id: j for j in judges}
    diff = sorted(set(hindsight) ^ set(judge_by_id))
    if diff:
        raise AnalysisError(f"idea sets disagree between scores and judge records: {diff[:10]}")
    by_system: dict[str, list[str]] = {}
    for idea_id in sorted(hindsight):
        by_system.setdefault(systems[idea_id], []).append(idea_id)
    rows = []
    for system, idea_ids in sorted(by_system.items()):
        h = [hindsight[i] for i in idea_ids]
        for dim in JUDGE_DIMENSIONS:
            j = [judge_by_id[i].dimension(dim) for i in idea_ids]
            result = spearman(h, j)
            rows.append(CorrelationRow(
                system=system,
                dimension=dim,
                rho=result.statistic,
                p_value=result.p_value,
                stars=significance_stars(result.p_value),
                n=result.n1,
            ))
    return rows


# ---------------------------------------------------------------------------
# report emission

def write_json(path: Path | str, payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, ensure_ascii=False, indent=2)
        fh.write("\n")


def write_csv(path: Path | str, header: Sequence[str], rows: Sequence[Sequence]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_report(
    report_dir: Path | str,
    report: dict,
    plot_tables: Mapping[str, tuple[Sequence[str], Sequence[Sequence]]],
) -> Path:
    """Write the structured results file plus plot-ready columnar files.

    Output is deterministic for identical inputs: keys are sorted and no
    wall-clock fields are written here.
    """
    report_dir = Path(report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    report_path = report_dir / "report.json"
    write_json(report_path, report)
    for name, (header, rows) in sorted(plot_tables.items()):
        write_csv(report_dir / f"{name}.csv", header, rows)
    return report_path
