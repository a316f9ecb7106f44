"""Synthetic desk-scale corpus with an analytic scoring oracle.

Each idea gets a dedicated pair of orthogonal axes; a paper planted at
similarity s to idea i lives inside that idea's plane, so every planted
cosine is exact by construction (the planted Gram matrix is factorized in
closed form, block by block). All other pairs are exactly orthogonal.
Expected match sets, best matches and scores are computed analytically at
generation time and stored as the oracle the pipeline is checked against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from hindsight import corpus
from hindsight.corpus import Idea, Paper
from hindsight.embed_io import write_vectors
from hindsight.stats import JudgeScores, write_judge_scores

# fixed timestamp for fixture corpus headers: fixture output must be
# byte-identical across runs with the same seed
FIXTURE_TIMESTAMP = "1970-01-01T00:00:00+00:00"

TOP_VENUE_NAMES = ("ICLR", "NeurIPS", "ICML", "ACL", "EMNLP", "CVPR", "AAAI")

DEFAULT_TOPICS = (
    "Alignment & Safety",
    "Chain-of-Thought Reasoning",
    "Diffusion Models",
    "Efficient Inference",
    "Hallucination Mitigation",
    "In-Context Learning",
    "Instruction Tuning & RLHF",
    "LLM Agents",
    "Multimodal LLMs",
    "Retrieval-Augmented Generation",
)

# grid points sit on multiples of 0.005 and planted similarities on the
# 0.0025 offsets, so float32 rounding can never move a similarity across
# a threshold
DEFAULT_THETA_GRID = (0.93, 0.935, 0.94, 0.945, 0.95, 0.955, 0.96, 0.965)
DEFAULT_PLANTED_SIMS = (0.9325, 0.9375, 0.9425, 0.9475, 0.9525, 0.9575, 0.9625, 0.9675)

GRID_MARGIN = 1e-3


class FixtureError(ValueError):
    """Fixture spec infeasible or internally inconsistent."""


@dataclass(frozen=True)
class PlantedMatch:
    """Explicit plant: similarity plus optional forced citations/venue."""

    sim: float
    citations: int | None = None
    venue: str | None = None


@dataclass(frozen=True)
class FixtureSpec:
    n_ideas: int = 100
    n_papers: int = 2000
    seed: int = 1
    match_probability: Mapping[str, float] = field(
        default_factory=lambda: {"RA": 0.8, "BL": 0.4}
    )
    systems: tuple[str, ...] = ("RA", "BL")
    max_matches: int = 8
    planted_sims: tuple[float, ...] = DEFAULT_PLANTED_SIMS
    theta_grid: tuple[float, ...] = DEFAULT_THETA_GRID
    theta_ref: float = 0.96
    k: int = 20
    max_citations: int = 500
    venue_prob: float = 0.3
    weight_citations: float = 0.6
    weight_venue: float = 0.4
    cutoff: date = date(2023, 6, 1)
    window_months: int = 30
    background_axes: int = 16
    explicit_plants: Mapping[int, tuple[PlantedMatch, ...]] = field(default_factory=dict)

    def validate(self):
        if self.n_ideas < 1 or self.n_papers < 2:
            raise FixtureError("need at least 1 idea and 2 papers")
        if self.max_matches > self.k:
            raise FixtureError("max_matches must not exceed k")
        for s in self.planted_sims:
            _check_feasible_sim(s)
        for plants in self.explicit_plants.values():
            for plant in plants:
                _check_feasible_sim(plant.sim)
        all_sims = set(self.planted_sims)
        for plants in self.explicit_plants.values():
            all_sims.update(p.sim for p in plants)
        for s in all_sims:
            margins = [abs(s - t) for t in (*self.theta_grid, self.theta_ref)]
            if min(margins) < GRID_MARGIN:
                raise FixtureError(
                    f"planted similarity {s} within {GRID_MARGIN} of a threshold; "
                    "the oracle would be ambiguous under float rounding"
                )


def _check_feasible_sim(s: float):
    # |s| >= 1 makes the planted 2x2 Gram block non-positive-definite
    if not -1.0 < s < 1.0:
        raise FixtureError(f"planted similarity {s} is not achievable by unit vectors")


@dataclass(frozen=True)
class OracleScore:
    score: float
    best_paper_id: str | None
    match_count: int


@dataclass
class FixtureOracle:
    """Ground truth computed analytically when the fixture was generated."""

    theta_ref: float
    k: int
    planted: dict[str, list[tuple[str, float]]]  # idea -> (paper, nominal sim)
    impact: dict[str, float]  # paper -> expected h
    scores: dict[str, OracleScore]
    systems: dict[str, str]

    def score_at(self, idea_id: str, theta: float) -> OracleScore:
        members = [(pid, s) for pid, s in self.planted.get(idea_id, []) if s >= theta]
        if not members:
            return OracleScore(score=0.0, best_paper_id=None, match_count=0)
        best_pid = None
        best_h = -1.0
        for pid, _ in members:
            h = self.impact[pid]
            if h > best_h or (h == best_h and (best_pid is None or pid < best_pid)):
                best_h = h
                best_pid = pid
        return OracleScore(score=best_h, best_paper_id=best_pid, match_count=len(members))

    def per_system_stats(self, theta: float) -> dict[str, tuple[float, float]]:
        """Expected (mean score, match rate) per system at the given threshold."""
        by_system: dict[str, list[float]] = {}
        for idea_id in self.systems:
            by_system.setdefault(self.systems[idea_id], []).append(
                self.score_at(idea_id, theta).score
            )
        return {
            system: (sum(vals) / len(vals), sum(1 for v in vals if v > 0) / len(vals))
            for system, vals in sorted(by_system.items())
        }

    def ratio(self, theta: float, treatment: str = "RA", baseline: str = "BL") -> float | None:
        stats = self.per_system_stats(theta)
        if treatment not in stats or baseline not in stats:
            return None
        denom = stats[baseline][0]
        if denom <= 0:
            return None
        return stats[treatment][0] / denom

    def to_payload(self) -> dict:
        return {
            "theta_ref": self.theta_ref,
            "k": self.k,
            "planted": {i: [[pid, s] for pid, s in v] for i, v in sorted(self.planted.items())},
            "impact": dict(sorted(self.impact.items())),
            "scores": {
                i: {
                    "score": s.score,
                    "best_paper_id": s.best_paper_id,
                    "match_count": s.match_count,
                }
                for i, s in sorted(self.scores.items())
            },
            "systems": dict(sorted(self.systems.items())),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "FixtureOracle":
        return cls(
            theta_ref=payload["theta_ref"],
            k=payload["k"],
            planted={i: [(pid, s) for pid, s in v] for i, v in payload["planted"].items()},
            impact=payload["impact"],
            scores={
                i: OracleScore(
                    score=rec["score"],
                    best_paper_id=rec["best_paper_id"],
                    match_count=rec["match_count"],
                )
                for i, rec in payload["scores"].items()
            },
            systems=payload["systems"],
        )


@dataclass
class Fixture:
    spec: FixtureSpec
    papers: list[Paper]
    ideas: list[Idea]
    judge: list[JudgeScores]
    paper_ids: list[str]
    paper_vectors: np.ndarray
    idea_ids: list[str]
    idea_vectors: np.ndarray
    oracle: FixtureOracle


def generate_fixture(spec: FixtureSpec) -> Fixture:
    """Generate corpus, vectors, judge scores and the analytic oracle."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_ideas = spec.n_ideas

    idea_ids = [f"I{i:04d}" for i in range(n_ideas)]
    systems = {
        idea_ids[i]: spec.systems[i % len(spec.systems)] for i in range(n_ideas)
    }

    # plan the planted structure first; papers are materialized afterwards
    plants: dict[str, list[PlantedMatch]] = {}
    for i, idea_id in enumerate(idea_ids):
        if i in spec.explicit_plants:
            plants[idea_id] = list(spec.explicit_plants[i])
            continue
        prob = spec.match_probability.get(systems[idea_id], 0.0)
        if rng.random() < prob:
            count = int(rng.integers(1, spec.max_matches + 1))
            sims = rng.choice(np.asarray(spec.planted_sims), size=count, replace=True)
            plants[idea_id] = [PlantedMatch(sim=float(s)) for s in sims]
        else:
            plants[idea_id] = []

    total_planted = sum(len(v) for v in plants.values())
    if total_planted + 2 > spec.n_papers:
        raise FixtureError(
            f"{total_planted} planted papers exceed the pool budget of {spec.n_papers}"
        )

    dim = 2 * n_ideas + spec.background_axes
    window_days = spec.window_months * 30

    papers: list[Paper] = []
    paper_rows: list[np.ndarray] = []
    planted_resolved: dict[str, list[tuple[str, float]]] = {i: [] for i in idea_ids}

    def next_pid() -> str:
        return f"P{len(papers):05d}"

    def make_paper(pid: str, citations: int, venue: str, topic: str) -> Paper:
        published = spec.cutoff + timedelta(days=int(rng.integers(0, window_days)))
        return Paper(
            paper_id=pid,
            title=f"A study of {topic.lower()} ({pid})",
            abstract=f"Synthetic abstract for {pid} covering {topic.lower()}.",
            citation_count=citations,
            venue=venue,
            published=published,
            topics=frozenset({topic}),
        )

    for i, idea_id in enumerate(idea_ids):
        topic = DEFAULT_TOPICS[i % len(DEFAULT_TOPICS)]
        for plant in plants[idea_id]:
            pid = next_pid()
            if plant.citations is not None:
                citations = plant.citations
            else:
                citations = int(rng.integers(0, spec.max_citations + 1))
            if plant.venue is not None:
                venue = plant.venue
            elif rng.random() < spec.venue_prob:
                venue = str(rng.choice(np.asarray(TOP_VENUE_NAMES)))
            else:
                venue = "arXiv"
            papers.append(make_paper(pid, citations, venue, topic))
            row = np.zeros(dim, dtype=np.float32)
            row[2 * i] = plant.sim
            row[2 * i + 1] = math.sqrt(1.0 - plant.sim * plant.sim)
            paper_rows.append(row)
            planted_resolved[idea_id].append((pid, plant.sim))

    # background papers, two of them pinning the citation extremes so the
    # min-max span does not depend on the planted draws
    n_background = spec.n_papers - len(papers)
    for j in range(n_background):
        pid = next_pid()
        topic = DEFAULT_TOPICS[int(rng.integers(0, len(DEFAULT_TOPICS)))]
        if j == 0:
            citations = 0
        elif j == 1:
            citations = spec.max_citations
        else:
            # right-skewed counts, most papers barely cited
            citations = min(spec.max_citations, int(rng.pareto(1.2) * 3))
        venue = "arXiv" if rng.random() < 0.9 else "Journal of Synthetic Results"
        papers.append(make_paper(pid, citations, venue, topic))
        row = np.zeros(dim, dtype=np.float32)
        row[2 * n_ideas + j % spec.background_axes] = 1.0
        paper_rows.append(row)

    # analytic impact for every paper: same formula, computed independently here
    counts = [p.citation_count for p in papers]
    c_min, c_max = min(counts), max(counts)
    span = c_max - c_min
    impact: dict[str, float] = {}
    for p in papers:
        c_hat = 0.0 if span == 0 else (p.citation_count - c_min) / span
        v = 1 if p.venue in TOP_VENUE_NAMES else 0
        impact[p.paper_id] = spec.weight_citations * c_hat + spec.weight_venue * v

    ideas: list[Idea] = []
    idea_rows: list[np.ndarray] = []
    for i, idea_id in enumerate(idea_ids):
        topic = DEFAULT_TOPICS[i % len(DEFAULT_TOPICS)]
        ideas.append(Idea(
            idea_id=idea_id,
            system=systems[idea_id],
            topic=topic,
            problem=f"Open problem {i} in {topic.lower()} remains unaddressed.",
            method=f"Proposed approach {i}: a targeted technique for {topic.lower()}.",
            provenance_dates=frozenset({
                spec.cutoff - timedelta(days=90),
                spec.cutoff - timedelta(days=1),
            }),
        ))
        row = np.zeros(dim, dtype=np.float32)
        row[2 * i] = 1.0
        idea_rows.append(row)

    judge = [
        JudgeScores(
            idea_id=idea_id,
            novelty=_clip_judge(rng.normal(7.0, 1.2)),
            feasibility=_clip_judge(rng.normal(7.4, 1.0)),
            impact=_clip_judge(rng.normal(8.0, 0.9)),
            overall=_clip_judge(rng.normal(7.4, 0.9)),
        )
        for idea_id in idea_ids
    ]

    oracle = FixtureOracle(
        theta_ref=spec.theta_ref,
        k=spec.k,
        planted=planted_resolved,
        impact=impact,
        scores={},
        systems=systems,
    )
    oracle.scores = {i: oracle.score_at(i, spec.theta_ref) for i in idea_ids}

    return Fixture(
        spec=spec,
        papers=papers,
        ideas=ideas,
        judge=judge,
        paper_ids=[p.paper_id for p in papers],
        paper_vectors=np.vstack(paper_rows),
        idea_ids=idea_ids,
        idea_vectors=np.vstack(idea_rows),
        oracle=oracle,
    )


def _clip_judge(value: float) -> float:
    return float(min(10.0, max(1.0, round(value, 2))))


def write_fixture(fixture: Fixture, out_dir: Path | str) -> dict[str, Path]:
    """Persist all fixture artifacts; byte-identical for identical specs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "papers": out_dir / "papers.jsonl",
        "ideas": out_dir / "ideas.jsonl",
        "judge": out_dir / "judge.jsonl",
        "paper_vectors": out_dir / "papers.hsve",
        "idea_vectors": out_dir / "ideas.hsve",
        "oracle": out_dir / "oracle.json",
    }
    corpus.write_papers(paths["papers"], fixture.papers, timestamp=FIXTURE_TIMESTAMP)
    corpus.write_ideas(paths["ideas"], fixture.ideas, timestamp=FIXTURE_TIMESTAMP)
    write_judge_scores(paths["judge"], fixture.judge)
    dim = fixture.paper_vectors.shape[1]
    write_vectors(fixture.paper_ids, fixture.paper_vectors, dim, paths["paper_vectors"])
    write_vectors(fixture.idea_ids, fixture.idea_vectors, dim, paths["idea_vectors"])
    with open(paths["oracle"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(fixture.oracle.to_payload(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return paths


def read_oracle(path: Path | str) -> FixtureOracle:
    with open(Path(path), encoding="utf-8") as fh:
        return FixtureOracle.from_payload(json.load(fh))
