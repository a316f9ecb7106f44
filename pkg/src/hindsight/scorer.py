"""Per-paper impact scores and per-idea hindsight scores.

A paper's impact blends its min-max normalized citation count with a
binary top-venue indicator; an idea scores the maximum impact over its
match set, zero when the match set is empty.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from hindsight.corpus import Paper
from hindsight.matcher import MatchSet


class ScoringError(ValueError):
    """Scoring precondition violated."""


DEFAULT_TOP_VENUES = frozenset({"iclr", "neurips", "icml", "acl", "emnlp", "cvpr", "aaai"})

# raw venue strings from metadata APIs are noisy; map known long forms to
# their canonical short names after normalization
VENUE_ALIASES: dict[str, str] = {
    "neural information processing systems": "neurips",
    "advances in neural information processing systems": "neurips",
    "nips": "neurips",
    "international conference on learning representations": "iclr",
    "international conference on machine learning": "icml",
    "association for computational linguistics": "acl",
    "annual meeting of the association for computational linguistics": "acl",
    "conference on empirical methods in natural language processing": "emnlp",
    "empirical methods in natural language processing": "emnlp",
    "computer vision and pattern recognition": "cvpr",
    "ieee cvf conference on computer vision and pattern recognition": "cvpr",
    "ieee conference on computer vision and pattern recognition": "cvpr",
    "aaai conference on artificial intelligence": "aaai",
    "national conference on artificial intelligence": "aaai",
}

_VENUE_STOPWORDS = frozenset({
    "proc", "proceedings", "of", "the", "in", "on", "at", "annual",
    "conference", "meeting", "ieee", "cvf", "acm", "advances", "workshop",
})

_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class VenueConfig:
    """Top-venue list and the citation/venue blend weights."""

    top_venues: frozenset[str] = DEFAULT_TOP_VENUES
    weight_citations: float = 0.6
    weight_venue: float = 0.4
    aliases: Mapping[str, str] = field(default_factory=lambda: dict(VENUE_ALIASES))

    def __post_init__(self):
        if self.weight_citations < 0 or self.weight_venue < 0:
            raise ScoringError("weights must be non-negative")
        if abs(self.weight_citations + self.weight_venue - 1.0) > 1e-9:
            raise ScoringError("weights must sum to 1")
        object.__setattr__(
            self, "top_venues", frozenset(v.casefold() for v in self.top_venues)
        )


def normalize_venue(raw: str, aliases: Mapping[str, str] = VENUE_ALIASES) -> str:
    """Canonical venue key for a raw venue string ('' when unrecognizable)."""
    text = _WS_RE.sub(" ", _PUNCT_RE.sub(" ", raw.casefold())).strip()
    if not text:
        return ""
    if text in aliases:
        return aliases[text]
    tokens = [t for t in text.split() if not t.isdigit()]
    stripped = " ".join(t for t in tokens if t not in _VENUE_STOPWORDS)
    if stripped in aliases:
        return aliases[stripped]
    if stripped:
        return stripped
    return " ".join(tokens)


def venue_indicator(p: Paper, cfg: VenueConfig) -> int:
    """1 iff the paper's normalized venue is one of the configured top venues."""
    canonical = normalize_venue(p.venue, cfg.aliases)
    if canonical in cfg.top_venues:
        return 1
    # multi-token leftovers like "neurips datasets track" still name the venue
    if any(tok in cfg.top_venues for tok in canonical.split()):
        return 1
    return 0


def minmax_normalize(values: Sequence[float]) -> list[float]:
    """(v - min) / (max - min) per value; all zero when the spread is degenerate."""
    if not values:
        raise ScoringError("cannot normalize an empty sample")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def normalize_citations(pool: Sequence[Paper]) -> dict[str, float]:
    """Min-max normalized citation count per paper, over the given pool."""
    if not pool:
        raise ScoringError("cannot normalize citations over an empty pool")
    normalized = minmax_normalize([p.citation_count for p in pool])
    return {p.paper_id: c for p, c in zip(pool, normalized)}


def impact_score(c_hat: float, v: int, cfg: VenueConfig) -> float:
    """Weighted blend of normalized citations and the venue indicator."""
    if not 0.0 <= c_hat <= 1.0:
        raise ScoringError(f"c_hat {c_hat} outside [0, 1]")
    if v not in (0, 1):
        raise ScoringError(f"venue indicator {v} must be 0 or 1")
    return cfg.weight_citations * c_hat + cfg.weight_venue * v


@dataclass(frozen=True)
class ImpactEntry:
    c_hat: float
    v: int
    h: float


@dataclass
class ImpactTable:
    """Impact score components per paper, computed once per pool."""

    entries: dict[str, ImpactEntry]
    config: VenueConfig

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self.entries

    def h(self, paper_id: str) -> float:
        return self.entries[paper_id].h

    def to_records(self) -> list[dict]:
        return [
            {"paper_id": pid, "c_hat": e.c_hat, "v": e.v, "h": e.h}
            for pid, e in sorted(self.entries.items())
        ]


def build_impact_table(pool: Sequence[Paper], cfg: VenueConfig | None = None) -> ImpactTable:
    cfg = cfg or VenueConfig()
    c_hats = normalize_citations(pool)
    entries = {}
    for p in pool:
        v = venue_indicator(p, cfg)
        c_hat = c_hats[p.paper_id]
        entries[p.paper_id] = ImpactEntry(c_hat=c_hat, v=v, h=impact_score(c_hat, v, cfg))
    return ImpactTable(entries=entries, config=cfg)


@dataclass(frozen=True)
class HindsightScore:
    """Maximum matched impact for one idea; zero with no best paper when unmatched."""

    idea_id: str
    score: float
    best_paper_id: str | None
    match_count: int


def hindsight_score(m: MatchSet, t: ImpactTable) -> HindsightScore:
    """Score an idea by the best impact among its matched papers.

    The best paper is the impact argmax, ties broken by lowest paper id.
    Every matched paper must be present in the impact table.
    """
    missing = [pid for pid in m.paper_ids if pid not in t]
    if missing:
        raise ScoringError(f"matched paper {missing[0]!r} missing from impact table")
    if not m.matches:
        return HindsightScore(idea_id=m.idea_id, score=0.0, best_paper_id=None, match_count=0)
    best_id = None
    best_h = -1.0
    for pid in m.paper_ids:
        h = t.h(pid)
        if h > best_h or (h == best_h and (best_id is None or pid < best_id)):
            best_h = h
            best_id = pid
    return HindsightScore(
        idea_id=m.idea_id, score=best_h, best_paper_id=best_id, match_count=len(m.matches)
    )


# ---------------------------------------------------------------------------
# score export for downstream statistics

def write_scores(
    path: Path | str,
    scores: Iterable[HindsightScore],
    theta: float,
    k: int,
):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in scores:
            rec = {
                "idea_id": s.idea_id,
                "score": s.score,
                "best_paper_id": s.best_paper_id,
                "match_count": s.match_count,
                "theta": theta,
                "k": k,
            }
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False,
                                separators=(",", ":")) + "\n")


def read_scores(path: Path | str) -> list[HindsightScore]:
    scores = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            scores.append(HindsightScore(
                idea_id=rec["idea_id"],
                score=float(rec["score"]),
                best_paper_id=rec.get("best_paper_id"),
                match_count=int(rec["match_count"]),
            ))
    return scores
