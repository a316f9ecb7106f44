"""Ground-truth paper pool and idea set: records, dedup, time-split checks.

Papers and ideas are immutable records persisted as line-delimited JSON
(one record per line, UTF-8) behind a header line carrying the schema
version and an ingest timestamp.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

SEPARATOR = "[SEP]"

SCHEMA_VERSION = 1

PAPERS_SCHEMA = "hindsight/papers"
IDEAS_SCHEMA = "hindsight/ideas"


class CorpusError(ValueError):
    """Invalid corpus record or corpus file."""


class CompositionError(CorpusError):
    """Document text cannot be composed from its record."""


@dataclass(frozen=True)
class Paper:
    """One ground-truth publication, citation count snapshotted at ingest."""

    paper_id: str
    title: str
    abstract: str
    citation_count: int
    venue: str
    published: date
    topics: frozenset[str] = frozenset()
    degraded: bool = False

    def __post_init__(self):
        if not self.paper_id.strip():
            raise CorpusError("paper_id must be non-empty")
        if not self.title:
            raise CorpusError(f"paper {self.paper_id}: title must be non-empty")
        if self.citation_count < 0:
            raise CorpusError(f"paper {self.paper_id}: citation_count must be >= 0")
        if not self.abstract and not self.degraded:
            raise CorpusError(
                f"paper {self.paper_id}: empty abstract only allowed when flagged degraded"
            )


@dataclass(frozen=True)
class Idea:
    """One generated research idea with its system/topic provenance."""

    idea_id: str
    system: str
    topic: str
    problem: str
    method: str
    seed_paper_id: str | None = None
    provenance_dates: frozenset[date] = frozenset()

    def __post_init__(self):
        if not self.idea_id.strip():
            raise CorpusError("idea_id must be non-empty")
        if not self.problem or not self.method:
            raise CorpusError(f"idea {self.idea_id}: problem and method must be non-empty")


@dataclass(frozen=True)
class TimeSplitConfig:
    """Cutoff date, ground-truth window and leakage safety margin.

    The margin requirement (knowledge cutoff at least ``min_margin_months``
    after the cutoff) is checked by :func:`validate_time_split`, which
    reports a shortfall instead of raising, so that misconfigured runs can
    be diagnosed from the validation report.
    """

    cutoff: date
    window_months: int
    model_knowledge_cutoff: date
    min_margin_months: int = 6

    def __post_init__(self):
        if self.window_months <= 0:
            raise CorpusError("window_months must be positive")

    @property
    def window_end(self) -> date:
        return add_months(self.cutoff, self.window_months)


def add_months(d: date, months: int) -> date:
    month0 = d.month - 1 + months
    year = d.year + month0 // 12
    month = month0 % 12 + 1
    # clamp day for short months
    day = min(d.day, [31, 29 if year % 4 == 0 and (year % 100 != 0 or year % 400 == 0) else 28,
                      31, 30, 31, 30, 31, 31, 30, 31, 30, 31][month - 1])
    return date(year, month, day)


def months_between(start: date, end: date) -> int:
    """Whole months from start to end (negative when end precedes start)."""
    months = (end.year - start.year) * 12 + (end.month - start.month)
    if end.day < start.day:
        months -= 1
    return months


_PUNCT_RE = re.compile(r"[^\w\s]", re.UNICODE)
_WS_RE = re.compile(r"\s+")


def normalize_title(title: str) -> str:
    """Dedup key: case-folded, punctuation-stripped, whitespace-collapsed."""
    return _WS_RE.sub(" ", _PUNCT_RE.sub("", title.casefold())).strip()


def dedup(papers: Sequence[Paper]) -> list[Paper]:
    """Collapse duplicate papers, keeping the highest-cited record.

    Two records are duplicates when they share a paper_id or a normalized
    title; duplicate groups are closed transitively. The survivor of each
    group is the record with the highest citation count (ties broken by
    lowest paper_id, then title, for determinism). Survivors keep their
    fields untouched and their input order.
    """
    parent = list(range(len(papers)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    by_id: dict[str, int] = {}
    by_title: dict[str, int] = {}
    for i, p in enumerate(papers):
        if p.paper_id in by_id:
            union(by_id[p.paper_id], i)
        else:
            by_id[p.paper_id] = i
        key = normalize_title(p.title)
        if key in by_title:
            union(by_title[key], i)
        else:
            by_title[key] = i

    best: dict[int, int] = {}
    for i, p in enumerate(papers):
        root = find(i)
        if root not in best:
            best[root] = i
        else:
            q = papers[best[root]]
            if (-p.citation_count, p.paper_id, p.title) < (-q.citation_count, q.paper_id, q.title):
                best[root] = i

    keep = sorted(best.values())
    return [papers[i] for i in keep]


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_records(self) -> list[dict]:
        return [
            {"kind": v.kind, "subject": v.subject, "detail": v.detail}
            for v in self.violations
        ]


def validate_time_split(
    config: TimeSplitConfig,
    pool: Iterable[Paper],
    ideas: Iterable[Idea],
) -> ValidationReport:
    """Check the run for temporal leakage; every violation becomes a report entry.

    Pool papers must be published on or after the cutoff; idea provenance
    must be strictly before it; the model knowledge cutoff must trail the
    cutoff by at least the configured margin. An empty report means the
    run is leakage-safe.
    """
    report = ValidationReport()
    margin = months_between(config.cutoff, config.model_knowledge_cutoff)
    if margin < config.min_margin_months:
        report.violations.append(Violation(
            kind="margin_shortfall",
            subject="config",
            detail=(f"knowledge cutoff is {margin} months after the cutoff; "
                    f"at least {config.min_margin_months} required"),
        ))
    for p in pool:
        if p.published < config.cutoff:
            report.violations.append(Violation(
                kind="pool_before_cutoff",
                subject=p.paper_id,
                detail=f"published {p.published.isoformat()} precedes cutoff {config.cutoff.isoformat()}",
            ))
    for i in ideas:
        for d in sorted(i.provenance_dates):
            if d >= config.cutoff:
                report.violations.append(Violation(
                    kind="provenance_at_or_after_cutoff",
                    subject=i.idea_id,
                    detail=f"provenance date {d.isoformat()} is not strictly before cutoff {config.cutoff.isoformat()}",
                ))
    return report


def compose_paper_text(p: Paper) -> str:
    """Title and abstract joined by the separator token.

    Deterministic; an empty abstract (degraded record) leaves the text
    ending at the separator.
    """
    if not p.title:
        raise CompositionError(f"paper {p.paper_id}: title must be non-empty")
    if p.abstract:
        return f"{p.title} {SEPARATOR} {p.abstract}"
    return f"{p.title} {SEPARATOR}"


def compose_idea_text(i: Idea) -> str:
    """Problem and method joined by the separator token."""
    if not i.problem:
        raise CompositionError(f"idea {i.idea_id}: problem must be non-empty")
    if not i.method:
        raise CompositionError(f"idea {i.idea_id}: method must be non-empty")
    return f"{i.problem} {SEPARATOR} {i.method}"


# ---------------------------------------------------------------------------
# line-delimited persistence

def _paper_to_record(p: Paper) -> dict:
    return {
        "paper_id": p.paper_id,
        "title": p.title,
        "abstract": p.abstract,
        "citation_count": p.citation_count,
        "venue": p.venue,
        "published": p.published.isoformat(),
        "topics": sorted(p.topics),
        "degraded": p.degraded,
    }


def _paper_from_record(rec: dict) -> Paper:
    return Paper(
        paper_id=rec["paper_id"],
        title=rec["title"],
        abstract=rec.get("abstract", ""),
        citation_count=int(rec["citation_count"]),
        venue=rec.get("venue", ""),
        published=date.fromisoformat(rec["published"]),
        topics=frozenset(rec.get("topics", [])),
        degraded=bool(rec.get("degraded", False)),
    )


def _idea_to_record(i: Idea) -> dict:
    return {
        "idea_id": i.idea_id,
        "system": i.system,
        "topic": i.topic,
        "problem": i.problem,
        "method": i.method,
        "seed_paper_id": i.seed_paper_id,
        "provenance_dates": sorted(d.isoformat() for d in i.provenance_dates),
    }


def _idea_from_record(rec: dict) -> Idea:
    return Idea(
        idea_id=rec["idea_id"],
        system=rec["system"],
        topic=rec["topic"],
        problem=rec["problem"],
        method=rec["method"],
        seed_paper_id=rec.get("seed_paper_id"),
        provenance_dates=frozenset(
            date.fromisoformat(d) for d in rec.get("provenance_dates", [])
        ),
    )


def _dump_line(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _write_jsonl(path: Path, schema: str, records: Iterable[dict], timestamp: str | None):
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    header = {"schema": schema, "schema_version": SCHEMA_VERSION, "ingested_at": timestamp}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump_line(header) + "\n")
        for rec in records:
            fh.write(_dump_line(rec) + "\n")


def _read_jsonl(path: Path, schema: str) -> list[dict]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise CorpusError(f"{path}: empty file, expected a header record")
    header = json.loads(lines[0])
    if header.get("schema") != schema:
        raise CorpusError(f"{path}: expected schema {schema!r}, found {header.get('schema')!r}")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise CorpusError(f"{path}: unsupported schema_version {header.get('schema_version')!r}")
    return [json.loads(ln) for ln in lines[1:]]


def write_papers(path: Path | str, papers: Iterable[Paper], timestamp: str | None = None):
    _write_jsonl(Path(path), PAPERS_SCHEMA, (_paper_to_record(p) for p in papers), timestamp)


def read_papers(path: Path | str) -> list[Paper]:
    papers = [_paper_from_record(rec) for rec in _read_jsonl(Path(path), PAPERS_SCHEMA)]
    seen: set[str] = set()
    for p in papers:
        if p.paper_id in seen:
            raise CorpusError(f"{path}: duplicate paper_id {p.paper_id!r}")
        seen.add(p.paper_id)
    return papers


def write_ideas(path: Path | str, ideas: Iterable[Idea], timestamp: str | None = None):
    _write_jsonl(Path(path), IDEAS_SCHEMA, (_idea_to_record(i) for i in ideas), timestamp)


def read_ideas(path: Path | str) -> list[Idea]:
    ideas = [_idea_from_record(rec) for rec in _read_jsonl(Path(path), IDEAS_SCHEMA)]
    seen: set[str] = set()
    for i in ideas:
        if i.idea_id in seen:
            raise CorpusError(f"{path}: duplicate idea_id {i.idea_id!r}")
        seen.add(i.idea_id)
    return ideas


def with_degraded_flag(p: Paper) -> Paper:
    """Copy of the paper flagged degraded (used when the abstract is missing)."""
    return replace(p, degraded=True)
