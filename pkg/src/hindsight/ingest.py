"""Client for the scholarly-metadata API: paginated bulk search with disk cache.

Every page request is cached on disk keyed by the canonicalized query, so a
completed ingest can be replayed offline and interrupted runs resume without
refetching. Records that do not parse into a valid Paper are skipped and
counted in a degradation report rather than failing the whole ingest.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable

import requests

from hindsight.corpus import Paper

API_KEY_ENV = "S2_API_KEY"
DEFAULT_BASE_URL = "https://api.semanticscholar.org/graph/v1"
FIELDS = "title,abstract,venue,citationCount,publicationDate"

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class IngestError(RuntimeError):
    """Unrecoverable ingest failure (network, auth, or malformed response)."""


@dataclass(frozen=True)
class QueryPlan:
    """Topic queries plus the date range they all share."""

    topics: tuple[str, ...]
    start: date
    end: date

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"query range ends ({self.end}) before it starts ({self.start})")
        if any(not t.strip() for t in self.topics):
            raise ValueError("blank topic query")

    @property
    def date_range(self) -> str:
        return f"{self.start.isoformat()}:{self.end.isoformat()}"


@dataclass
class DegradationReport:
    """What was lost or patched while parsing API responses."""

    skipped_malformed: int = 0
    missing_abstract: int = 0
    reasons: dict[str, int] = field(default_factory=dict)
    examples: list[str] = field(default_factory=list)

    _MAX_EXAMPLES = 20

    def record_skip(self, reason: str, detail: str):
        self.skipped_malformed += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1
        if len(self.examples) < self._MAX_EXAMPLES:
            self.examples.append(f"{reason}: {detail}")

    def record_missing_abstract(self):
        self.missing_abstract += 1

    def merge(self, other: "DegradationReport"):
        self.skipped_malformed += other.skipped_malformed
        self.missing_abstract += other.missing_abstract
        for reason, count in other.reasons.items():
            self.reasons[reason] = self.reasons.get(reason, 0) + count
        room = self._MAX_EXAMPLES - len(self.examples)
        if room > 0:
            self.examples.extend(other.examples[:room])

    def to_record(self) -> dict:
        return {
            "skipped_malformed": self.skipped_malformed,
            "missing_abstract": self.missing_abstract,
            "reasons": dict(sorted(self.reasons.items())),
            "examples": list(self.examples),
        }


class MetadataClient:
    """Paginated bulk-search client with retries and an append-only disk cache."""

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str | None = None,
        cache_dir: Path | str | None = None,
        session: requests.Session | None = None,
        max_retries: int = 5,
        backoff_seconds: float = 1.0,
        timeout: float = 30.0,
        page_limit: int | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.session = session if session is not None else requests.Session()
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self.timeout = timeout
        # safety valve for tests and smoke runs; None means fetch all pages
        self.page_limit = page_limit

    # -- caching ------------------------------------------------------------

    def _cache_path(self, url: str, params: dict) -> Path | None:
        if self.cache_dir is None:
            return None
        key = json.dumps({"url": url, "params": params}, sort_keys=True)
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def _cache_read(self, path: Path | None) -> dict | None:
        if path is None or not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def _cache_write(self, path: Path | None, payload: dict):
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        tmp.replace(path)

    # -- transport ----------------------------------------------------------

    def _request(self, url: str, params: dict, query: str) -> dict:
        cache_path = self._cache_path(url, params)
        cached = self._cache_read(cache_path)
        if cached is not None:
            return cached

        headers = {}
        if self.api_key:
            headers["x-api-key"] = self.api_key

        last_error = ""
        for attempt in range(self.max_retries):
            if attempt:
                time.sleep(self.backoff_seconds * 2 ** (attempt - 1))
            try:
                response = self.session.get(url, params=params, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise IngestError(
                    f"query {query!r}: HTTP {response.status_code}: {response.text[:200]}"
                )
            payload = response.json()
            if not isinstance(payload, dict) or not isinstance(payload.get("data"), list):
                raise IngestError(f"query {query!r}: response missing 'data' list")
            self._cache_write(cache_path, payload)
            return payload

        raise IngestError(
            f"query {query!r} failed after {self.max_retries} attempts ({last_error})"
        )

    # -- search -------------------------------------------------------------

    def search(self, query: str, date_range: str) -> tuple[list[dict], DegradationReport]:
        """All raw records for one topic query, following pagination tokens."""
        url = f"{self.base_url}/paper/search/bulk"
        params: dict = {"query": query, "fields": FIELDS, "publicationDateOrYear": date_range}
        records: list[dict] = []
        report = DegradationReport()
        pages = 0
        while True:
            payload = self._request(url, dict(params), query)
            for item in payload["data"]:
                if isinstance(item, dict):
                    records.append(item)
                else:
                    report.record_skip("non-object record", repr(item)[:80])
            pages += 1
            token = payload.get("token")
            if not token or (self.page_limit is not None and pages >= self.page_limit):
                break
            params["token"] = token
        return records, report


def parse_record(item: dict, topic: str, report: DegradationReport) -> Paper | None:
    """One API record -> Paper, or None (skip counted in the report)."""
    paper_id = item.get("paperId")
    if not isinstance(paper_id, str) or not paper_id.strip():
        report.record_skip("missing paperId", json.dumps(item)[:80])
        return None
    title = item.get("title")
    if not isinstance(title, str) or not title.strip():
        report.record_skip("missing title", paper_id)
        return None
    citations = item.get("citationCount")
    if not isinstance(citations, int) or isinstance(citations, bool) or citations < 0:
        report.record_skip("bad citationCount", paper_id)
        return None
    raw_date = item.get("publicationDate")
    if not isinstance(raw_date, str):
        report.record_skip("missing publicationDate", paper_id)
        return None
    try:
        published = date.fromisoformat(raw_date)
    except ValueError:
        report.record_skip("unparseable publicationDate", f"{paper_id}: {raw_date!r}")
        return None
    abstract = item.get("abstract")
    degraded = not isinstance(abstract, str) or not abstract.strip()
    if degraded:
        report.record_missing_abstract()
        abstract = ""
    venue = item.get("venue")
    if not isinstance(venue, str):
        venue = ""
    return Paper(
        paper_id=paper_id,
        title=title,
        abstract=abstract,
        citation_count=citations,
        venue=venue,
        published=published,
        topics=frozenset({topic}),
        degraded=degraded,
    )


def ingest_papers(
    plan: QueryPlan,
    client: MetadataClient,
    parallelism: int = 4,
) -> tuple[list[Paper], DegradationReport]:
    """Fetch every topic query in the plan; returns the raw pool before dedup.

    Topic queries run in a bounded thread pool but results are concatenated in
    plan order, so output order is deterministic.
    """
    report = DegradationReport()
    if not plan.topics:
        return [], report

    def fetch(topic: str) -> tuple[list[dict], DegradationReport]:
        return client.search(topic, plan.date_range)

    workers = max(1, min(parallelism, len(plan.topics)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fetch, plan.topics))

    papers: list[Paper] = []
    for topic, (records, topic_report) in zip(plan.topics, results):
        report.merge(topic_report)
        for item in records:
            paper = parse_record(item, topic, report)
            if paper is not None:
                papers.append(paper)
    return papers, report


def pool_counts(raw: Iterable[Paper], deduped: Iterable[Paper]) -> dict:
    raw = list(raw)
    deduped = list(deduped)
    return {"raw": len(raw), "deduped": len(deduped), "removed": len(raw) - len(deduped)}
