import json
from datetime import date

import pytest
import requests

from hindsight.corpus import dedup
from hindsight.ingest import (
    DegradationReport,
    IngestError,
    MetadataClient,
    QueryPlan,
    ingest_papers,
    parse_record,
)


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload if payload is not None else {}
        self.text = text or json.dumps(self._payload)

    def json(self):
        return self._payload


class FakeSession:
    """Queues responses per query string; records every request."""

    def __init__(self):
        self.queues = {}
        self.calls = []
        self.fail_with = None

    def queue(self, query, *responses):
        self.queues.setdefault(query, []).extend(responses)

    def get(self, url, params=None, headers=None, timeout=None):
        self.calls.append({"url": url, "params": dict(params), "headers": dict(headers or {})})
        if self.fail_with is not None:
            raise self.fail_with
        queue = self.queues[params["query"]]
        return queue.pop(0)


def record(pid, title="Title", citations=3, pub="2024-03-01", abstract="An abstract."):
    return {
        "paperId": pid,
        "title": title,
        "abstract": abstract,
        "venue": "arXiv",
        "citationCount": citations,
        "publicationDate": pub,
    }


def page(records, token=None):
    payload = {"total": len(records), "data": records}
    if token:
        payload["token"] = token
    return FakeResponse(payload=payload)


def client_with(session, **kw):
    kw.setdefault("backoff_seconds", 0.0)
    return MetadataClient(base_url="https://api.test/graph/v1", session=session, **kw)


PLAN = QueryPlan(topics=("llm agents",), start=date(2023, 6, 1), end=date(2025, 12, 1))


def test_empty_plan_is_a_noop():
    plan = QueryPlan(topics=(), start=date(2023, 6, 1), end=date(2025, 12, 1))
    papers, report = ingest_papers(plan, client_with(FakeSession()))
    assert papers == []
    assert report.skipped_malformed == 0


def test_single_page_fetch():
    session = FakeSession()
    session.queue("llm agents", page([record("a"), record("b", title="Other")]))
    papers, report = ingest_papers(PLAN, client_with(session))
    assert [p.paper_id for p in papers] == ["a", "b"]
    assert papers[0].topics == frozenset({"llm agents"})
    assert session.calls[0]["params"]["publicationDateOrYear"] == "2023-06-01:2025-12-01"


def test_pagination_follows_tokens():
    session = FakeSession()
    session.queue(
        "llm agents",
        page([record("a")], token="NEXT1"),
        page([record("b", title="B")], token="NEXT2"),
        page([record("c", title="C")]),
    )
    papers, _ = ingest_papers(PLAN, client_with(session))
    assert [p.paper_id for p in papers] == ["a", "b", "c"]
    tokens = [c["params"].get("token") for c in session.calls]
    assert tokens == [None, "NEXT1", "NEXT2"]


def test_page_limit_stops_early():
    session = FakeSession()
    session.queue("llm agents", page([record("a")], token="MORE"))
    papers, _ = ingest_papers(PLAN, client_with(session, page_limit=1))
    assert len(papers) == 1


def test_retry_on_429_then_success():
    session = FakeSession()
    session.queue("llm agents", FakeResponse(status_code=429), page([record("a")]))
    papers, _ = ingest_papers(PLAN, client_with(session))
    assert len(papers) == 1
    assert len(session.calls) == 2


def test_gives_up_after_bounded_retries_naming_query():
    session = FakeSession()
    session.queue("llm agents", *[FakeResponse(status_code=503)] * 9)
    with pytest.raises(IngestError, match="llm agents"):
        ingest_papers(PLAN, client_with(session, max_retries=3))
    assert len(session.calls) == 3


def test_network_exception_is_retried_then_fatal():
    session = FakeSession()
    session.fail_with = requests.ConnectionError("refused")
    with pytest.raises(IngestError, match="refused"):
        ingest_papers(PLAN, client_with(session, max_retries=2))


def test_hard_http_error_is_immediate():
    session = FakeSession()
    session.queue("llm agents", FakeResponse(status_code=400, text="bad query"))
    with pytest.raises(IngestError, match="400"):
        ingest_papers(PLAN, client_with(session))
    assert len(session.calls) == 1


def test_response_without_data_is_fatal():
    session = FakeSession()
    session.queue("llm agents", FakeResponse(payload={"unexpected": True}))
    with pytest.raises(IngestError, match="data"):
        ingest_papers(PLAN, client_with(session))


def test_api_key_sent_as_header():
    session = FakeSession()
    session.queue("llm agents", page([record("a")]))
    ingest_papers(PLAN, client_with(session, api_key="sekrit"))
    assert session.calls[0]["headers"]["x-api-key"] == "sekrit"


def test_no_key_no_header(monkeypatch):
    monkeypatch.delenv("S2_API_KEY", raising=False)
    session = FakeSession()
    session.queue("llm agents", page([record("a")]))
    ingest_papers(PLAN, client_with(session))
    assert "x-api-key" not in session.calls[0]["headers"]


# ---------------------------------------------------------------------------
# record parsing and degradation accounting


def test_malformed_records_skipped_and_counted():
    bad = [
        {"title": "No id", "citationCount": 1, "publicationDate": "2024-01-01"},
        {"paperId": "x1", "citationCount": 1, "publicationDate": "2024-01-01"},  # no title
        {"paperId": "x2", "title": "T", "publicationDate": "2024-01-01"},  # no citations
        {"paperId": "x3", "title": "T", "citationCount": -4, "publicationDate": "2024-01-01"},
        {"paperId": "x4", "title": "T", "citationCount": 1},  # no date
        {"paperId": "x5", "title": "T", "citationCount": 1, "publicationDate": "01/02/2024"},
    ]
    session = FakeSession()
    session.queue("llm agents", page(bad + [record("good")]))
    papers, report = ingest_papers(PLAN, client_with(session))
    assert [p.paper_id for p in papers] == ["good"]
    assert report.skipped_malformed == 6
    assert sum(report.reasons.values()) == 6


def test_missing_abstract_retained_but_degraded():
    session = FakeSession()
    session.queue("llm agents", page([record("a", abstract=None), record("b", title="B")]))
    papers, report = ingest_papers(PLAN, client_with(session))
    assert len(papers) == 2
    degraded = {p.paper_id: p.degraded for p in papers}
    assert degraded == {"a": True, "b": False}
    assert papers[0].abstract == ""
    assert report.missing_abstract == 1


def test_boolean_citation_count_rejected():
    report = DegradationReport()
    rec = record("a")
    rec["citationCount"] = True
    assert parse_record(rec, "t", report) is None
    assert report.skipped_malformed == 1


def test_fixture_cache_50_records_with_5_duplicate_ids():
    records = [record(f"p{i}", title=f"Title number {i}") for i in range(45)]
    records += [record(f"p{i}", title=f"Alt title {i}", citations=0) for i in range(5)]
    session = FakeSession()
    session.queue("llm agents", page(records))
    papers, _ = ingest_papers(PLAN, client_with(session))
    assert len(papers) == 50  # raw pool keeps duplicates
    assert len(dedup(papers)) == 45


# ---------------------------------------------------------------------------
# caching


def test_cache_replays_without_network(tmp_path):
    session = FakeSession()
    session.queue("llm agents", page([record("a")], token="T2"), page([record("b", title="B")]))
    client = client_with(session, cache_dir=tmp_path)
    first, _ = ingest_papers(PLAN, client)
    assert len(session.calls) == 2

    # identical plan, fresh client, dead session: everything from cache
    dead = FakeSession()
    cached_client = client_with(dead, cache_dir=tmp_path)
    second, _ = ingest_papers(PLAN, cached_client)
    assert dead.calls == []
    assert [p.paper_id for p in second] == [p.paper_id for p in first]


def test_cache_key_distinguishes_queries(tmp_path):
    session = FakeSession()
    session.queue("llm agents", page([record("a")]))
    session.queue("diffusion", page([record("d", title="D")]))
    plan = QueryPlan(topics=("llm agents", "diffusion"),
                     start=date(2023, 6, 1), end=date(2025, 12, 1))
    ingest_papers(plan, client_with(session, cache_dir=tmp_path))
    assert len(list(tmp_path.glob("*.json"))) == 2


def test_errors_are_not_cached(tmp_path):
    session = FakeSession()
    session.queue("llm agents", *[FakeResponse(status_code=500)] * 2)
    with pytest.raises(IngestError):
        ingest_papers(PLAN, client_with(session, cache_dir=tmp_path, max_retries=2))
    assert list(tmp_path.glob("*.json")) == []


# ---------------------------------------------------------------------------
# parallel topic fetches


def test_topic_order_is_deterministic_under_parallelism():
    topics = tuple(f"topic-{i}" for i in range(6))
    plan = QueryPlan(topics=topics, start=date(2023, 6, 1), end=date(2025, 12, 1))
    session = FakeSession()
    for i, t in enumerate(topics):
        session.queue(t, page([record(f"p{i}", title=f"Title {i}")]))
    papers, _ = ingest_papers(plan, client_with(session), parallelism=4)
    assert [p.paper_id for p in papers] == [f"p{i}" for i in range(6)]


def test_invalid_plan_rejected():
    with pytest.raises(ValueError):
        QueryPlan(topics=("x",), start=date(2025, 1, 1), end=date(2024, 1, 1))
    with pytest.raises(ValueError):
        QueryPlan(topics=("  ",), start=date(2023, 6, 1), end=date(2025, 12, 1))
