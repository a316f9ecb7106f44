"""Shared record factories for the test suite."""

from datetime import date

from hindsight.corpus import Idea, Paper


def make_paper(pid="p1", title="A Paper", citations=5, published=date(2024, 1, 15), **kw):
    defaults = dict(
        paper_id=pid,
        title=title,
        abstract="Some abstract.",
        citation_count=citations,
        venue="arXiv",
        published=published,
        topics=frozenset({"LLM Agents"}),
    )
    defaults.update(kw)
    return Paper(**defaults)


def make_idea(iid="i1", system="RA", **kw):
    defaults = dict(
        idea_id=iid,
        system=system,
        topic="LLM Agents",
        problem="Agents forget context.",
        method="Add an episodic store.",
        provenance_dates=frozenset({date(2023, 1, 5)}),
    )
    defaults.update(kw)
    return Idea(**defaults)
