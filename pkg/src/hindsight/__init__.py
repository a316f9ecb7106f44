"""Time-split evaluation of generated research ideas.

Ideas produced from pre-cutoff literature are matched against a pool of
real post-cutoff publications and scored by the citation/venue impact of
their best match, then compared across systems with nonparametric tests.
"""

__version__ = "0.1.0"

from hindsight.corpus import Idea, Paper, TimeSplitConfig
from hindsight.matcher import MatchSet
from hindsight.scorer import HindsightScore, ImpactTable, VenueConfig
from hindsight.stats import JudgeScores, TestResult

__all__ = [
    "Idea",
    "Paper",
    "TimeSplitConfig",
    "MatchSet",
    "HindsightScore",
    "ImpactTable",
    "VenueConfig",
    "JudgeScores",
    "TestResult",
    "__version__",
]
