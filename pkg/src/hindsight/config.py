"""Run configuration: defaults, config-file loading, flag overrides, hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path

import yaml

from hindsight.corpus import SEPARATOR, TimeSplitConfig
from hindsight.ingest import DEFAULT_BASE_URL
from hindsight.scorer import DEFAULT_TOP_VENUES, VenueConfig

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

DEFAULT_THETA_GRID = (0.93, 0.935, 0.94, 0.945, 0.95, 0.955, 0.96, 0.965)


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    cutoff: date = date(2023, 6, 1)
    window_months: int = 30
    model_knowledge_cutoff: date = date(2023, 12, 1)
    min_margin_months: int = 6
    theta: float = 0.96
    k: int = 20
    weight_citations: float = 0.6
    weight_venue: float = 0.4
    top_venues: tuple[str, ...] = tuple(sorted(DEFAULT_TOP_VENUES))
    topics: tuple[str, ...] = DEFAULT_TOPICS
    theta_grid: tuple[float, ...] = DEFAULT_THETA_GRID
    treatment: str = "RA"
    baseline: str = "BL"
    workdir: Path = Path("run")
    papers_path: Path | None = None
    ideas_path: Path | None = None
    paper_vectors_path: Path | None = None
    idea_vectors_path: Path | None = None
    judge_path: Path | None = None
    report_dir: Path | None = None
    cache_dir: Path | None = None
    api_base_url: str = DEFAULT_BASE_URL
    parallelism: int = 4
    embedder_command: str = "hs-embed"
    batch_size: int = 32
    seed: int = 1

    # -- resolved paths (explicit setting wins, else a fixed name in workdir) --

    def _resolve(self, explicit: Path | None, name: str) -> Path:
        return explicit if explicit is not None else self.workdir / name

    @property
    def papers_file(self) -> Path:
        return self._resolve(self.papers_path, "papers.jsonl")

    @property
    def papers_raw_file(self) -> Path:
        return self.workdir / "papers_raw.jsonl"

    @property
    def ideas_file(self) -> Path:
        return self._resolve(self.ideas_path, "ideas.jsonl")

    @property
    def paper_vectors_file(self) -> Path:
        return self._resolve(self.paper_vectors_path, "papers.hsve")

    @property
    def idea_vectors_file(self) -> Path:
        return self._resolve(self.idea_vectors_path, "ideas.hsve")

    @property
    def judge_file(self) -> Path:
        return self._resolve(self.judge_path, "judge.jsonl")

    @property
    def report_directory(self) -> Path:
        return self._resolve(self.report_dir, "report")

    @property
    def cache_directory(self) -> Path:
        return self._resolve(self.cache_dir, "cache")

    # -- derived views ---------------------------------------------------------

    def time_split(self) -> TimeSplitConfig:
        return TimeSplitConfig(
            cutoff=self.cutoff,
            window_months=self.window_months,
            model_knowledge_cutoff=self.model_knowledge_cutoff,
            min_margin_months=self.min_margin_months,
        )

    def venue_config(self) -> VenueConfig:
        return VenueConfig(
            top_venues=frozenset(self.top_venues),
            weight_citations=self.weight_citations,
            weight_venue=self.weight_venue,
        )

    def validate(self) -> "RunConfig":
        if not -1.0 < self.theta <= 1.0:
            raise ConfigError(f"theta must be in (-1, 1], got {self.theta}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        for name, w in (("weight_citations", self.weight_citations), ("weight_venue", self.weight_venue)):
            if w < 0:
                raise ConfigError(f"{name} must be non-negative, got {w}")
        if abs(self.weight_citations + self.weight_venue - 1.0) > 1e-9:
            raise ConfigError(
                f"weights must sum to 1, got {self.weight_citations} + {self.weight_venue}"
            )
        if self.window_months <= 0:
            raise ConfigError(f"window_months must be positive, got {self.window_months}")
        if self.min_margin_months < 0:
            raise ConfigError(f"min_margin_months must be non-negative, got {self.min_margin_months}")
        if not self.theta_grid:
            raise ConfigError("theta_grid must not be empty")
        if any(not -1.0 < t <= 1.0 for t in self.theta_grid):
            raise ConfigError(f"theta_grid values must be in (-1, 1]: {self.theta_grid}")
        if any(b <= a for a, b in zip(self.theta_grid, self.theta_grid[1:])):
            raise ConfigError(f"theta_grid must be strictly increasing: {self.theta_grid}")
        if self.treatment == self.baseline:
            raise ConfigError(f"treatment and baseline are both {self.treatment!r}")
        if not self.top_venues:
            raise ConfigError("top_venues must not be empty")
        if any(not t.strip() for t in self.topics):
            raise ConfigError("topics must not contain blank entries")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        resolved = {}
        for name in (
            "papers_file",
            "ideas_file",
            "paper_vectors_file",
            "idea_vectors_file",
            "judge_file",
        ):
            path = getattr(self, name).resolve()
            if path in resolved:
                raise ConfigError(f"{name} and {resolved[path]} point at the same file: {path}")
            resolved[path] = name
        return self

    def config_hash(self) -> str:
        """Hash of the score-relevant parameters; embedded in every report."""
        payload = {
            "cutoff": self.cutoff.isoformat(),
            "window_months": self.window_months,
            "theta": self.theta,
            "k": self.k,
            "weights": [self.weight_citations, self.weight_venue],
            "top_venues": sorted(self.top_venues),
            "separator": SEPARATOR,
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_record(self) -> dict:
        rec = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, date):
                value = value.isoformat()
            elif isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            rec[f.name] = value
        rec["config_hash"] = self.config_hash()
        return rec


_DATE_FIELDS = {"cutoff", "model_knowledge_cutoff"}
_PATH_FIELDS = {
    "workdir",
    "papers_path",
    "ideas_path",
    "paper_vectors_path",
    "idea_vectors_path",
    "judge_path",
    "report_dir",
    "cache_dir",
}
_TUPLE_FIELDS = {"top_venues", "topics", "theta_grid"}


def _coerce(name: str, value):
    if value is None:
        return None
    if name in _DATE_FIELDS:
        if isinstance(value, date):
            return value
        try:
            return date.fromisoformat(str(value))
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    if name in _PATH_FIELDS:
        return Path(value)
    if name in _TUPLE_FIELDS:
        if isinstance(value, (str, bytes)):
            raise ConfigError(f"{name} must be a list, got a string")
        return tuple(value)
    return value


def load_config(path: Path | str | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults <- config file <- CLI overrides, validated as a whole."""
    known = {f.name for f in fields(RunConfig)}
    settings: dict = {}

    if path is not None:
        with open(Path(path), encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a mapping, got {type(loaded).__name__}")
        unknown = sorted(set(loaded) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown config keys: {', '.join(unknown)}")
        settings.update(loaded)

    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config override: {key}")
        if value is not None:
            settings[key] = value

    coerced = {name: _coerce(name, value) for name, value in settings.items()}
    return RunConfig(**coerced).validate()


def override(cfg: RunConfig, **changes) -> RunConfig:
    coerced = {name: _coerce(name, value) for name, value in changes.items() if value is not None}
    return replace(cfg, **coerced).validate()
