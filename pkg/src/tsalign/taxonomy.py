"""Attribute type system and metric catalog.

Four attribute categories are fixed: trend (4 kinds), seasonality (7 kinds),
noise (3 kinds) and local fluctuation (19 kinds). Kind identifiers are plain
lowercase phrases; they double as the label vocabulary used when scoring
categorical answers, so they must never change once datasets exist.

The concrete list of 19 fluctuation kinds is a reconstruction: the category
sizes are fixed, the individual names are our choice.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

TREND = "trend"
SEASON = "season"
NOISE = "noise"
FLUCT = "local"

NONE_LABEL = "none"


@dataclass(frozen=True)
class TrendKind:
    id: str
    # sign of the chord slope: +1, -1, 0; None means either sign
    direction: int | None


@dataclass(frozen=True)
class SeasonKind:
    id: str


@dataclass(frozen=True)
class NoiseKind:
    id: str


@dataclass(frozen=True)
class FluctuationKind:
    """One local-fluctuation kind and what it grounds.

    ``amplitude_unit`` says what the signed ``amplitude`` of an instance means:

    - ``value``: additive deviation from the noise-free baseline, metric units
    - ``season``: change of the seasonal amplitude inside the window
    - ``noise``: change of the noise scale inside the window
    - ``steps``: a change measured in time steps (period or phase)
    - ``pinned``: window pinned to a constant level; amplitude is that level
      minus the baseline at the window start
    """

    id: str
    direction: str  # up | down | neutral
    persistent: bool  # persistent kinds extend to the end of the series
    amplitude_unit: str
    grounds: tuple[str, ...]
    requires: str | None = None  # "season" | "noise" | None


@dataclass(frozen=True)
class AttributeTaxonomy:
    trend_types: tuple[TrendKind, ...]
    season_types: tuple[SeasonKind, ...]
    noise_types: tuple[NoiseKind, ...]
    fluctuation_types: tuple[FluctuationKind, ...]
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for cat, kinds in self.categories().items():
            for k in kinds:
                if k.id in self._index:
                    raise ValueError(f"duplicate kind id {k.id!r}")
                self._index[k.id] = (cat, k)

    def categories(self) -> dict[str, tuple]:
        return {
            TREND: self.trend_types,
            SEASON: self.season_types,
            NOISE: self.noise_types,
            FLUCT: self.fluctuation_types,
        }

    def ids(self, category: str) -> tuple[str, ...]:
        return tuple(k.id for k in self.categories()[category])

    def kind(self, kind_id: str):
        return self._index[kind_id][1]

    def category_of(self, kind_id: str) -> str:
        return self._index[kind_id][0]

    def __contains__(self, kind_id: str) -> bool:
        return kind_id in self._index

    def fluct(self, kind_id: str) -> FluctuationKind:
        cat, k = self._index[kind_id]
        if cat != FLUCT:
            raise KeyError(f"{kind_id!r} is not a fluctuation kind")
        return k

    def vocab(self, category: str) -> tuple[str, ...]:
        """Label vocabulary for categorical matching: kind ids plus ``none``."""
        ids = self.ids(category)
        return ids if NONE_LABEL in ids else ids + (NONE_LABEL,)


_PF = ("position", "amplitude")
_PDF = ("position", "duration", "amplitude")

_FLUCTUATIONS = (
    FluctuationKind("upward spike", "up", False, "value", _PF),
    FluctuationKind("downward spike", "down", False, "value", _PF),
    FluctuationKind("upward level shift", "up", True, "value", _PF),
    FluctuationKind("downward level shift", "down", True, "value", _PF),
    FluctuationKind("transient rise", "up", False, "value", _PDF),
    FluctuationKind("transient dip", "down", False, "value", _PDF),
    FluctuationKind("convex-shaped elevation", "up", False, "value", _PDF),
    FluctuationKind("concave-shaped depression", "down", False, "value", _PDF),
    FluctuationKind("rapid rise slow decline", "up", False, "value", _PDF),
    FluctuationKind("slow rise rapid decline", "up", False, "value", _PDF),
    FluctuationKind("amplified seasonal amplitude", "up", False, "season", _PDF, "season"),
    FluctuationKind("diminished seasonal amplitude", "down", False, "season", _PDF, "season"),
    FluctuationKind("increased noise segment", "neutral", False, "noise", _PDF, "noise"),
    FluctuationKind("decreased noise segment", "neutral", False, "noise", _PDF, "noise"),
    FluctuationKind("temporary flatline", "neutral", False, "pinned", ("position", "duration")),
    FluctuationKind("gap", "down", False, "pinned", _PDF),
    FluctuationKind("period lengthening", "neutral", True, "steps", _PF, "season"),
    FluctuationKind("phase shift", "neutral", True, "steps", _PF, "season"),
    FluctuationKind("oscillation burst", "neutral", False, "value", _PDF),
)


@functools.lru_cache(maxsize=1)
def registry() -> AttributeTaxonomy:
    """The single, immutable attribute taxonomy."""
    return AttributeTaxonomy(
        trend_types=(
            TrendKind("steady", 0),
            TrendKind("linear increase", 1),
            TrendKind("linear decrease", -1),
            TrendKind("curved", None),
        ),
        season_types=tuple(
            SeasonKind(s)
            for s in (
                "sine",
                "square",
                "triangle",
                "sawtooth",
                "harmonic mixture",
                "amplitude-modulated sine",
                "pulse train",
            )
        ),
        noise_types=(NoiseKind(NONE_LABEL), NoiseKind("gaussian"), NoiseKind("uniform")),
        fluctuation_types=_FLUCTUATIONS,
    )


# --- metric catalog -------------------------------------------------------

DOMAIN_TAGS = ("AIOps", "weather", "finance", "traffic", "IoT", "health")


@dataclass(frozen=True)
class MetricSpec:
    name: str
    domain_tag: str
    low: float
    high: float
    nonneg: bool

    @property
    def value_range_hint(self) -> tuple[float, float]:
        return (self.low, self.high)

    @property
    def span(self) -> float:
        return self.high - self.low

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "domain_tag": self.domain_tag,
            "low": self.low,
            "high": self.high,
            "nonneg": self.nonneg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSpec":
        return cls(d["name"], d["domain_tag"], float(d["low"]), float(d["high"]), bool(d["nonneg"]))


class CatalogError(ValueError):
    pass


_TRUE = {"1", "true", "yes", "y"}
_FALSE = {"0", "false", "no", "n"}


def parse_catalog(text: str, source: str = "<catalog>") -> list[MetricSpec]:
    """Parse ``name,domain_tag,low,high,nonneg`` lines; ``#`` starts a comment."""
    out: list[MetricSpec] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        row = next(csv.reader([line]))
        if len(row) != 5:
            raise CatalogError(f"{source}:{lineno}: expected 5 fields, got {len(row)}")
        name, tag, low_s, high_s, nonneg_s = (c.strip() for c in row)
        if not name:
            raise CatalogError(f"{source}:{lineno}: empty metric name")
        try:
            low, high = float(low_s), float(high_s)
        except ValueError:
            raise CatalogError(f"{source}:{lineno}: low/high must be numbers") from None
        flag = nonneg_s.lower()
        if flag not in _TRUE | _FALSE:
            raise CatalogError(f"{source}:{lineno}: nonneg must be true/false, got {nonneg_s!r}")
        nonneg = flag in _TRUE
        if not low < high:
            raise CatalogError(f"{source}:{lineno}: low must be < high")
        if nonneg and low < 0:
            raise CatalogError(f"{source}:{lineno}: nonneg metric with negative low")
        if name in seen:
            raise CatalogError(
                f"{source}:{lineno}: duplicate metric name {name!r} (first on line {seen[name]})"
            )
        seen[name] = lineno
        out.append(MetricSpec(name, tag, low, high, nonneg))
    if not out:
        raise CatalogError(f"{source}: catalog is empty")
    return out


@functools.lru_cache(maxsize=1)
def _default_catalog() -> tuple[MetricSpec, ...]:
    text = resources.files("tsalign.data").joinpath("metrics.csv").read_text(encoding="utf-8")
    return tuple(parse_catalog(text, "metrics.csv"))


def metric_catalog(source: str | Path | None = None) -> list[MetricSpec]:
    if source is None:
        return list(_default_catalog())
    path = Path(source)
    return parse_catalog(path.read_text(encoding="utf-8"), str(path))
