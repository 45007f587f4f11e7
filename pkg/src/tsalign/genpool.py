"""Attribute pools: the ground-truth record behind every synthetic series.

Sampling happens in a unit value space (metric span = 1) and is mapped into
the metric's ``[low, high]`` hint at the end, shrinking every value-valued
parameter together when the sampled shape would not fit. That keeps rendered
series inside the metric's physical range (nonneg metrics never go below 0)
without distorting relative proportions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Protocol, Sequence

import numpy as np

from .rng import loguniform, make_rng, randint, split_seed
from .taxonomy import (
    FLUCT,
    NOISE,
    NONE_LABEL,
    SEASON,
    TREND,
    AttributeTaxonomy,
    MetricSpec,
    registry,
)

log = logging.getLogger(__name__)

MIN_LENGTH = 64
MAX_LENGTH = 1024
MIN_SEGMENT = 16
MAX_SEGMENTS = 4
MAX_FLUCTUATIONS = 3
FLUCT_GAP = 3  # minimum number of untouched steps between fluctuation windows
MIN_PERIOD = 6
GAUSSIAN_CLIP = 4.0  # gaussian noise is clipped at this many sigmas

SHAREABLE_FLUCTS = (
    "upward spike",
    "downward spike",
    "upward level shift",
    "downward level shift",
    "transient rise",
    "transient dip",
    "convex-shaped elevation",
    "concave-shaped depression",
    "rapid rise slow decline",
    "slow rise rapid decline",
    "oscillation burst",
)

# Amplitude hints in unit space (fractions of the metric span before fitting).
DEFAULT_HINTS: dict[str, tuple[float, float]] = {
    TREND: (0.1, 0.6),  # absolute chord change per non-steady segment
    SEASON: (0.05, 0.3),
    NOISE: (0.003, 0.02),
    "upward spike": (0.25, 0.6),
    "downward spike": (0.25, 0.6),
    "upward level shift": (0.15, 0.4),
    "downward level shift": (0.15, 0.4),
    "transient rise": (0.15, 0.4),
    "transient dip": (0.15, 0.4),
    "convex-shaped elevation": (0.15, 0.45),
    "concave-shaped depression": (0.15, 0.45),
    "rapid rise slow decline": (0.15, 0.45),
    "slow rise rapid decline": (0.15, 0.45),
    "oscillation burst": (0.1, 0.3),
}


# --- pool types -------------------------------------------------------------


@dataclass(frozen=True)
class TrendSegment:
    """Trend over ``[start_idx, end_idx)``.

    value(t) = start_value + slope*x + curvature*x*(x - (L-1)), x = t - start_idx,
    L = end_idx - start_idx. The quadratic term vanishes at both ends, so a
    curved segment matches its linear chord at the first and last index.
    """

    kind: str
    start_idx: int
    end_idx: int
    start_value: float
    slope: float
    curvature: float = 0.0

    @property
    def length(self) -> int:
        return self.end_idx - self.start_idx

    @property
    def end_value(self) -> float:
        """Value at the last index of the segment."""
        return self.start_value + self.slope * (self.length - 1)

    @property
    def slope_sign(self) -> int:
        return int(np.sign(self.slope))


@dataclass(frozen=True)
class SeasonalityAttr:
    kind: str
    period: int
    amplitude: float  # half peak-to-peak
    phase: int
    params: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseAttr:
    kind: str
    scale: float  # gaussian sigma, or uniform half-width; 0 for none

    @property
    def std(self) -> float:
        if self.kind == "uniform":
            return self.scale / math.sqrt(3.0)
        return self.scale

    @property
    def bound(self) -> float:
        """Largest absolute noise value that render can produce."""
        if self.kind == "gaussian":
            return GAUSSIAN_CLIP * self.scale
        return self.scale


@dataclass(frozen=True)
class LocalFluctuation:
    kind: str
    position: int
    duration: int
    amplitude: float

    @property
    def end(self) -> int:
        return self.position + self.duration


@dataclass(frozen=True)
class AttributePool:
    id: str
    metric: MetricSpec
    length: int
    trend: tuple[TrendSegment, ...]
    seasonality: SeasonalityAttr | None
    noise: NoiseAttr
    fluctuations: tuple[LocalFluctuation, ...]
    generation_seed: int

    def kinds(self, category: str) -> list[str]:
        """Kinds present for one category, in order of appearance, deduplicated."""
        if category == TREND:
            found = [s.kind for s in self.trend]
        elif category == SEASON:
            found = [self.seasonality.kind] if self.seasonality else [NONE_LABEL]
        elif category == NOISE:
            found = [self.noise.kind]
        elif category == FLUCT:
            found = [f.kind for f in self.fluctuations] or [NONE_LABEL]
        else:
            raise KeyError(category)
        return list(dict.fromkeys(found))

    def trend_directions(self) -> list[int]:
        """Slope signs of consecutive segments with repeated signs merged."""
        out: list[int] = []
        for s in self.trend:
            if not out or out[-1] != s.slope_sign:
                out.append(s.slope_sign)
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "metric": self.metric.to_dict(),
            "length": self.length,
            "trend": [
                {
                    "kind": s.kind,
                    "start_idx": s.start_idx,
                    "end_idx": s.end_idx,
                    "start_value": s.start_value,
                    "slope": s.slope,
                    "curvature": s.curvature,
                }
                for s in self.trend
            ],
            "seasonality": None
            if self.seasonality is None
            else {
                "kind": self.seasonality.kind,
                "period": self.seasonality.period,
                "amplitude": self.seasonality.amplitude,
                "phase": self.seasonality.phase,
                "params": _plain(self.seasonality.params),
            },
            "noise": {"kind": self.noise.kind, "scale": self.noise.scale},
            "fluctuations": [
                {
                    "kind": f.kind,
                    "position": f.position,
                    "duration": f.duration,
                    "amplitude": f.amplitude,
                }
                for f in self.fluctuations
            ],
            "generation_seed": self.generation_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributePool":
        season = d["seasonality"]
        return cls(
            id=d["id"],
            metric=MetricSpec.from_dict(d["metric"]),
            length=int(d["length"]),
            trend=tuple(
                TrendSegment(
                    s["kind"],
                    int(s["start_idx"]),
                    int(s["end_idx"]),
                    float(s["start_value"]),
                    float(s["slope"]),
                    float(s.get("curvature", 0.0)),
                )
                for s in d["trend"]
            ),
            seasonality=None
            if season is None
            else SeasonalityAttr(
                season["kind"],
                int(season["period"]),
                float(season["amplitude"]),
                int(season["phase"]),
                dict(season.get("params", {})),
            ),
            noise=NoiseAttr(d["noise"]["kind"], float(d["noise"]["scale"])),
            fluctuations=tuple(
                LocalFluctuation(f["kind"], int(f["position"]), int(f["duration"]), float(f["amplitude"]))
                for f in d["fluctuations"]
            ),
            generation_seed=int(d["generation_seed"]),
        )


def _plain(obj):
    if isinstance(obj, Mapping):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def pool_id(seed: int) -> str:
    return f"pool-{seed:016x}"


def validate_pool(pool: AttributePool, taxonomy: AttributeTaxonomy | None = None) -> list[str]:
    """Structural invariant check; returns human-readable violations."""
    tax = taxonomy or registry()
    problems: list[str] = []
    n = pool.length
    if not MIN_LENGTH <= n <= MAX_LENGTH:
        problems.append(f"length {n} outside [{MIN_LENGTH}, {MAX_LENGTH}]")
    if not pool.trend:
        problems.append("no trend segments")
    expected_start = 0
    for i, s in enumerate(pool.trend):
        if s.kind not in tax.ids(TREND):
            problems.append(f"segment {i}: unknown trend kind {s.kind!r}")
        if s.start_idx != expected_start:
            problems.append(f"segment {i}: starts at {s.start_idx}, expected {expected_start}")
        if not s.start_idx < s.end_idx:
            problems.append(f"segment {i}: empty")
        direction = tax.kind(s.kind).direction if s.kind in tax else None
        if direction is not None and s.slope_sign != direction:
            problems.append(f"segment {i}: slope sign {s.slope_sign} contradicts {s.kind}")
        if s.kind == "curved" and s.slope == 0:
            problems.append(f"segment {i}: curved segment with zero chord slope")
        if s.kind != "curved" and s.curvature != 0:
            problems.append(f"segment {i}: curvature on a {s.kind} segment")
        expected_start = s.end_idx
    if pool.trend and expected_start != n:
        problems.append(f"trend segments end at {expected_start}, length is {n}")
    se = pool.seasonality
    if se is not None:
        if se.kind not in tax.ids(SEASON):
            problems.append(f"unknown season kind {se.kind!r}")
        if se.period < 4 or se.period > n // 2:
            problems.append(f"period {se.period} outside [4, {n // 2}]")
        if se.amplitude < 0:
            problems.append("negative seasonal amplitude")
        if not 0 <= se.phase < se.period:
            problems.append(f"phase {se.phase} outside [0, {se.period})")
    if pool.noise.kind not in tax.ids(NOISE):
        problems.append(f"unknown noise kind {pool.noise.kind!r}")
    elif (pool.noise.kind == NONE_LABEL) != (pool.noise.scale == 0):
        problems.append("noise scale must be 0 exactly when noise kind is none")
    elif pool.noise.scale < 0:
        problems.append("negative noise scale")
    windows = []
    persistent = 0
    for j, f in enumerate(pool.fluctuations):
        if f.kind not in tax.ids(FLUCT):
            problems.append(f"fluctuation {j}: unknown kind {f.kind!r}")
            continue
        fk = tax.fluct(f.kind)
        if f.duration < 1 or f.position < 0 or f.end > n:
            problems.append(f"fluctuation {j}: window [{f.position}, {f.end}) outside [0, {n})")
        if fk.persistent:
            persistent += 1
            if f.end != n:
                problems.append(f"fluctuation {j}: persistent kind must extend to the end")
        if fk.requires == "season" and se is None:
            problems.append(f"fluctuation {j}: {f.kind} requires seasonality")
        if fk.requires == "noise" and pool.noise.kind == NONE_LABEL:
            problems.append(f"fluctuation {j}: {f.kind} requires noise")
        if fk.amplitude_unit == "noise" and pool.noise.scale + f.amplitude <= 0:
            problems.append(f"fluctuation {j}: noise scale would become non-positive")
        if fk.amplitude_unit == "steps" and f.kind == "period lengthening" and f.amplitude < 1:
            problems.append(f"fluctuation {j}: period lengthening must be >= 1 step")
        windows.append((f.position, f.end, j))
    if persistent > 1:
        problems.append("more than one persistent fluctuation")
    if len(pool.fluctuations) > MAX_FLUCTUATIONS:
        problems.append(f"{len(pool.fluctuations)} fluctuations (max {MAX_FLUCTUATIONS})")
    windows.sort()
    for (s0, e0, j0), (s1, e1, j1) in zip(windows, windows[1:]):
        if s1 < e0:
            problems.append(f"fluctuations {j0} and {j1} overlap")
    return problems


# --- attribute subsets ------------------------------------------------------


@dataclass(frozen=True)
class AttributeSubset:
    metric: MetricSpec
    trend_kinds: tuple[str, ...]
    season_kinds: tuple[str, ...]
    noise_kinds: tuple[str, ...]
    fluct_kinds: tuple[str, ...]
    season_probability: float = 0.7
    amplitude_hints: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_HINTS)
    )
    position_range: tuple[float, float] = (0.0, 1.0)
    notes: tuple[str, ...] = ()

    def hint(self, key: str) -> tuple[float, float]:
        return tuple(self.amplitude_hints.get(key, DEFAULT_HINTS[key]))

    def problems(self, taxonomy: AttributeTaxonomy | None = None) -> list[str]:
        tax = taxonomy or registry()
        out = []
        for cat, kinds in (
            (TREND, self.trend_kinds),
            (SEASON, self.season_kinds),
            (NOISE, self.noise_kinds),
            (FLUCT, self.fluct_kinds),
        ):
            allowed = set(tax.ids(cat))
            for k in kinds:
                if k not in allowed:
                    out.append(f"{k!r} is not a {cat} kind")
        if not self.trend_kinds:
            out.append("no trend kind allowed")
        if not self.noise_kinds:
            out.append("no noise kind allowed")
        if not 0.0 <= self.season_probability <= 1.0:
            out.append("season_probability outside [0, 1]")
        for key, (lo, hi) in self.amplitude_hints.items():
            if not 0 < lo <= hi:
                out.append(f"bad amplitude hint for {key!r}: ({lo}, {hi})")
        lo, hi = self.position_range
        if not 0.0 <= lo < hi <= 1.0:
            out.append(f"bad position range {self.position_range}")
        return out


class SubsetSelector(Protocol):
    def propose(self, metric: MetricSpec, taxonomy: AttributeTaxonomy) -> AttributeSubset: ...


# keyword -> (season_probability, preferred season kinds or None for all,
#             preferred fluctuation kinds or None for all)
_SPIKY = (
    "upward spike",
    "downward spike",
    "upward level shift",
    "downward level shift",
    "transient rise",
    "transient dip",
    "rapid rise slow decline",
    "slow rise rapid decline",
    "gap",
    "temporary flatline",
)
_KEYWORD_RULES: tuple[tuple[tuple[str, ...], float, tuple[str, ...] | None], ...] = (
    (("temperature", "humidity", "radiation", "solar", "dew_point", "light"), 0.95, ("sine", "harmonic mixture", "amplitude-modulated sine", "triangle")),
    (("count", "errors", "failures", "requests", "qps", "rentals", "sessions", "transactions"), 0.6, None),
    (("latency", "delay", "wait", "pause"), 0.4, None),
    (("price", "balance", "value", "market_cap", "exchange_rate", "revenue"), 0.2, None),
    (("traffic", "vehicle", "passenger", "occupancy", "speed", "ride"), 0.9, None),
)


class RuleBasedSelector:
    """Offline keyword-table selector.

    All four trend kinds and all noise kinds are always allowed; seasonality
    probability and preferred season shapes depend on the metric name.
    """

    def propose(self, metric: MetricSpec, taxonomy: AttributeTaxonomy) -> AttributeSubset:
        name = metric.name.lower()
        season_p = 0.7
        seasons: tuple[str, ...] = taxonomy.ids(SEASON)
        for keywords, p, preferred in _KEYWORD_RULES:
            if any(k in name for k in keywords):
                season_p = p
                if preferred is not None:
                    seasons = preferred
                break
        return AttributeSubset(
            metric=metric,
            trend_kinds=taxonomy.ids(TREND),
            season_kinds=seasons,
            noise_kinds=taxonomy.ids(NOISE),
            fluct_kinds=taxonomy.ids(FLUCT),
            season_probability=season_p,
        )


def full_subset(metric: MetricSpec, taxonomy: AttributeTaxonomy | None = None) -> AttributeSubset:
    """Every kind allowed; used for coverage studies."""
    tax = taxonomy or registry()
    return AttributeSubset(
        metric=metric,
        trend_kinds=tax.ids(TREND),
        season_kinds=tax.ids(SEASON),
        noise_kinds=tax.ids(NOISE),
        fluct_kinds=tax.ids(FLUCT),
    )


def _sanitize(subset: AttributeSubset, metric: MetricSpec, tax: AttributeTaxonomy) -> AttributeSubset:
    def keep(kinds, cat):
        allowed = tax.ids(cat)
        return tuple(k for k in allowed if k in set(kinds))

    hints = {}
    for key, (lo, hi) in dict(subset.amplitude_hints).items():
        if key not in DEFAULT_HINTS:
            continue
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0 or hi < lo:
            continue
        hints[key] = (min(max(lo, 1e-4), 1.0), min(max(hi, 1e-4), 1.0))
    lo, hi = subset.position_range
    if not 0.0 <= lo < hi <= 1.0 or hi - lo < 0.2:
        lo, hi = 0.0, 1.0
    return AttributeSubset(
        metric=metric,
        trend_kinds=keep(subset.trend_kinds, TREND),
        season_kinds=keep(subset.season_kinds, SEASON),
        noise_kinds=keep(subset.noise_kinds, NOISE),
        fluct_kinds=keep(subset.fluct_kinds, FLUCT),
        season_probability=min(max(float(subset.season_probability), 0.0), 1.0),
        amplitude_hints={**DEFAULT_HINTS, **hints},
        position_range=(lo, hi),
        notes=subset.notes,
    )


def select_subset(
    metric: MetricSpec,
    selector: SubsetSelector | None = None,
    taxonomy: AttributeTaxonomy | None = None,
) -> AttributeSubset:
    """Ask ``selector`` for a subset, then validate and sanitize it.

    Unknown kinds are dropped and hints clamped. A proposal that is still
    invalid (no trend or noise kind left, or the selector raised) is replaced
    by the rule-based default and the reason recorded in ``notes``.
    """
    tax = taxonomy or registry()
    default = RuleBasedSelector()
    selector = selector or default
    try:
        proposal = selector.propose(metric, tax)
        subset = _sanitize(proposal, metric, tax)
        problems = subset.problems(tax)
    except Exception as exc:  # selectors may be remote; any failure falls back
        problems = [f"selector failed: {exc}"]
    if problems:
        msg = f"subset for {metric.name} rejected ({'; '.join(problems)}); using rule-based default"
        log.warning(msg)
        subset = default.propose(metric, tax)
        subset = replace(subset, notes=subset.notes + (msg,))
    return subset


# --- sampling ---------------------------------------------------------------


@dataclass
class _Draft:
    """Mutable unit-space draft used while sampling."""

    length: int
    trend: list[TrendSegment]
    season: SeasonalityAttr | None
    noise: NoiseAttr
    flucts: list[LocalFluctuation]


def _check_length(length: int) -> None:
    if not isinstance(length, (int, np.integer)) or not MIN_LENGTH <= length <= MAX_LENGTH:
        raise ValueError(f"length must be an integer in [{MIN_LENGTH}, {MAX_LENGTH}], got {length!r}")


def _segment_bounds(rng, n: int) -> list[tuple[int, int]]:
    k_max = min(MAX_SEGMENTS, n // MIN_SEGMENT)
    k = randint(rng, 1, k_max)
    spare = n - k * MIN_SEGMENT
    props = rng.dirichlet(np.full(k, 2.0))
    extra = np.floor(props * spare).astype(int)
    extra[-1] += spare - int(extra.sum())
    bounds, start = [], 0
    for e in extra:
        end = start + MIN_SEGMENT + int(e)
        bounds.append((start, end))
        start = end
    return bounds


def _trend_from_template(template, scale: float) -> list[TrendSegment]:
    """Chain segments so each starts where the previous chord would continue."""
    out, level = [], 0.0
    for kind, s, e, slope, curv in template:
        out.append(TrendSegment(kind, s, e, level, slope * scale, curv * scale))
        level += slope * scale * (e - s)
    return out


def _sample_trend_template(rng, subset: AttributeSubset, n: int):
    lo, hi = subset.hint(TREND)
    template = []
    for s, e in _segment_bounds(rng, n):
        kind = subset.trend_kinds[int(rng.integers(len(subset.trend_kinds)))]
        L = e - s
        slope = curv = 0.0
        if kind != "steady":
            change = loguniform(rng, lo, hi)
            if kind == "linear increase":
                sign = 1.0
            elif kind == "linear decrease":
                sign = -1.0
            else:
                sign = 1.0 if rng.random() < 0.5 else -1.0
            slope = sign * change / L
            if kind == "curved":
                # |curvature|*(L-1) <= |slope| keeps the segment monotone
                bend = 1.0 if rng.random() < 0.5 else -1.0
                curv = bend * rng.uniform(0.3, 0.9) * abs(slope) / (L - 1)
        template.append((kind, s, e, slope, curv))
    return template


def _sample_season(rng, subset: AttributeSubset, n: int) -> SeasonalityAttr | None:
    if not subset.season_kinds or rng.random() >= subset.season_probability:
        return None
    kind = subset.season_kinds[int(rng.integers(len(subset.season_kinds)))]
    period = int(round(loguniform(rng, MIN_PERIOD, max(MIN_PERIOD, n // 3))))
    period = max(MIN_PERIOD, min(period, n // 3))
    amp = loguniform(rng, *subset.hint(SEASON))
    phase = randint(rng, 0, period - 1)
    params: dict = {}
    if kind == "harmonic mixture":
        n_h = randint(rng, 2, 3)
        orders = [1] + sorted(int(k) for k in rng.choice([2, 3, 4], size=n_h - 1, replace=False))
        weights = [1.0] + [float(rng.uniform(0.2, 0.5)) for _ in orders[1:]]
        phases = [float(rng.uniform(0, 2 * math.pi)) for _ in orders]
        grid = np.arange(4096) / 4096.0
        mix = sum(w * np.sin(2 * math.pi * k * grid + p) for k, w, p in zip(orders, weights, phases))
        params = {
            "harmonics": [[k, w, p] for k, w, p in zip(orders, weights, phases)],
            "norm": float(np.max(np.abs(mix))),
        }
    elif kind == "amplitude-modulated sine":
        params = {"depth": float(rng.uniform(0.2, 0.4)), "cycles": randint(rng, 6, 10)}
    elif kind == "pulse train":
        params = {"duty": float(rng.uniform(0.1, 0.3))}
    return SeasonalityAttr(kind, period, amp, phase, params)


def _sample_noise(rng, subset: AttributeSubset) -> NoiseAttr:
    kind = subset.noise_kinds[int(rng.integers(len(subset.noise_kinds)))]
    if kind == NONE_LABEL:
        return NoiseAttr(kind, 0.0)
    sigma = loguniform(rng, *subset.hint(NOISE))
    return NoiseAttr(kind, sigma * math.sqrt(3.0) if kind == "uniform" else sigma)


def _duration_range(kind: str, n: int, season: SeasonalityAttr | None) -> tuple[int, int]:
    if kind in ("upward spike", "downward spike"):
        return 1, 1
    if kind in ("transient rise", "transient dip"):
        return 3, 12
    if kind in ("convex-shaped elevation", "concave-shaped depression"):
        return 7, max(7, min(41, n // 6))
    if kind in ("rapid rise slow decline", "slow rise rapid decline"):
        return 8, max(8, min(40, n // 6))
    if kind in ("amplified seasonal amplitude", "diminished seasonal amplitude"):
        return season.period, max(season.period, min(3 * season.period, n // 3))
    if kind in ("increased noise segment", "decreased noise segment"):
        return 16, max(16, n // 5)
    if kind == "temporary flatline":
        return 4, 12
    if kind == "gap":
        return 3, 10
    if kind == "oscillation burst":
        return 6, 20
    raise KeyError(kind)


def _persistent_positions(kind, amplitude, n, season) -> tuple[int, int]:
    if kind in ("upward level shift", "downward level shift"):
        return int(0.2 * n), int(0.8 * n)
    P = season.period
    lo = 2 * P + 4
    if kind == "period lengthening":
        return lo, n - 2 * (P + int(amplitude))
    return lo, n - P - 2  # phase shift


def _free_positions(n, dur, windows, lo, hi) -> np.ndarray:
    ok = np.zeros(n, dtype=bool)
    lo, hi = max(lo, 0), min(hi, n - dur)
    if hi < lo:
        return np.empty(0, dtype=int)
    ok[lo : hi + 1] = True
    for s, e in windows:
        # [p, p+dur) must keep FLUCT_GAP untouched steps from [s, e)
        a = max(0, s - FLUCT_GAP - dur + 1)
        b = min(n, e + FLUCT_GAP)
        ok[a:b] = False
    return np.flatnonzero(ok)


def _sample_amplitude(rng, kind, subset, season, noise) -> float:
    fk = registry().fluct(kind)
    if fk.amplitude_unit == "value":
        a = loguniform(rng, *subset.hint(kind))
        if fk.direction == "down":
            a = -a
        return a
    if kind == "amplified seasonal amplitude":
        return season.amplitude * rng.uniform(0.5, 1.5)
    if kind == "diminished seasonal amplitude":
        return -season.amplitude * rng.uniform(0.4, 0.9)
    if kind == "increased noise segment":
        return noise.scale * rng.uniform(1.0, 3.0)
    if kind == "decreased noise segment":
        return -noise.scale * rng.uniform(0.5, 0.9)
    if kind == "period lengthening":
        P = season.period
        return float(randint(rng, max(2, P // 4), max(2, (3 * P) // 4)))
    if kind == "phase shift":
        P = season.period
        return float(randint(rng, max(1, P // 4), max(1, (3 * P) // 4)))
    return 0.0  # pinned kinds; gap depth is fixed after range fitting


def _applicable(kind, season, noise, has_persistent) -> bool:
    fk = registry().fluct(kind)
    if fk.requires == "season" and season is None:
        return False
    if fk.requires == "noise" and noise.kind == NONE_LABEL:
        return False
    if fk.persistent and has_persistent:
        return False
    return True


def _place_fluct(rng, kind, amplitude, n, windows, has_persistent, season, subset, forced=None):
    fk = registry().fluct(kind)
    plo = int(subset.position_range[0] * n)
    phi = int(math.ceil(subset.position_range[1] * n))
    if forced is not None:
        pos, dur = forced
        return (pos, n - pos) if fk.persistent else (pos, dur)
    if fk.persistent:
        lo, hi = _persistent_positions(kind, amplitude, n, season)
        lo, hi = max(lo, plo), min(hi, phi)
        if windows:
            lo = max(lo, max(e for _, e in windows) + FLUCT_GAP)
        if hi < lo:
            return None
        pos = randint(rng, lo, hi)
        return pos, n - pos
    dmin, dmax = _duration_range(kind, n, season)
    dur = randint(rng, dmin, dmax)
    if kind in ("convex-shaped elevation", "concave-shaped depression") and dur % 2 == 0:
        dur -= 1
    free = list(windows)
    if has_persistent is not None:
        free.append((has_persistent, n))
    cands = _free_positions(n, dur, free, max(2, plo), min(n - dur - 2, phi - dur))
    if cands.size == 0:
        return None
    return int(cands[int(rng.integers(cands.size))]), dur


def _sample_draft(
    rng,
    subset: AttributeSubset,
    n: int,
    trend_template=None,
    trend_scale: float = 1.0,
    forced_fluct: tuple[str, int, int] | None = None,
) -> _Draft:
    template = trend_template or _sample_trend_template(rng, subset, n)
    trend = _trend_from_template(template, trend_scale)
    season = _sample_season(rng, subset, n)
    noise = _sample_noise(rng, subset)

    flucts: list[LocalFluctuation] = []
    windows: list[tuple[int, int]] = []
    persistent_pos: int | None = None

    def add(kind, forced=None):
        nonlocal persistent_pos
        amp = _sample_amplitude(rng, kind, subset, season, noise)
        placed = _place_fluct(rng, kind, amp, n, windows, persistent_pos, season, subset, forced)
        if placed is None:
            return
        pos, dur = placed
        flucts.append(LocalFluctuation(kind, pos, dur, float(amp)))
        if registry().fluct(kind).persistent:
            persistent_pos = pos
        else:
            windows.append((pos, pos + dur))

    if forced_fluct is not None:
        kind, pos, dur = forced_fluct
        add(kind, (pos, dur))
    count = randint(rng, 0, MAX_FLUCTUATIONS) - len(flucts)
    for _ in range(max(count, 0)):
        options = [
            k for k in subset.fluct_kinds if _applicable(k, season, noise, persistent_pos is not None)
        ]
        if not options:
            break
        add(options[int(rng.integers(len(options)))])
    flucts.sort(key=lambda f: f.position)
    return _Draft(n, trend, season, noise, flucts)


def _max_noise_factor(draft: _Draft) -> float:
    factor = 1.0
    for f in draft.flucts:
        if f.kind == "increased noise segment":
            factor = max(factor, (draft.noise.scale + f.amplitude) / draft.noise.scale)
    return factor


def _fit_to_metric(rng, draft: _Draft, metric: MetricSpec, seed: int) -> AttributePool:
    from .synth import render_noise_free, trend_and_season

    unit_metric = MetricSpec(metric.name, metric.domain_tag, 0.0, 1.0, False)
    unit_pool = AttributePool(
        pool_id(seed), unit_metric, draft.length, tuple(draft.trend), draft.season,
        draft.noise, tuple(draft.flucts), seed,
    )
    clean = render_noise_free(unit_pool, pin=False)
    u_min, u_max = float(clean.min()), float(clean.max())
    b = draft.noise.bound * _max_noise_factor(draft)
    has_gap = any(f.kind == "gap" for f in draft.flucts)
    reserve = 0.1 if has_gap else 0.0
    extent = (u_max - u_min) + 2 * b
    f = 1.0 if extent <= 0 else min(1.0, (1.0 - reserve) / extent)
    o_lo = reserve - f * (u_min - b)
    o_hi = 1.0 - f * (u_max + b)
    offset = o_lo if o_hi <= o_lo else float(rng.uniform(o_lo, o_hi))

    span, low = metric.span, metric.low
    k = span * f

    trend = tuple(
        TrendSegment(s.kind, s.start_idx, s.end_idx, low + span * (offset + f * s.start_value),
                     s.slope * k, s.curvature * k)
        for s in draft.trend
    )
    season = None
    if draft.season is not None:
        season = replace(draft.season, amplitude=draft.season.amplitude * k)
    noise = NoiseAttr(draft.noise.kind, draft.noise.scale * k)
    flucts = []
    for fl in draft.flucts:
        unit = registry().fluct(fl.kind).amplitude_unit
        amp = fl.amplitude if unit == "steps" else fl.amplitude * k
        flucts.append(replace(fl, amplitude=amp))
    pool = AttributePool(pool_id(seed), metric, draft.length, trend, season, noise, tuple(flucts), seed)

    if has_gap:
        base = trend_and_season(pool)
        flucts = [
            replace(fl, amplitude=float(low - base[fl.position])) if fl.kind == "gap" else fl
            for fl in pool.fluctuations
        ]
        pool = replace(pool, fluctuations=tuple(flucts))
    return pool


def sample_pool(subset: AttributeSubset, length: int, seed: int) -> AttributePool:
    """Sample a pool from ``subset``; a pure function of its arguments."""
    _check_length(length)
    rng = make_rng(split_seed(seed, "pool"))
    draft = _sample_draft(rng, subset, int(length))
    return _fit_to_metric(rng, draft, subset.metric, seed)


# --- correlated groups ------------------------------------------------------

SHAPE = "shape"
LOCAL = "local"


@dataclass(frozen=True)
class CorrelationPool:
    group_id: str
    kind: str  # shape | local
    member_ids: tuple[str, ...]
    relation: Mapping

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "kind": self.kind,
            "member_ids": list(self.member_ids),
            "relation": _plain(self.relation),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CorrelationPool":
        return cls(d["group_id"], d["kind"], tuple(d["member_ids"]), dict(d["relation"]))


def has_relation(pool: AttributePool, kind: str, relation: Mapping) -> bool:
    """Whether ``pool`` satisfies a correlation relation on its own."""
    if kind == SHAPE:
        return pool.trend_directions() == list(relation["trend_directions"])
    if kind == LOCAL:
        return any(
            f.kind == relation["fluct_kind"] and f.position == relation["position"]
            for f in pool.fluctuations
        )
    raise ValueError(f"unknown correlation kind {kind!r}")


def verify_correlation(corr: CorrelationPool, pools: Mapping[str, AttributePool]) -> list[str]:
    """Re-check every relation fact of ``corr`` against member pools."""
    problems = []
    if len(corr.member_ids) < 2:
        problems.append("correlation group has fewer than 2 members")
    lengths = set()
    for mid in corr.member_ids:
        pool = pools.get(mid)
        if pool is None:
            problems.append(f"member {mid} missing")
            continue
        lengths.add(pool.length)
        if not has_relation(pool, corr.kind, corr.relation):
            problems.append(f"member {mid} does not satisfy {corr.kind} relation {dict(corr.relation)}")
    if len(lengths) > 1:
        problems.append("members have different lengths")
    return problems


def _as_subsets(subset, size) -> list[AttributeSubset]:
    if isinstance(subset, AttributeSubset):
        return [subset] * size
    subsets = list(subset)
    if len(subsets) != size:
        raise ValueError(f"expected {size} subsets, got {len(subsets)}")
    return subsets


def build_correlation_group(
    kind: str,
    size: int,
    subset: AttributeSubset | Sequence[AttributeSubset],
    length: int,
    seed: int,
) -> tuple[CorrelationPool, list[AttributePool]]:
    """Sample ``size`` pools sharing a trend shape (``shape``) or a co-located
    fluctuation (``local``). ``subset`` may be one subset or one per member."""
    if kind not in (SHAPE, LOCAL):
        raise ValueError(f"unknown correlation kind {kind!r}")
    if not 2 <= size <= 16:
        raise ValueError(f"group size must be in [2, 16], got {size}")
    _check_length(length)
    subsets = _as_subsets(subset, size)
    rng = make_rng(split_seed(seed, "group"))
    member_seeds = [split_seed(seed, "member", i) for i in range(size)]
    pools = []
    if kind == SHAPE:
        template = _sample_trend_template(rng, subsets[0], length)
        if all(t[0] == "steady" for t in template):
            # an all-steady shape carries no information; force one change
            k, s, e, _, _ = template[-1]
            template[-1] = ("linear increase", s, e, 0.3 / (e - s), 0.0)
        for sub, ms in zip(subsets, member_seeds):
            mrng = make_rng(split_seed(ms, "pool"))
            draft = _sample_draft(mrng, sub, length, template, float(rng.uniform(0.5, 2.0)))
            pools.append(_fit_to_metric(mrng, draft, sub.metric, ms))
        relation = {"trend_directions": pools[0].trend_directions()}
    else:
        allowed = set(SHAREABLE_FLUCTS)
        for sub in subsets:
            allowed &= set(sub.fluct_kinds)
        options = [k for k in SHAREABLE_FLUCTS if k in allowed] or ["upward spike"]
        fkind = options[int(rng.integers(len(options)))]
        fk = registry().fluct(fkind)
        if fk.persistent:
            pos, dur = randint(rng, int(0.3 * length), int(0.7 * length)), 0
        else:
            dmin, dmax = _duration_range(fkind, length, None)
            dur = randint(rng, dmin, dmax)
            if fkind in ("convex-shaped elevation", "concave-shaped depression") and dur % 2 == 0:
                dur -= 1
            pos = randint(rng, int(0.15 * length), int(0.85 * length) - dur)
        for sub, ms in zip(subsets, member_seeds):
            mrng = make_rng(split_seed(ms, "pool"))
            draft = _sample_draft(mrng, sub, length, forced_fluct=(fkind, pos, dur))
            pools.append(_fit_to_metric(mrng, draft, sub.metric, ms))
        relation = {"fluct_kind": fkind, "position": pos}
    corr = CorrelationPool(
        group_id=f"group-{seed:016x}",
        kind=kind,
        member_ids=tuple(p.id for p in pools),
        relation=relation,
    )
    return corr, pools


def sample_unrelated_pool(
    subset: AttributeSubset,
    length: int,
    seed: int,
    avoid: Sequence[CorrelationPool],
    max_tries: int = 50,
) -> AttributePool:
    """Sample a pool that satisfies none of the ``avoid`` relations."""
    for attempt in range(max_tries):
        s = seed if attempt == 0 else split_seed(seed, "retry", attempt)
        pool = sample_pool(subset, length, s)
        if not any(has_relation(pool, c.kind, c.relation) for c in avoid):
            return pool
    raise RuntimeError(f"could not sample an unrelated pool after {max_tries} tries")
