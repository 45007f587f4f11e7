"""Render pools into value arrays, min-max normalize them, and verify them.

Rendering is vectorised numpy. ``verify`` deliberately does not reuse any of
the rendering code: it rebuilds a noise-free reference point by point with
``math`` and measures each attribute from the array (least-squares fits,
autocorrelation, profile projection, local argmax).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .genpool import GAUSSIAN_CLIP, AttributePool, LocalFluctuation
from .rng import make_rng, split_seed
from .taxonomy import NONE_LABEL, registry

TWO_PI = 2.0 * math.pi


@dataclass
class TimeSeries:
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self):
        return len(self.values)


@dataclass
class NormalizedSeries:
    values: np.ndarray
    value_scaling: float
    value_offset: float
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


# --- rendering ------------------------------------------------------------


def trend_component(pool: AttributePool) -> np.ndarray:
    out = np.empty(pool.length)
    for s in pool.trend:
        x = np.arange(s.length, dtype=float)
        out[s.start_idx : s.end_idx] = (
            s.start_value + s.slope * x + s.curvature * x * (x - (s.length - 1))
        )
    return out


def _persistent_season_change(pool: AttributePool) -> LocalFluctuation | None:
    for f in pool.fluctuations:
        if f.kind in ("period lengthening", "phase shift"):
            return f
    return None


def cycle_fraction(pool: AttributePool, modified: bool = True) -> np.ndarray:
    """Position inside the seasonal cycle, in [0, 1), for every index."""
    se = pool.seasonality
    t = np.arange(pool.length)
    frac = ((t + se.phase) % se.period) / se.period
    change = _persistent_season_change(pool) if modified else None
    if change is not None:
        tail = t[change.position :]
        if change.kind == "phase shift":
            shift = int(change.amplitude)
            frac[change.position :] = ((tail + se.phase - shift) % se.period) / se.period
        else:
            new_period = se.period + int(change.amplitude)
            start = ((change.position + se.phase) % se.period) / se.period
            frac[change.position :] = (
                start + ((tail - change.position) % new_period) / new_period
            ) % 1.0
    return frac


def season_shape(kind: str, params, frac: np.ndarray, t: np.ndarray, period: int) -> np.ndarray:
    if kind == "sine":
        return np.sin(TWO_PI * frac)
    if kind == "square":
        return np.where(frac < 0.5, 1.0, -1.0)
    if kind == "triangle":
        return 4.0 * np.abs(frac - 0.5) - 1.0
    if kind == "sawtooth":
        return 2.0 * frac - 1.0
    if kind == "harmonic mixture":
        mix = np.zeros_like(frac, dtype=float)
        for k, w, p in params["harmonics"]:
            mix += w * np.sin(TWO_PI * k * frac + p)
        return mix / params["norm"]
    if kind == "amplitude-modulated sine":
        depth, cycles = params["depth"], params["cycles"]
        envelope = (1.0 + depth * np.sin(TWO_PI * t / (cycles * period))) / (1.0 + depth)
        return np.sin(TWO_PI * frac) * envelope
    if kind == "pulse train":
        return np.where(frac < params["duty"], 1.0, -1.0)
    raise KeyError(kind)


def season_component(pool: AttributePool, modified: bool = True) -> np.ndarray:
    se = pool.seasonality
    if se is None:
        return np.zeros(pool.length)
    t = np.arange(pool.length, dtype=float)
    frac = cycle_fraction(pool, modified)
    return se.amplitude * season_shape(se.kind, se.params, frac, t, se.period)


def trend_and_season(pool: AttributePool) -> np.ndarray:
    """Noise-free baseline that fluctuation amplitudes are measured against."""
    return trend_component(pool) + season_component(pool, modified=False)


def value_profile(kind: str, duration: int) -> np.ndarray:
    """Unit-peak shape of an additive fluctuation over its window."""
    d = duration
    j = np.arange(d, dtype=float)
    if kind in ("upward spike", "downward spike", "upward level shift", "downward level shift",
                "transient rise", "transient dip"):
        return np.ones(d)
    if kind in ("convex-shaped elevation", "concave-shaped depression"):
        return np.sin(math.pi * (j + 1) / (d + 1))
    if kind in ("rapid rise slow decline", "slow rise rapid decline"):
        peak = max(1, d // 5)
        p = np.where(j <= peak, j / peak, (d - j) / (d - peak))
        return p if kind == "rapid rise slow decline" else p[::-1].copy()
    if kind == "oscillation burst":
        return np.where(j % 2 == 0, 1.0, -1.0)
    raise KeyError(kind)


def _pinned(pool: AttributePool) -> list[LocalFluctuation]:
    tax = registry()
    return [f for f in pool.fluctuations if tax.fluct(f.kind).amplitude_unit == "pinned"]


def render_noise_free(pool: AttributePool, pin: bool = True) -> np.ndarray:
    tax = registry()
    trend = trend_component(pool)
    plain = season_component(pool, modified=False)
    values = trend + season_component(pool, modified=True)
    for f in pool.fluctuations:
        unit = tax.fluct(f.kind).amplitude_unit
        w = slice(f.position, f.end)
        if unit == "value":
            values[w] += f.amplitude * value_profile(f.kind, f.duration)
        elif unit == "season":
            values[w] += (f.amplitude / pool.seasonality.amplitude) * plain[w]
    if pin:
        base = trend + plain
        for f in _pinned(pool):
            values[f.position : f.end] = base[f.position] + f.amplitude
    return values


def noise_component(pool: AttributePool) -> np.ndarray:
    nz = pool.noise
    n = pool.length
    if nz.kind == NONE_LABEL:
        return np.zeros(n)
    rng = make_rng(split_seed(pool.generation_seed, "noise"))
    if nz.kind == "gaussian":
        raw = np.clip(rng.standard_normal(n), -GAUSSIAN_CLIP, GAUSSIAN_CLIP)
    else:
        raw = rng.uniform(-1.0, 1.0, n)
    scale = np.full(n, nz.scale)
    for f in pool.fluctuations:
        if registry().fluct(f.kind).amplitude_unit == "noise":
            scale[f.position : f.end] = nz.scale + f.amplitude
    for f in _pinned(pool):
        scale[f.position : f.end] = 0.0
    return raw * scale


def render(pool: AttributePool) -> TimeSeries:
    """Values = trend + seasonality + fluctuation overlays + noise.

    Pinned windows (flatline, gap) hold a constant level and carry no noise.
    """
    return TimeSeries(render_noise_free(pool) + noise_component(pool), pool.metric.name)


def normalize(series: TimeSeries) -> NormalizedSeries:
    x = np.asarray(series.values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    lo, hi = float(x.min()), float(x.max())
    scaling = hi - lo if hi > lo else 1.0
    return NormalizedSeries((x - lo) / scaling, scaling, lo, series.name)


def denormalize(n: NormalizedSeries) -> TimeSeries:
    return TimeSeries(np.asarray(n.values, dtype=float) * n.value_scaling + n.value_offset, n.name)


def export_csv(series: TimeSeries, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, v in enumerate(series.values):
            w.writerow([t, repr(float(v))])
    return path


# --- verification ---------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    exact_rtol: float = 1e-6  # noise-free checks
    sigma_k: float = 3.0  # noisy value checks: sigma_k * noise std ...
    range_frac: float = 0.01  # ... or this fraction of the value range
    period_steps: int = 1
    acf_peak_frac: float = 0.85
    stat_k: float = 4.0  # noise-scale estimates, in standard errors


@dataclass
class Check:
    name: str
    passed: bool
    measured: float | None
    expected: float | None
    tolerance: float | None


@dataclass
class ConsistencyReport:
    pool_id: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _ref_trend(pool: AttributePool, t: int) -> float:
    for s in pool.trend:
        if s.start_idx <= t < s.end_idx:
            x = t - s.start_idx
            return s.start_value + s.slope * x + s.curvature * x * (x - (s.end_idx - s.start_idx - 1))
    raise IndexError(t)


def _ref_frac(se, t: int, change=None, override: int | None = None) -> float:
    """Cycle fraction at t; ``override`` replaces the change's step amount."""
    if change is None or t < change.position:
        return ((t + se.phase) % se.period) / se.period
    amount = int(change.amplitude) if override is None else override
    if change.kind == "phase shift":
        return ((t + se.phase - amount) % se.period) / se.period
    new_period = se.period + amount
    start = ((change.position + se.phase) % se.period) / se.period
    return math.fmod(start + ((t - change.position) % new_period) / new_period, 1.0)


def _ref_shape(se, frac: float, t: int) -> float:
    k = se.kind
    if k == "sine":
        return math.sin(TWO_PI * frac)
    if k == "square":
        return 1.0 if frac < 0.5 else -1.0
    if k == "triangle":
        return 4.0 * abs(frac - 0.5) - 1.0
    if k == "sawtooth":
        return 2.0 * frac - 1.0
    if k == "harmonic mixture":
        total = sum(w * math.sin(TWO_PI * h * frac + p) for h, w, p in se.params["harmonics"])
        return total / se.params["norm"]
    if k == "amplitude-modulated sine":
        d, c = se.params["depth"], se.params["cycles"]
        return math.sin(TWO_PI * frac) * (1.0 + d * math.sin(TWO_PI * t / (c * se.period))) / (1.0 + d)
    if k == "pulse train":
        return 1.0 if frac < se.params["duty"] else -1.0
    raise KeyError(k)


def _ref_profile(kind: str, d: int, j: int) -> float:
    if kind in ("upward spike", "downward spike", "upward level shift", "downward level shift",
                "transient rise", "transient dip"):
        return 1.0
    if kind in ("convex-shaped elevation", "concave-shaped depression"):
        return math.sin(math.pi * (j + 1) / (d + 1))
    if kind == "rapid rise slow decline":
        peak = max(1, d // 5)
        return j / peak if j <= peak else (d - j) / (d - peak)
    if kind == "slow rise rapid decline":
        return _ref_profile("rapid rise slow decline", d, d - 1 - j)
    if kind == "oscillation burst":
        return 1.0 if j % 2 == 0 else -1.0
    raise KeyError(kind)


class _Reference:
    """Point-by-point noise-free model of a pool, built without numpy."""

    def __init__(self, pool: AttributePool):
        tax = registry()
        n = pool.length
        se = pool.seasonality
        change = _persistent_season_change(pool)
        self.pool = pool
        self.change = change
        self.trend = [_ref_trend(pool, t) for t in range(n)]
        if se is None:
            self.season = [0.0] * n
            self.season_mod = [0.0] * n
        else:
            self.season = [se.amplitude * _ref_shape(se, _ref_frac(se, t), t) for t in range(n)]
            self.season_mod = [
                se.amplitude * _ref_shape(se, _ref_frac(se, t, change), t) for t in range(n)
            ]
        self.pinned = [False] * n
        self.noise_seg = [False] * n
        self.contrib: list[list[float]] = []
        for f in pool.fluctuations:
            unit = tax.fluct(f.kind).amplitude_unit
            c = [0.0] * n
            for j, t in enumerate(range(f.position, f.end)):
                if unit == "value":
                    c[t] = f.amplitude * _ref_profile(f.kind, f.duration, j)
                elif unit == "season":
                    c[t] = f.amplitude * self.season[t] / se.amplitude
                elif unit == "steps":
                    c[t] = self.season_mod[t] - self.season[t]
                elif unit == "noise":
                    self.noise_seg[t] = True
            self.contrib.append(c)
        # pinned windows replace everything else in their window
        for k, f in enumerate(pool.fluctuations):
            if tax.fluct(f.kind).amplitude_unit != "pinned":
                continue
            level = self.trend[f.position] + self.season[f.position] + f.amplitude
            others = [self.trend[t] + self.season[t] + sum(c[t] for c in self.contrib)
                      for t in range(f.position, f.end)]
            for t, other in zip(range(f.position, f.end), others):
                self.contrib[k][t] = level - other
                self.pinned[t] = True
        self.full = np.array(
            [self.trend[t] + self.season[t] + sum(c[t] for c in self.contrib) for t in range(n)]
        )

    def without(self, k: int) -> np.ndarray:
        return self.full - np.array(self.contrib[k])

    def season_with(self, override: int, start: int) -> np.ndarray:
        se, ch = self.pool.seasonality, self.change
        return np.array([
            se.amplitude * _ref_shape(se, _ref_frac(se, t, ch, override), t)
            for t in range(start, self.pool.length)
        ])


def _lstsq(X: np.ndarray, y: np.ndarray):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def detect_period(y: np.ndarray, peak_frac: float = 0.85) -> int | None:
    """Seasonal period from the autocorrelation of ``y``.

    The autocorrelation is taken in difference form,
    r(k) = 1 - mean((y[t+k] - y[t])^2) / (2 var y), which is not biased by a
    partial last cycle. Lags inside the initial lobe (before r first drops
    below zero) are skipped; the answer is the smallest local maximum within
    ``peak_frac`` of the highest one.
    """
    y = np.asarray(y, dtype=float)
    m = len(y)
    var = float(np.var(y))
    if m < 8 or var <= 0:
        return None
    max_lag = (2 * m) // 3
    r = np.array([1.0] + [
        1.0 - float(np.mean((y[k:] - y[: m - k]) ** 2)) / (2 * var) for k in range(1, max_lag + 1)
    ])
    below = np.flatnonzero(r < 0)
    if below.size == 0:
        return None
    start = max(2, int(below[0]))
    peaks = [
        k for k in range(start, max_lag)
        if r[k] > 0 and r[k] >= r[k - 1] and r[k] >= r[k + 1]
    ]
    if not peaks:
        return None
    best = max(r[k] for k in peaks)
    return next(k for k in peaks if r[k] >= peak_frac * best)


def _refine_period(y: np.ndarray, se, coarse: int, keep: np.ndarray) -> int:
    """Matched-filter refinement of an autocorrelation period estimate.

    Candidate periods are scored by the residual of a least-squares fit of
    offset + gain * shape(period); the shape kind and phase come from the
    pool, period and gain are measured. Starting from ``coarse`` we walk
    downhill, at most ``coarse // 8`` steps (and at least 3) either way.
    """
    width = max(3, coarse // 8)
    idx = np.flatnonzero(keep)
    cache: dict[int, float] = {}

    def sse(cand: int) -> float:
        if cand < 2 or abs(cand - coarse) > width:
            return math.inf
        if cand not in cache:
            trial = replace(se, period=cand)
            shape = np.array([_ref_shape(trial, ((t + se.phase) % cand) / cand, t) for t in idx])
            X = np.column_stack([np.ones(len(idx)), shape])
            coef = _lstsq(X, y[idx])
            cache[cand] = float(np.sum((y[idx] - X @ coef) ** 2))
        return cache[cand]

    best = coarse
    while True:
        # look two steps out so a one-step plateau does not stop the walk
        nxt = min((best - 2, best - 1, best + 1, best + 2), key=sse)
        if sse(nxt) < sse(best) - 1e-12 * (1 + sse(best)):
            best = nxt
        else:
            return best


def verify(pool: AttributePool, series: TimeSeries, tolerances: Tolerances | None = None) -> ConsistencyReport:
    """Check every pool attribute against the array.

    Noise-free pools are held to ``exact_rtol``; noisy pools to
    max(sigma_k * noise std, range_frac * value range) for value facts, a
    standard-error bound for noise scales, and +-period_steps for step facts.
    """
    tol = tolerances or Tolerances()
    y = np.asarray(series.values, dtype=float)
    if len(y) != pool.length:
        raise ValueError(f"series length {len(y)} != pool length {pool.length}")
    report = ConsistencyReport(pool.id)
    add = report.checks.append
    tax = registry()

    finite = bool(np.all(np.isfinite(y)))
    add(Check("finite", finite, None, None, None))
    if not finite:
        return report

    ref = _Reference(pool)
    noisy = pool.noise.kind != NONE_LABEL
    sigma = pool.noise.std
    mag = float(np.max(np.abs(y))) or 1.0
    vrange = float(np.ptp(y))
    exact_abs = 1e-9 * mag

    def value_tol(expected: float) -> float:
        if noisy:
            return max(tol.sigma_k * sigma, tol.range_frac * vrange)
        return tol.exact_rtol * abs(expected) + exact_abs

    def exact_tol(expected: float) -> float:
        return tol.exact_rtol * abs(expected) + exact_abs

    resid = y - ref.full
    free = ~np.array(ref.pinned) & ~np.array(ref.noise_seg)

    # noise
    if not noisy:
        worst = float(np.max(np.abs(resid)))
        add(Check("noise.none", worst <= exact_abs, worst, 0.0, exact_abs))
    else:
        r = resid[free]
        m = max(len(r), 1)
        est = float(np.sqrt(np.mean(r**2))) if len(r) else 0.0
        band = tol.stat_k / math.sqrt(2 * m) * sigma
        add(Check("noise.std", abs(est - sigma) <= band, est, sigma, band))
        worst = float(np.max(np.abs(r))) if len(r) else 0.0
        bound = pool.noise.bound * (1 + 1e-9) + exact_abs
        add(Check("noise.bound", worst <= bound, worst, pool.noise.bound, bound))
    pinned_pts = np.array(ref.pinned)
    for t in np.flatnonzero(pinned_pts):
        if abs(resid[t]) > exact_abs:
            add(Check(f"pinned.noise@{t}", False, float(resid[t]), 0.0, exact_abs))
            break

    # trend segments
    non_trend = ref.full - np.array(ref.trend)
    for i, s in enumerate(pool.trend):
        idx = np.array([t for t in range(s.start_idx, s.end_idx) if not ref.pinned[t]])
        if len(idx) < 4:
            add(Check(f"trend[{i}].slope", True, None, s.slope, None))
            continue
        x = (idx - s.start_idx).astype(float)
        cols = [np.ones_like(x), x]
        if s.kind == "curved":
            cols.append(x * (x - (s.length - 1)))
        X = np.column_stack(cols)
        coef = _lstsq(X, y[idx] - non_trend[idx])
        b = float(coef[1])
        if not noisy:
            t_b = tol.exact_rtol * abs(s.slope) + exact_abs / s.length
            add(Check(f"trend[{i}].slope", abs(b - s.slope) <= t_b, b, s.slope, t_b))
            if s.kind == "curved":
                c = float(coef[2])
                t_c = tol.exact_rtol * abs(s.curvature) + exact_abs / s.length**2
                add(Check(f"trend[{i}].curvature", abs(c - s.curvature) <= t_c, c, s.curvature, t_c))
        elif s.kind == "steady":
            local_sigma = np.sqrt(np.mean(
                [(pool.noise.std if not ref.noise_seg[t] else _seg_std(pool, t)) ** 2 for t in idx]
            ))
            cov = np.linalg.inv(X.T @ X)
            se_b = float(local_sigma * math.sqrt(cov[1, 1]))
            band = tol.sigma_k * se_b
            add(Check(f"trend[{i}].slope_sign", abs(b) <= band, b, 0.0, band))
        else:
            add(Check(f"trend[{i}].slope_sign", int(np.sign(b)) == s.slope_sign, b, float(s.slope_sign), 0.0))

    # seasonality
    se = pool.seasonality
    if se is not None:
        end = ref.change.position if ref.change is not None else pool.length
        non_season = ref.full - np.array(ref.season_mod)
        ys = (y - non_season)[:end]
        found = detect_period(ys, tol.acf_peak_frac)
        if found is not None:
            found = _refine_period(ys, se, found, ~pinned_pts[:end])
        ok = found is not None and abs(found - se.period) <= tol.period_steps
        add(Check("season.period", ok, found, se.period, tol.period_steps))
        shape = np.array(ref.season[:end]) / se.amplitude
        keep = ~pinned_pts[:end]
        amp = float(np.dot(shape[keep], ys[keep]) / np.dot(shape[keep], shape[keep]))
        t_a = value_tol(se.amplitude)
        add(Check("season.amplitude", abs(amp - se.amplitude) <= t_a, amp, se.amplitude, t_a))

    # fluctuations
    for k, f in enumerate(pool.fluctuations):
        fk = tax.fluct(f.kind)
        name = f"fluct[{k}]"
        w = np.arange(f.position, f.end)
        rk = (y - ref.without(k))
        if fk.amplitude_unit in ("value", "season"):
            if fk.amplitude_unit == "value":
                p = np.array([_ref_profile(f.kind, f.duration, j) for j in range(f.duration)])
            else:
                p = np.array([ref.season[t] for t in w]) / se.amplitude
            a_hat = float(np.dot(p, rk[w]) / np.dot(p, p))
            t_a = value_tol(f.amplitude)
            add(Check(f"{name}.amplitude", abs(a_hat - f.amplitude) <= t_a, a_hat, f.amplitude, t_a))
            if f.kind in ("upward spike", "downward spike"):
                lo, hi = max(0, f.position - 3), min(pool.length, f.position + 4)
                local = rk[lo:hi]
                at = lo + int(np.argmax(local) if f.kind == "upward spike" else np.argmin(local))
                add(Check(f"{name}.position", at == f.position, at, f.position, 0))
        elif fk.amplitude_unit == "noise":
            r = rk[w]
            est = float(np.sqrt(np.mean(r**2)))
            factor = math.sqrt(3.0) if pool.noise.kind == "uniform" else 1.0
            measured = est * factor - pool.noise.scale
            band = tol.stat_k / math.sqrt(2 * len(w)) * (pool.noise.scale + f.amplitude)
            add(Check(f"{name}.amplitude", abs(measured - f.amplitude) <= band, measured, f.amplitude, band))
        elif fk.amplitude_unit == "pinned":
            flat = float(np.ptp(y[w]))
            add(Check(f"{name}.flat", flat <= exact_abs, flat, 0.0, exact_abs))
            a_hat = float(y[f.position] - ref.trend[f.position] - ref.season[f.position])
            t_a = exact_tol(f.amplitude)
            add(Check(f"{name}.amplitude", abs(a_hat - f.amplitude) <= t_a, a_hat, f.amplitude, t_a))
        else:  # steps
            expected = int(f.amplitude)
            target = (y - (ref.full - np.array(ref.season_mod)))[f.position :]
            width = max(3, se.period // 4)
            if f.kind == "period lengthening":
                cands = range(max(1, expected - width), expected + width + 1)
            else:
                cands = range(expected - width, expected + width + 1)
            best, best_sse = None, math.inf
            for c in cands:
                sse = float(np.sum((target - ref.season_with(c, f.position)) ** 2))
                if best is None or sse < best_sse - 1e-12 * (1 + best_sse):
                    best, best_sse = c, sse
            rms = math.sqrt(best_sse / len(target))
            if f.kind == "phase shift":
                diff = (best - expected) % se.period
                diff = min(diff, se.period - diff)
            else:
                diff = abs(best - expected)
            if noisy:
                ok = diff <= tol.period_steps and rms <= sigma * (1 + tol.stat_k / math.sqrt(2 * len(target))) + exact_abs
            else:
                ok = diff == 0 and rms <= exact_abs
            add(Check(f"{name}.amplitude", ok, float(best), float(expected), float(tol.period_steps if noisy else 0)))
    return report


def _seg_std(pool: AttributePool, t: int) -> float:
    for f in pool.fluctuations:
        if f.position <= t < f.end and registry().fluct(f.kind).amplitude_unit == "noise":
            scale = pool.noise.scale + f.amplitude
            return scale / math.sqrt(3.0) if pool.noise.kind == "uniform" else scale
    return pool.noise.std
