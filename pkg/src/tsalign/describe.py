"""Attribute descriptions and template QA generation.

Every question embeds one ``<ts>`` slot per referenced series; the datasets
module expands slots into metadata headers. Gold answers name taxonomy ids
verbatim, and numeric answers end with the gold number, so the parsers in
``evalkit`` recover them without ambiguity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .genpool import (
    LOCAL,
    SHAPE,
    AttributePool,
    CorrelationPool,
    has_relation,
)
from .rng import make_rng, split_seed
from .taxonomy import FLUCT, NOISE, NONE_LABEL, SEASON, TREND, registry

SLOT = "<ts>"
DEFAULT_RTOL = 0.05

ALIGNMENT_TASKS = ("trend", "season", "noise", "local")
NUMERIC_TASKS = (
    "numeric.max",
    "numeric.min",
    "numeric.segment_avg",
    "numeric.fluct_amplitude",
    "numeric.fluct_position",
    "numeric.period",
    "numeric.value_at",
)
MTS_TASKS = ("correlation", "cluster")
REASONING_TASKS = ("inductive", "deductive", "causal", "comparison")
TASKS = ALIGNMENT_TASKS + MTS_TASKS + NUMERIC_TASKS + REASONING_TASKS + ("instruct_follow",)

TASK_CATEGORY = {"trend": TREND, "season": SEASON, "noise": NOISE, "local": FLUCT}


def fmt(x: float, sig: int = 4) -> str:
    """Round to ``sig`` significant digits; integers print without a point."""
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.{sig}g}"


def gold_fmt(x: float) -> str:
    return fmt(x, 8)


def article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def span_text(a: int, b: int) -> str:
    return f"t={a} to t={b - 1}"


# --- facts and descriptions ---------------------------------------------------


@dataclass(frozen=True)
class Fact:
    kind: str
    value: Any
    units: str = ""
    location: tuple[int, int] | None = None  # [start, end) index window
    series_ref: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "units": self.units,
            "location": None if self.location is None else list(self.location),
            "series_ref": self.series_ref,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Fact":
        loc = d.get("location")
        return cls(d["kind"], d["value"], d.get("units", ""),
                   None if loc is None else (int(loc[0]), int(loc[1])), d.get("series_ref", ""))


NUMERIC_FACTS = {
    "series_length",
    "trend_slope",
    "trend_start_value",
    "trend_end_value",
    "trend_slope_sign",
    "season_period",
    "season_amplitude",
    "noise_scale",
    "fluct_position",
    "fluct_duration",
    "fluct_amplitude",
}
CATEGORICAL_FACTS = {"trend_kind", "season_kind", "noise_kind", "fluct_kind"}


def pool_facts(pool: AttributePool) -> list[Fact]:
    """Structured facts mirroring every attribute of ``pool``."""
    ref = pool.id
    out = [Fact("series_length", pool.length, "steps", (0, pool.length), ref)]
    for s in pool.trend:
        loc = (s.start_idx, s.end_idx)
        out += [
            Fact("trend_kind", s.kind, "", loc, ref),
            Fact("trend_slope_sign", s.slope_sign, "", loc, ref),
            Fact("trend_start_value", s.start_value, "value", loc, ref),
            Fact("trend_end_value", s.end_value, "value", loc, ref),
            Fact("trend_slope", s.slope, "value/step", loc, ref),
        ]
    se = pool.seasonality
    if se is None:
        out.append(Fact("season_kind", NONE_LABEL, "", None, ref))
    else:
        out += [
            Fact("season_kind", se.kind, "", None, ref),
            Fact("season_period", se.period, "steps", None, ref),
            Fact("season_amplitude", se.amplitude, "value", None, ref),
        ]
    out.append(Fact("noise_kind", pool.noise.kind, "", None, ref))
    if pool.noise.kind != NONE_LABEL:
        out.append(Fact("noise_scale", pool.noise.scale, "value", None, ref))
    if not pool.fluctuations:
        out.append(Fact("fluct_kind", NONE_LABEL, "", None, ref))
    tax = registry()
    for f in pool.fluctuations:
        loc = (f.position, f.end)
        unit = tax.fluct(f.kind).amplitude_unit
        out += [
            Fact("fluct_kind", f.kind, "", loc, ref),
            Fact("fluct_position", f.position, "index", loc, ref),
            Fact("fluct_duration", f.duration, "steps", loc, ref),
            Fact("fluct_amplitude", f.amplitude, "steps" if unit == "steps" else "value", loc, ref),
        ]
    return out


def correlation_facts(corr: CorrelationPool) -> list[Fact]:
    return [
        Fact("correlation_kind", corr.kind, "", None, corr.group_id),
        Fact("correlation_members", sorted(corr.member_ids), "", None, corr.group_id),
    ]


@dataclass
class AttributeDescription:
    text: str
    facts: list[Fact]


def _fluct_phrase(f, unit: str) -> str:
    if unit == "steps":
        what = "period grows by" if f.kind == "period lengthening" else "phase moves by"
        return f"a {f.kind} from t={f.position} on (the {what} {fmt(f.amplitude)} steps)"
    if unit == "pinned":
        if f.kind == "gap":
            return f"a gap over {span_text(f.position, f.end)} (values drop by {fmt(-f.amplitude)})"
        return f"a temporary flatline over {span_text(f.position, f.end)}"
    if unit == "noise":
        return (f"{article(f.kind)} {f.kind} over {span_text(f.position, f.end)} "
                f"(noise scale changes by {fmt(f.amplitude)})")
    if f.duration == 1 or registry().fluct(f.kind).persistent:
        return f"{article(f.kind)} {f.kind} at t={f.position} with amplitude {fmt(f.amplitude)}"
    return f"{article(f.kind)} {f.kind} over {span_text(f.position, f.end)} with amplitude {fmt(f.amplitude)}"


def describe(pool: AttributePool) -> AttributeDescription:
    parts = [f"The series {pool.metric.name} has {pool.length} points."]
    for s in pool.trend:
        where = span_text(s.start_idx, s.end_idx)
        if s.kind == "steady":
            parts.append(f"From {where} the trend is steady around {fmt(s.start_value)}.")
        else:
            parts.append(
                f"From {where} the trend is {s.kind}, going from {fmt(s.start_value)} "
                f"to {fmt(s.end_value)} (slope {fmt(s.slope)} per step)."
            )
    se = pool.seasonality
    if se is None:
        parts.append("There is no seasonality, so no periodic fluctuation.")
    else:
        parts.append(
            f"It has {se.kind} seasonality with period {se.period} and amplitude {fmt(se.amplitude)}."
        )
    if pool.noise.kind == NONE_LABEL:
        parts.append("The series is smooth and noise-free.")
    else:
        parts.append(f"It carries {pool.noise.kind} noise with scale {fmt(pool.noise.scale)}.")
    if not pool.fluctuations:
        parts.append("No local fluctuations are present.")
    else:
        tax = registry()
        phrases = [_fluct_phrase(f, tax.fluct(f.kind).amplitude_unit) for f in pool.fluctuations]
        parts.append("Local fluctuations: " + "; ".join(phrases) + ".")
    return AttributeDescription(" ".join(parts), pool_facts(pool))


# --- QA records ---------------------------------------------------------------


@dataclass
class QARecord:
    id: str
    task: str
    question: str
    answer: str
    gold_labels: dict
    series_refs: list[str]
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.task,
            "question": self.question,
            "answer": self.answer,
            "gold_labels": self.gold_labels,
            "series_refs": list(self.series_refs),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "QARecord":
        return cls(d["id"], d["task"], d["question"], d["answer"], dict(d["gold_labels"]),
                   list(d.get("series_refs", [])), dict(d.get("provenance", {})))


def _record_id(task: str, refs: Sequence[str], template_seed: int) -> str:
    return f"{task}-{split_seed(template_seed, task, *refs):016x}"


def _rng(task: str, refs: Sequence[str], template_seed: int):
    return make_rng(split_seed(template_seed, "template", task, *refs))


def _pick(rng, options):
    i = int(rng.integers(len(options)))
    return i, options[i]


def _intro(pool: AttributePool) -> str:
    return f"{pool.metric.name} over {pool.length} steps: {SLOT}"


_ALIGN_Q = {
    "trend": (
        "Here is a time series of {intro}. What is its trend?",
        "Given {intro}, describe the trend of this series.",
        "Look at {intro}. Which trend types does the series follow?",
        "The following is {intro}. How does the overall level evolve?",
        "Consider {intro}. Classify the trend of each part of the series.",
    ),
    "season": (
        "Here is a time series of {intro}. Does it show periodic fluctuation, and of what shape?",
        "Given {intro}, what kind of seasonality is present?",
        "Look at {intro}. Classify its periodic pattern.",
        "The following is {intro}. Is there a repeating cycle? If so, what type?",
        "Consider {intro}. Identify the seasonal shape of the series, if any.",
    ),
    "noise": (
        "Here is a time series of {intro}. What kind of noise does it carry?",
        "Given {intro}, classify the noise in this series.",
        "Look at {intro}. Is the series noisy? Which noise type?",
        "The following is {intro}. Describe the random component of the series.",
        "Consider {intro}. Which noise distribution best fits the residual?",
    ),
    "local": (
        "Here is a time series of {intro}. Which local fluctuations does it contain?",
        "Given {intro}, list the local anomalies or fluctuations you can find.",
        "Look at {intro}. Are there any local fluctuations? Name their types.",
        "The following is {intro}. Identify every short-term or sudden change.",
        "Consider {intro}. Which local patterns stand out from the baseline?",
    ),
}


def _align_answer(pool: AttributePool, task: str, variant: int) -> str:
    if task == "trend":
        pieces = [f"{s.kind} over {span_text(s.start_idx, s.end_idx)}" for s in pool.trend]
        lead = ("The trend is ", "The series follows a ", "Trend: ")[variant % 3]
        return lead + ", then ".join(pieces) + "."
    if task == "season":
        se = pool.seasonality
        if se is None:
            return "There is no periodic fluctuation in this series (none)."
        return f"The series shows {se.kind} seasonality with a period of about {se.period} steps."
    if task == "noise":
        if pool.noise.kind == NONE_LABEL:
            return "The series is noise-free; noise type: none."
        return f"The series carries {pool.noise.kind} noise."
    if not pool.fluctuations:
        return "No local fluctuations are present (none)."
    tax = registry()
    phrases = [_fluct_phrase(f, tax.fluct(f.kind).amplitude_unit) for f in pool.fluctuations]
    return "The series contains " + "; ".join(phrases) + "."


def gen_alignment_qa(pool: AttributePool, series, task: str, template_seed: int) -> QARecord:
    """Categorical question about one attribute category of ``pool``."""
    if task not in ALIGNMENT_TASKS:
        raise ValueError(f"not an alignment task: {task!r}")
    refs = [pool.id]
    rng = _rng(task, refs, template_seed)
    idx, template = _pick(rng, _ALIGN_Q[task])
    category = TASK_CATEGORY[task]
    return QARecord(
        id=_record_id(task, refs, template_seed),
        task=task,
        question=template.format(intro=_intro(pool)),
        answer=_align_answer(pool, task, idx),
        gold_labels={"type": "labels", "category": category, "labels": sorted(pool.kinds(category))},
        series_refs=refs,
        provenance={"template": f"{task}/{idx}"},
    )


# --- numeric ------------------------------------------------------------------

_NUM_Q = {
    "numeric.max": (
        "What is the maximum value of {intro}?",
        "Given {intro}, report the largest value in the series.",
        "Find the peak value of {intro}.",
        "Look at {intro}. How high does the series go?",
        "In {intro}, what is the highest observed value?",
    ),
    "numeric.min": (
        "What is the minimum value of {intro}?",
        "Given {intro}, report the smallest value in the series.",
        "Find the lowest value of {intro}.",
        "Look at {intro}. How low does the series go?",
        "In {intro}, what is the lowest observed value?",
    ),
    "numeric.segment_avg": (
        "What is the average value of {intro} between t={a} and t={b}?",
        "Given {intro}, compute the mean over t={a} to t={b}.",
        "For {intro}, what is the mean level on the window t={a}..t={b}?",
        "Look at {intro}. Average the values from t={a} through t={b}.",
        "In {intro}, report the segment average for indices {a} to {b}.",
    ),
    "numeric.value_at": (
        "What is the value of {intro} at t={t}?",
        "Given {intro}, read off the value at index {t}.",
        "For {intro}, what value is observed at time step {t}?",
        "Look at {intro}. Report the value at t={t}.",
        "In {intro}, what is the reading at position {t}?",
    ),
    "numeric.period": (
        "What is the period of the seasonal pattern in {intro}?",
        "Given {intro}, how many steps does one cycle last?",
        "For {intro}, estimate the seasonal period in time steps.",
        "Look at {intro}. How long is each repeating cycle?",
        "In {intro}, report the cycle length of the periodic component.",
    ),
    "numeric.fluct_amplitude": (
        "What is the amplitude of the {kind} near t={pos} in {intro}?",
        "Given {intro}, how large is the {kind} around t={pos}?",
        "For {intro}, report the size of the {kind} starting at t={pos}.",
        "Look at {intro}. By how much does the {kind} at t={pos} deviate from the baseline?",
        "In {intro}, estimate the magnitude of the {kind} close to t={pos}.",
    ),
    "numeric.fluct_position": (
        "At which time step does the {kind} in {intro} start?",
        "Given {intro}, where is the {kind} located?",
        "For {intro}, report the starting index of the {kind}.",
        "Look at {intro}. When does the {kind} occur?",
        "In {intro}, find the position of the {kind}.",
    ),
}

_NUM_A = {
    "numeric.max": "The series peaks at t={at}; the maximum value is {v}",
    "numeric.min": "The series bottoms out at t={at}; the minimum value is {v}",
    "numeric.segment_avg": "Averaging t={a} to t={b}, the mean value is {v}",
    "numeric.value_at": "At t={t} the value is {v}",
    "numeric.period": "Each cycle lasts {v}",
    "numeric.fluct_amplitude": "The {kind} has an amplitude of {v}",
    "numeric.fluct_position": "The {kind} starts at t={v}",
}


def _unique_flucts(pool: AttributePool, value_only: bool) -> list[int]:
    tax = registry()
    counts: dict[str, int] = {}
    for f in pool.fluctuations:
        counts[f.kind] = counts.get(f.kind, 0) + 1
    out = []
    for k, f in enumerate(pool.fluctuations):
        if counts[f.kind] != 1:
            continue
        if value_only and tax.fluct(f.kind).amplitude_unit != "value":
            continue
        out.append(k)
    return out


def numeric_gold(pool: AttributePool, values: np.ndarray, task: str, query: Mapping) -> float:
    """Recompute the gold number of a numeric task from pool and raw values."""
    v = np.asarray(values, dtype=float)
    if task == "numeric.max":
        return float(v.max())
    if task == "numeric.min":
        return float(v.min())
    if task == "numeric.segment_avg":
        return float(np.mean(v[query["start"] : query["end"]]))
    if task == "numeric.value_at":
        return float(v[query["t"]])
    if task == "numeric.period":
        return float(pool.seasonality.period)
    f = pool.fluctuations[query["index"]]
    if task == "numeric.fluct_amplitude":
        return abs(f.amplitude)
    if task == "numeric.fluct_position":
        return float(f.position)
    raise KeyError(task)


def gen_numeric_qa(pool: AttributePool, series, task: str, template_seed: int) -> QARecord | None:
    """Numeric question; ``None`` when the task does not apply to ``pool``."""
    if task not in NUMERIC_TASKS:
        raise ValueError(f"not a numeric task: {task!r}")
    values = np.asarray(getattr(series, "values", series), dtype=float)
    refs = [pool.id]
    rng = _rng(task, refs, template_seed)
    n = pool.length
    query: dict = {}
    fill: dict = {"intro": _intro(pool)}
    unit = "value"
    if task in ("numeric.max", "numeric.min"):
        at = int(np.argmax(values) if task == "numeric.max" else np.argmin(values))
        query["at"] = at
        fill["at"] = at
    elif task == "numeric.segment_avg":
        if len(pool.trend) > 1:
            seg = pool.trend[int(rng.integers(len(pool.trend)))]
            a, b = seg.start_idx, seg.end_idx
        else:
            width = int(rng.integers(16, n // 2 + 1))
            a = int(rng.integers(0, n - width + 1))
            b = a + width
        query.update(start=a, end=b)
        fill.update(a=a, b=b - 1)
    elif task == "numeric.value_at":
        t = int(rng.integers(n))
        query["t"] = t
        fill["t"] = t
    elif task == "numeric.period":
        if pool.seasonality is None:
            return None
        unit = "steps"
    else:
        options = _unique_flucts(pool, value_only=task == "numeric.fluct_amplitude")
        if not options:
            return None
        k = options[int(rng.integers(len(options)))]
        f = pool.fluctuations[k]
        query.update(index=k, kind=f.kind)
        fill.update(kind=f.kind, pos=f.position)
        unit = "index" if task == "numeric.fluct_position" else "value"
    gold = numeric_gold(pool, values, task, query)
    idx, template = _pick(rng, _NUM_Q[task])
    answer = _NUM_A[task].format(v=gold_fmt(gold), **{k: v for k, v in fill.items() if k != "intro"})
    if task == "numeric.period":
        answer = f"The seasonal cycle repeats regularly. Each cycle lasts {gold_fmt(gold)}"
    return QARecord(
        id=_record_id(task, refs, template_seed),
        task=task,
        question=template.format(**fill),
        answer=answer + ".",
        gold_labels={
            "type": "number",
            "value": gold,
            "rtol": DEFAULT_RTOL,
            "value_range": [float(values.min()), float(values.max())],
            "unit": unit,
            "query": query,
        },
        series_refs=refs,
        provenance={"template": f"{task}/{idx}"},
    )


# --- multivariate ---------------------------------------------------------------

_CORR_Q = {
    SHAPE: (
        "Here are {k} series: {slots}. Which of them share the same overall trend shape as a group?",
        "Given the series {slots}, which metrics move together in their global trend?",
        "Look at these {k} metrics: {slots}. Name the ones whose trends rise and fall together.",
        "Consider {slots}. Which series are correlated in overall shape?",
        "Among {slots}, list the metrics with a common trend pattern.",
    ),
    LOCAL: (
        "Here are {k} series: {slots}. Which of them share a {kind} at around t={pos}?",
        "Given the series {slots}, which metrics show a {kind} near t={pos}?",
        "Look at these {k} metrics: {slots}. Name the ones with a {kind} close to t={pos}.",
        "Consider {slots}. Which series are correlated through a {kind} around t={pos}?",
        "Among {slots}, list the metrics that exhibit a {kind} at about t={pos}.",
    ),
}

_CLUSTER_Q = (
    "Here are {k} series: {slots}. Group them by their overall trend shape.",
    "Given the series {slots}, cluster the metrics into groups with the same trend pattern.",
    "Look at these {k} metrics: {slots}. Which metrics belong together by trend shape? List each group.",
    "Consider {slots}. Partition the series into clusters of similar global shape.",
    "Among {slots}, form groups of series whose trends move alike.",
)


def _slots(pools: Sequence[AttributePool]) -> str:
    return ", ".join(f"{p.metric.name} ({p.length} steps) {SLOT}" for p in pools)


def trend_partition(pools: Sequence[AttributePool]) -> list[list[str]]:
    """Metric names grouped by merged trend directions, canonically sorted."""
    groups: dict[tuple, list[str]] = {}
    for p in pools:
        groups.setdefault(tuple(p.trend_directions()), []).append(p.metric.name)
    return sorted(sorted(g) for g in groups.values())


def _as_list(corr) -> list[CorrelationPool]:
    if isinstance(corr, CorrelationPool):
        return [corr]
    return list(corr)


def gen_mts_qa(corr_pool, pools: Sequence[AttributePool], series_list, task: str, template_seed: int) -> QARecord:
    """Correlation or cluster question over several series.

    ``corr_pool`` may be one CorrelationPool or a list; for ``correlation``
    the first group is asked about.
    """
    if task not in MTS_TASKS:
        raise ValueError(f"not a multivariate task: {task!r}")
    if len(pools) < 2:
        raise ValueError("multivariate questions need at least 2 series")
    names = [p.metric.name for p in pools]
    if len(set(names)) != len(names):
        raise ValueError("metric names must be distinct within a multivariate record")
    groups = _as_list(corr_pool)
    refs = [p.id for p in pools]
    rng = _rng(task, refs, template_seed)
    fill = {"k": len(pools), "slots": _slots(pools)}
    if task == "correlation":
        corr = groups[0]
        members = sorted(p.metric.name for p in pools if has_relation(p, corr.kind, corr.relation))
        relation = dict(corr.relation)
        if corr.kind == LOCAL:
            fill.update(kind=relation["fluct_kind"], pos=relation["position"])
        idx, template = _pick(rng, _CORR_Q[corr.kind])
        answer = "The correlated series are: " + ", ".join(members) + "."
        gold = {
            "type": "labels",
            "category": "series",
            "labels": members,
            "vocab": sorted(names),
            "relation": {"kind": corr.kind, **relation},
        }
    else:
        partition = trend_partition(pools)
        idx, template = _pick(rng, _CLUSTER_Q)
        answer = " ".join(f"Group {i + 1}: {', '.join(g)}." for i, g in enumerate(partition))
        gold = {"type": "partition", "groups": partition, "vocab": sorted(names)}
    return QARecord(
        id=_record_id(task, refs, template_seed),
        task=task,
        question=template.format(**fill),
        answer=answer,
        gold_labels=gold,
        series_refs=refs,
        provenance={"template": f"{task}/{idx}", "groups": [g.group_id for g in groups]},
    )


# --- reasoning seeds ---------------------------------------------------------------

_DEDUCTIVE_Q = (
    "If {metric} ever exceeds {x}, an alert fires. Given {intro}, does an alert fire? Answer True or False.",
    "A rule says: when the maximum of {metric} is above {x}, the system is overloaded. Based on {intro}, is it overloaded? True or False?",
    "Suppose readings above {x} count as critical. Looking at {intro}, is there any critical reading? Reply True or False.",
    "Policy: escalate if {metric} goes over {x}. Given {intro}, should we escalate? True or False.",
    "Threshold check: is any value of {intro} larger than {x}? Answer True or False.",
)

_CAUSAL_Q = (
    "Given {intro}, what best explains the change around t={pos}? {options}",
    "Looking at {intro}, which pattern causes the behaviour near t={pos}? {options}",
    "In {intro}, the series changes around t={pos}. Which option describes it? {options}",
    "For {intro}, what produced the deviation at about t={pos}? {options}",
    "Consider {intro}. Which local pattern appears around t={pos}? {options}",
)

_COMPARE_Q = (
    "In {intro}, which window has the higher average: A) t={a0}..t={a1} or B) t={b0}..t={b1}?",
    "Given {intro}, compare the mean of A) t={a0} to t={a1} with B) t={b0} to t={b1}. Which is larger?",
    "Looking at {intro}, is the level higher in A) [{a0}, {a1}] or B) [{b0}, {b1}]?",
    "For {intro}, which stretch sits higher on average, A) t={a0}..t={a1} or B) t={b0}..t={b1}?",
    "Consider {intro}. Pick the window with the larger mean: A) {a0} to {a1}, B) {b0} to {b1}.",
)

_INDUCTIVE_Q = (
    "Summarize the main characteristics of {intro}.",
    "Given {intro}, describe its trend, seasonality, noise and local patterns.",
    "What are the key features of {intro}?",
    "Look at {intro} and write a short analysis of its behaviour.",
    "Characterize {intro} in a few sentences.",
)

LETTERS = "ABCD"


def _options_text(options: Sequence[str]) -> str:
    return " ".join(f"{LETTERS[i]}) {o}" for i, o in enumerate(options))


def inductive_keywords(pool: AttributePool) -> list[str]:
    kw = list(dict.fromkeys(s.kind for s in pool.trend))
    kw.append(pool.seasonality.kind if pool.seasonality else "no seasonality")
    kw.append("noise-free" if pool.noise.kind == NONE_LABEL else f"{pool.noise.kind} noise")
    kw += list(dict.fromkeys(f.kind for f in pool.fluctuations))
    return kw


def gen_reasoning_qa(pool: AttributePool, series, task: str, template_seed: int) -> QARecord | None:
    """Seed questions for the evolution stage; ``None`` if not applicable."""
    if task not in REASONING_TASKS:
        raise ValueError(f"not a reasoning task: {task!r}")
    values = np.asarray(getattr(series, "values", series), dtype=float)
    refs = [pool.id]
    rng = _rng(task, refs, template_seed)
    fill = {"intro": _intro(pool), "metric": pool.metric.name}
    lo, hi = float(values.min()), float(values.max())
    vr = max(hi - lo, 1e-12)
    if task == "deductive":
        above = bool(rng.random() < 0.5)
        # keep the threshold well clear of the maximum
        gap = float(rng.uniform(0.1, 0.5)) * vr
        x = float(fmt(hi - gap if above else hi + gap, 4))
        fill["x"] = fmt(x)
        idx, template = _pick(rng, _DEDUCTIVE_Q)
        truth = "True" if hi > x else "False"
        answer = f"{truth}. The maximum is {gold_fmt(hi)}, compared with the threshold {fmt(x)}."
        gold = {"type": "choice", "choice": truth, "options": ["True", "False"],
                "query": {"threshold": x, "op": "max_gt"}}
    elif task == "causal":
        options_k = _unique_flucts(pool, value_only=False)
        if not options_k:
            return None
        k = options_k[int(rng.integers(len(options_k)))]
        f = pool.fluctuations[k]
        present = {g.kind for g in pool.fluctuations}
        others = [kid for kid in registry().ids(FLUCT) if kid not in present]
        picks = [others[i] for i in rng.choice(len(others), size=3, replace=False)]
        slot = int(rng.integers(4))
        opts = picks[:slot] + [f.kind] + picks[slot:]
        fill.update(pos=f.position, options=_options_text(opts))
        idx, template = _pick(rng, _CAUSAL_Q)
        answer = f"Answer: {LETTERS[slot]}. The change comes from {article(f.kind)} {f.kind}."
        gold = {"type": "choice", "choice": LETTERS[slot], "options": list(LETTERS),
                "option_text": opts, "query": {"index": k, "kind": f.kind}}
    elif task == "comparison":
        n = pool.length
        w = max(8, n // 8)
        for _ in range(20):
            a0, b0 = sorted(int(x) for x in rng.choice(n - w + 1, size=2, replace=False))
            if b0 - a0 < w:
                continue
            ma, mb = float(np.mean(values[a0 : a0 + w])), float(np.mean(values[b0 : b0 + w]))
            if abs(ma - mb) >= 0.05 * vr:
                break
        else:
            return None
        fill.update(a0=a0, a1=a0 + w - 1, b0=b0, b1=b0 + w - 1)
        idx, template = _pick(rng, _COMPARE_Q)
        choice = "A" if ma > mb else "B"
        answer = f"Answer: {choice}. The first window averages {gold_fmt(ma)} and the second {gold_fmt(mb)}."
        gold = {"type": "choice", "choice": choice, "options": ["A", "B"],
                "query": {"a": [a0, a0 + w], "b": [b0, b0 + w]}}
    else:
        idx, template = _pick(rng, _INDUCTIVE_Q)
        answer = describe(pool).text
        gold = {"type": "keywords", "keywords": inductive_keywords(pool)}
    return QARecord(
        id=_record_id(task, refs, template_seed),
        task=task,
        question=template.format(**fill),
        answer=answer,
        gold_labels=gold,
        series_refs=refs,
        provenance={"template": f"{task}/{idx}"},
    )


# --- instruction following ---------------------------------------------------------------

_IF_Q = (
    "Which of the following is a {cat} type? {options} Answer with exactly one letter.",
    "Reply with a single letter only. Which option names a {cat} pattern? {options}",
    "Choose the one option that belongs to the {cat} category. {options} Output only the letter.",
    "Format requirement: respond with one capital letter and nothing else. Which is a {cat} kind? {options}",
    "From the list {options}, select the {cat} type. Your whole answer must be one letter.",
)

_CAT_NAMES = {TREND: "trend", SEASON: "seasonality", NOISE: "noise", FLUCT: "local fluctuation"}


def gen_instruct_follow(template_seed: int) -> QARecord:
    """Series-free multiple-choice item testing response-format compliance."""
    tax = registry()
    rng = make_rng(split_seed(template_seed, "instruct_follow"))
    cats = [TREND, SEASON, NOISE, FLUCT]
    target = cats[int(rng.integers(4))]
    pool_ids = [k for k in tax.ids(target) if k != NONE_LABEL]
    right = pool_ids[int(rng.integers(len(pool_ids)))]
    wrong_pool = [k for c in cats if c != target for k in tax.ids(c) if k != NONE_LABEL]
    wrong = [wrong_pool[i] for i in rng.choice(len(wrong_pool), size=3, replace=False)]
    slot = int(rng.integers(4))
    opts = wrong[:slot] + [right] + wrong[slot:]
    idx, template = _pick(rng, _IF_Q)
    return QARecord(
        id=f"instruct_follow-{split_seed(template_seed, 'instruct_follow', 'id'):016x}",
        task="instruct_follow",
        question=template.format(cat=_CAT_NAMES[target], options=_options_text(opts)),
        answer=LETTERS[slot],
        gold_labels={"type": "choice", "choice": LETTERS[slot], "options": list(LETTERS),
                     "option_text": opts, "query": {"category": target}},
        series_refs=[],
        provenance={"template": f"instruct_follow/{idx}"},
    )


# --- mechanical gold checking ------------------------------------------------------------


def check_gold(
    record: QARecord,
    pools: Mapping[str, AttributePool],
    series: Mapping[str, Any],
    run_verify: bool = False,
) -> list[str]:
    """Re-derive the gold labels of ``record`` from its pools; return problems.

    With ``run_verify`` each referenced series is also checked against its
    pool with ``synth.verify``.
    """
    problems: list[str] = []
    g = record.gold_labels
    missing = [r for r in record.series_refs if r not in pools]
    if missing:
        return [f"unknown series refs {missing}"]
    refs = [pools[r] for r in record.series_refs]
    task = record.task
    if task != "instruct_follow" and not refs:
        problems.append("record has no series refs")
    if run_verify:
        from .synth import TimeSeries, verify

        for p in refs:
            rep = verify(p, TimeSeries(_values(series[p.id]), p.metric.name))
            if not rep.passed:
                problems.append(f"{p.id}: series fails verification {[c.name for c in rep.failures()]}")
    if task in ALIGNMENT_TASKS:
        want = sorted(refs[0].kinds(TASK_CATEGORY[task]))
        if sorted(g["labels"]) != want:
            problems.append(f"labels {g['labels']} != pool kinds {want}")
    elif task in NUMERIC_TASKS:
        p = refs[0]
        try:
            truth = numeric_gold(p, _values(series[p.id]), task, g.get("query", {}))
        except (KeyError, IndexError, AttributeError) as exc:
            return problems + [f"cannot recompute gold: {exc!r}"]
        if not math.isclose(truth, g["value"], rel_tol=1e-12, abs_tol=1e-12):
            problems.append(f"gold {g['value']} != recomputed {truth}")
    elif task == "correlation":
        rel = dict(g["relation"])
        kind = rel.pop("kind")
        members = sorted(p.metric.name for p in refs if has_relation(p, kind, rel))
        if members != sorted(g["labels"]):
            problems.append(f"correlated members {members} != gold {g['labels']}")
    elif task == "cluster":
        if trend_partition(refs) != g["groups"]:
            problems.append("partition does not match trend shapes")
    elif task == "deductive":
        hi = float(np.max(_values(series[refs[0].id])))
        truth = "True" if hi > g["query"]["threshold"] else "False"
        if truth != g["choice"]:
            problems.append(f"deductive gold {g['choice']} != {truth}")
    elif task == "causal":
        f = refs[0].fluctuations[g["query"]["index"]]
        chosen = g["option_text"][LETTERS.index(g["choice"])]
        if chosen != f.kind:
            problems.append(f"causal gold option {chosen!r} != {f.kind!r}")
    elif task == "comparison":
        v = _values(series[refs[0].id])
        a, b = g["query"]["a"], g["query"]["b"]
        truth = "A" if np.mean(v[a[0] : a[1]]) > np.mean(v[b[0] : b[1]]) else "B"
        if truth != g["choice"]:
            problems.append(f"comparison gold {g['choice']} != {truth}")
    elif task == "inductive":
        if "facts" in g:
            from .tsevol import eliminate, facts_from_dicts

            verdict = eliminate(facts_from_dicts(g["facts"]), pools)
            if not verdict.accepted:
                problems.append(f"claimed facts rejected: {verdict.reasons}")
        elif g["keywords"] != inductive_keywords(refs[0]):
            problems.append("keywords do not match pool")
    elif task == "instruct_follow":
        tax = registry()
        chosen = g["option_text"][LETTERS.index(g["choice"])]
        if tax.category_of(chosen) != g["query"]["category"]:
            problems.append("instruct-follow gold option has the wrong category")
    else:
        problems.append(f"unknown task {task!r}")
    return problems


def _values(s) -> np.ndarray:
    return np.asarray(getattr(s, "values", s), dtype=float)
