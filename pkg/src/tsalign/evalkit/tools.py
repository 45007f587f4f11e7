"""Perfect tools with controlled accuracy, and a scripted agent that uses them.

Whether a call is truthful is decided by a uniform draw keyed by
(seed, query), independent of the accuracy. Raising the accuracy therefore
only ever turns corrupted calls into truthful ones, which makes accuracy
sweeps monotone item by item rather than just in expectation.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..describe import LETTERS, fmt, trend_partition
from ..genpool import AttributePool, has_relation
from ..rng import make_rng, split_seed
from ..taxonomy import FLUCT, NOISE, NONE_LABEL, SEASON, TREND, registry

TOOL_KINDS = ("trend", "seasonality", "fluctuation", "correlation", "point_value", "range_stats")


@dataclass(frozen=True)
class ToolQuery:
    kind: str
    series_ref: tuple[str, ...]
    params: tuple = ()  # sorted (key, value) pairs

    @classmethod
    def make(cls, kind: str, refs, **params) -> "ToolQuery":
        refs = (refs,) if isinstance(refs, str) else tuple(refs)
        return cls(kind, refs, tuple(sorted(params.items())))

    def key(self) -> str:
        return json.dumps([self.kind, list(self.series_ref), [list(p) for p in self.params]])


@dataclass
class ToolAnswer:
    kind: str
    series_ref: tuple[str, ...]
    payload: dict
    truthful: bool


def _truth(query: ToolQuery, pools: Mapping[str, AttributePool], series: Mapping[str, np.ndarray]) -> dict:
    params = dict(query.params)
    refs = [pools[r] for r in query.series_ref]
    pool = refs[0]
    if query.kind == "trend":
        return {
            "kinds": pool.kinds(TREND),
            "segments": [
                {"kind": s.kind, "start": s.start_idx, "end": s.end_idx,
                 "start_value": s.start_value, "end_value": s.end_value, "slope": s.slope}
                for s in pool.trend
            ],
        }
    if query.kind == "seasonality":
        se = pool.seasonality
        return {
            "kind": se.kind if se else NONE_LABEL,
            "period": se.period if se else None,
            "amplitude": se.amplitude if se else None,
            "noise_kind": pool.noise.kind,
            "noise_scale": pool.noise.scale,
        }
    if query.kind == "fluctuation":
        return {
            "kinds": pool.kinds(FLUCT),
            "items": [
                {"kind": f.kind, "position": f.position, "duration": f.duration, "amplitude": f.amplitude}
                for f in pool.fluctuations
            ],
        }
    if query.kind == "correlation":
        out = {"partition": trend_partition(refs)}
        if "relation" in params:
            rel = dict(json.loads(params["relation"]))
            kind = rel.pop("kind")
            out["members"] = sorted(p.metric.name for p in refs if has_relation(p, kind, rel))
        return out
    values = np.asarray(series[pool.id], dtype=float)
    if query.kind == "point_value":
        return {"value": float(values[int(params["t"])])}
    if query.kind == "range_stats":
        w = values[int(params.get("start", 0)) : int(params.get("end", len(values)))]
        return {"max": float(w.max()), "argmax": int(np.argmax(w)), "min": float(w.min()),
                "argmin": int(np.argmin(w)), "mean": float(w.mean())}
    raise ValueError(f"unknown tool kind {query.kind!r}")


def _perturb(rng, value: float, span: float) -> float:
    """Move ``value`` by 20-100% of its size (of ``span`` when it is zero)."""
    size = abs(value) if value != 0 else max(abs(span), 1.0)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return value + sign * float(rng.uniform(0.2, 1.0)) * size


def _wrong_kinds(rng, kinds: list[str], category: str) -> list[str]:
    vocab = registry().ids(category) if category == TREND else registry().vocab(category)
    allowed = [k for k in vocab if k not in kinds]
    out = list(kinds)
    i = int(rng.integers(len(out)))
    if not allowed:  # every kind is present: drop one instead
        return out[:i] + out[i + 1 :]
    out[i] = allowed[int(rng.integers(len(allowed)))]
    return list(dict.fromkeys(out))


def _corrupt(rng, kind: str, truth: dict, span: float) -> dict:
    out = json.loads(json.dumps(truth))
    if kind == "trend":
        out["kinds"] = _wrong_kinds(rng, truth["kinds"], TREND)
        for s in out["segments"]:
            for key in ("start_value", "end_value", "slope"):
                s[key] = _perturb(rng, s[key], span)
    elif kind == "seasonality":
        out["kind"] = _wrong_kinds(rng, [truth["kind"]], SEASON)[0]
        out["noise_kind"] = _wrong_kinds(rng, [truth["noise_kind"]], NOISE)[0]
        if truth["period"] is not None:
            out["period"] = max(2, int(round(_perturb(rng, truth["period"], span))))
            if out["period"] == truth["period"]:
                out["period"] += 1
    elif kind == "fluctuation":
        out["kinds"] = _wrong_kinds(rng, truth["kinds"], FLUCT)
        for item in out["items"]:
            item["amplitude"] = _perturb(rng, item["amplitude"], span)
            pos = int(round(_perturb(rng, item["position"], 10.0)))
            item["position"] = pos if pos != item["position"] else pos + 1
    elif kind == "correlation":
        groups = [list(g) for g in truth["partition"]]
        names = sorted(n for g in groups for n in g)
        if len(groups) > 1:
            out["partition"] = [names]
        else:
            out["partition"] = [[n] for n in names]
        if "members" in truth:
            dropped = list(truth["members"])
            others = [n for n in names if n not in dropped]
            if others:
                dropped.append(others[int(rng.integers(len(others)))])
            if len(dropped) > 1:
                dropped.pop(0)
            out["members"] = sorted(dropped)
    elif kind == "point_value":
        out["value"] = _perturb(rng, truth["value"], span)
    elif kind == "range_stats":
        for key in ("max", "min", "mean"):
            out[key] = _perturb(rng, truth[key], span)
    return out


def perfect_tool(
    query: ToolQuery,
    pools: Mapping[str, AttributePool],
    accuracy: float,
    seed: int,
    series: Mapping[str, np.ndarray] | None = None,
) -> ToolAnswer:
    """Exact pool truth with probability ``accuracy``, otherwise a plausible corruption."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must be in [0, 1]")
    unknown = [r for r in query.series_ref if r not in pools]
    if unknown or not query.series_ref:
        raise ValueError(f"unknown series refs {unknown or list(query.series_ref)}")
    truth = _truth(query, pools, series or {})
    key = query.key()
    u = float(make_rng(split_seed(seed, "tool", key)).random())
    if u < accuracy:
        return ToolAnswer(query.kind, query.series_ref, truth, True)
    pool = pools[query.series_ref[0]]
    span = pool.metric.span
    payload = _corrupt(make_rng(split_seed(seed, "corrupt", key)), query.kind, truth, span)
    return ToolAnswer(query.kind, query.series_ref, payload, False)


# --- scripted agent ----------------------------------------------------------------------------

_TASK_TOOL = {
    "trend": "trend",
    "season": "seasonality",
    "noise": "seasonality",
    "local": "fluctuation",
    "numeric.max": "range_stats",
    "numeric.min": "range_stats",
    "numeric.segment_avg": "range_stats",
    "numeric.value_at": "point_value",
    "numeric.period": "seasonality",
    "numeric.fluct_amplitude": "fluctuation",
    "numeric.fluct_position": "fluctuation",
    "correlation": "correlation",
    "cluster": "correlation",
    "deductive": "range_stats",
    "comparison": "range_stats",
    "causal": "fluctuation",
}


@dataclass
class ToolAnswerer:
    """Reference model answering only from perfect-tool calls.

    ``answer`` needs the record (for its pools and query parameters); tasks
    whose tool is disabled are answered "unknown".
    """

    accuracy: float
    tools: frozenset = frozenset(TOOL_KINDS)
    seed: int = 0
    calls: list[ToolAnswer] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.tools = frozenset(self.tools)
        if not self.tools:
            raise ValueError("tool subset must be non-empty")
        unknown = self.tools - set(TOOL_KINDS)
        if unknown:
            raise ValueError(f"unknown tools {sorted(unknown)}")

    def truthful_fraction(self) -> float:
        return sum(c.truthful for c in self.calls) / len(self.calls) if self.calls else float("nan")

    def _call(self, record, kind: str, refs, **params) -> ToolAnswer:
        q = ToolQuery.make(kind, refs, **params)
        pools = record.pools()
        series = {s.pool["id"]: s.raw() for s in record.series}
        ans = perfect_tool(q, pools, self.accuracy, split_seed(self.seed, record.id), series)
        with self._lock:
            self.calls.append(ans)
        return ans

    def answer(self, prompt: str, record) -> str:
        task = record.task
        g = record.gold_labels
        refs = [s.pool["id"] for s in record.series]
        if task == "instruct_follow":
            opts = g["option_text"]
            cat = g["query"]["category"]
            tax = registry()
            return next(LETTERS[i] for i, o in enumerate(opts) if tax.category_of(o) == cat)
        needed = {"trend", "seasonality", "fluctuation"} if task == "inductive" else {_TASK_TOOL[task]}
        if not needed <= self.tools:
            return "unknown"
        q = g.get("query", {})
        if task == "trend":
            return "Trend: " + ", ".join(self._call(record, "trend", refs).payload["kinds"]) + "."
        if task in ("season", "noise"):
            p = self._call(record, "seasonality", refs).payload
            return f"Label: {p['kind'] if task == 'season' else p['noise_kind']}."
        if task == "local":
            return "Local fluctuations: " + ", ".join(self._call(record, "fluctuation", refs).payload["kinds"]) + "."
        if task in ("numeric.max", "numeric.min"):
            p = self._call(record, "range_stats", refs).payload
            return f"The answer is {p['max' if task == 'numeric.max' else 'min']!r}"
        if task == "numeric.segment_avg":
            p = self._call(record, "range_stats", refs, start=q["start"], end=q["end"]).payload
            return f"The answer is {p['mean']!r}"
        if task == "numeric.value_at":
            return f"The answer is {self._call(record, 'point_value', refs, t=q['t']).payload['value']!r}"
        if task == "numeric.period":
            return f"The answer is {self._call(record, 'seasonality', refs).payload['period']!r}"
        if task in ("numeric.fluct_amplitude", "numeric.fluct_position"):
            item = self._call(record, "fluctuation", refs).payload["items"][q["index"]]
            v = abs(item["amplitude"]) if task == "numeric.fluct_amplitude" else item["position"]
            return f"The answer is {v!r}"
        if task == "correlation":
            rel = json.dumps(g["relation"], sort_keys=True)
            p = self._call(record, "correlation", refs, relation=rel).payload
            return "Correlated: " + ", ".join(p["members"]) + "."
        if task == "cluster":
            p = self._call(record, "correlation", refs).payload
            return " ".join(f"Group {i + 1}: {', '.join(grp)}." for i, grp in enumerate(p["partition"]))
        if task == "deductive":
            p = self._call(record, "range_stats", refs).payload
            return "True" if p["max"] > q["threshold"] else "False"
        if task == "comparison":
            a = self._call(record, "range_stats", refs, start=q["a"][0], end=q["a"][1]).payload
            b = self._call(record, "range_stats", refs, start=q["b"][0], end=q["b"][1]).payload
            return "Answer: " + ("A" if a["mean"] > b["mean"] else "B")
        if task == "causal":
            items = self._call(record, "fluctuation", refs).payload["items"]
            kind = items[q["index"]]["kind"]
            opts = g["option_text"]
            return "Answer: " + (LETTERS[opts.index(kind)] if kind in opts else "unknown")
        if task == "inductive":
            parts: list[str] = []
            for ref in refs:
                t = self._call(record, "trend", ref).payload
                s = self._call(record, "seasonality", ref).payload
                f = self._call(record, "fluctuation", ref).payload
                parts += t["kinds"]
                parts.append(s["kind"] if s["kind"] != NONE_LABEL else "no seasonality")
                parts.append("noise-free" if s["noise_kind"] == NONE_LABEL else f"{s['noise_kind']} noise")
                parts += f["kinds"]
                parts += [s["kind"], s["noise_kind"]]  # bare labels, "none" included
                nums = [v for seg in t["segments"] for v in (seg["start_value"], seg["end_value"], seg["slope"])]
                nums += [1 if seg["slope"] > 0 else -1 if seg["slope"] < 0 else 0 for seg in t["segments"]]
                nums += [v for v in (s["period"], s["amplitude"]) if v is not None]
                if s["noise_kind"] != NONE_LABEL:
                    nums.append(s["noise_scale"])
                nums += [v for item in f["items"] for v in (item["position"], item["duration"], item["amplitude"])]
                parts += [fmt(v) for v in nums]
            return "; ".join(parts)
        return "unknown"


def tool_answerer(accuracy: float, tools: Sequence[str] = TOOL_KINDS, seed: int = 0) -> ToolAnswerer:
    return ToolAnswerer(accuracy, frozenset(tools), seed)


__all__ = [
    "TOOL_KINDS",
    "ToolAnswer",
    "ToolAnswerer",
    "ToolQuery",
    "perfect_tool",
    "tool_answerer",
]
