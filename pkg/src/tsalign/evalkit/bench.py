"""Benchmark runner: score a model over a corpus and tabulate the results."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Protocol

import numpy as np

from ..describe import (
    ALIGNMENT_TASKS,
    LETTERS,
    NUMERIC_TASKS,
    TASK_CATEGORY,
    Fact,
    fmt,
    inductive_keywords,
    numeric_gold,
    pool_facts,
    trend_partition,
)
from ..genpool import has_relation
from ..taxonomy import registry
from .metrics import (
    choice_accuracy,
    f1,
    keyword_score,
    pair_f1,
    parse_categorical,
    parse_number,
    parse_partition,
    relative_accuracy,
)


class ModelUnderTest(Protocol):
    def answer(self, prompt: str, record) -> str: ...


def render_prompt(record, digits: int = 4) -> str:
    """The question text with every series inlined as normalized values."""
    return record.document().inline([s.values for s in record.series], digits)


# --- reference models ----------------------------------------------------------------


class PoolEchoOracle:
    """Answers every item from the attribute pools stored with the record.

    It never reads the gold labels' answers, only their query parameters
    (which window, which threshold), so agreement with gold checks that the
    stored labels are reproducible from the pools.
    """

    def answer(self, prompt: str, record) -> str:
        g = record.gold_labels
        pools = [s.attribute_pool() for s in record.series]
        task = record.task
        if task in ALIGNMENT_TASKS:
            return "Labels: " + ", ".join(pools[0].kinds(TASK_CATEGORY[task])) + "."
        if task in NUMERIC_TASKS:
            raw = record.series[0].raw()
            return f"The answer is {numeric_gold(pools[0], raw, task, g.get('query', {}))!r}"
        if task == "correlation":
            rel = dict(g["relation"])
            kind = rel.pop("kind")
            members = sorted(p.metric.name for p in pools if has_relation(p, kind, rel))
            return "Correlated: " + ", ".join(members) + "."
        if task == "cluster":
            return " ".join(f"Group {i + 1}: {', '.join(grp)}." for i, grp in enumerate(trend_partition(pools)))
        if task == "deductive":
            hi = float(np.max(record.series[0].raw()))
            return "True" if hi > g["query"]["threshold"] else "False"
        if task == "comparison":
            v = record.series[0].raw()
            a, b = g["query"]["a"], g["query"]["b"]
            return "Answer: " + ("A" if np.mean(v[a[0] : a[1]]) > np.mean(v[b[0] : b[1]]) else "B")
        if task == "causal":
            kind = pools[0].fluctuations[g["query"]["index"]].kind
            return "Answer: " + LETTERS[g["option_text"].index(kind)]
        if task == "instruct_follow":
            tax = registry()
            return next(LETTERS[i] for i, o in enumerate(g["option_text"])
                        if tax.category_of(o) == g["query"]["category"])
        if task == "inductive":
            if "facts" not in g:
                return "; ".join(inductive_keywords(pools[0]))
            truth = {(f.series_ref, f.kind, f.location): f.value for p in pools for f in pool_facts(p)}
            out = []
            for d in g["facts"]:
                claim = Fact.from_dict(d)
                v = truth.get((claim.series_ref, claim.kind, claim.location), claim.value)
                out.append(v if isinstance(v, str) else fmt(v) if isinstance(v, (int, float)) else "")
            return "; ".join(out)
        return "unknown"


class EndpointModel:
    """Adapter exposing a chat-completion generator as a model under test."""

    def __init__(self, generator):
        self.generator = generator

    def answer(self, prompt: str, record) -> str:
        return self.generator.complete(prompt)


# --- scoring ------------------------------------------------------------------------------


@dataclass
class ScoreRow:
    id: str
    task: str
    metric: str  # f1 | pair_f1 | rel_acc | accuracy | keywords
    score: float
    cause: str  # "" when correct, else unparseable | unknown | wrong | partial | error
    noise_free: bool
    prompt_tokens: int
    answer_tokens: int
    answer: str = ""


def _noise_free(record) -> bool:
    return all(s.pool["noise"]["kind"] == "none" for s in record.series)


def score_answer(record, answer: str) -> tuple[str, float, str]:
    """(metric name, score in [0, 1], failure cause)."""
    g = record.gold_labels
    kind = g["type"]
    text = answer or ""
    if kind == "labels":
        if g["category"] == "series":
            got = parse_categorical(text, g["vocab"], synonyms={})
        else:
            got = parse_categorical(text, registry().vocab(g["category"]))
        metric, score = "f1", f1(got, g["labels"])
        unparsed = not got and bool(g["labels"])
    elif kind == "partition":
        groups = parse_partition(text, g["vocab"])
        metric, score = "pair_f1", pair_f1(groups, g["groups"])
        unparsed = not groups
    elif kind == "number":
        v = parse_number(text)
        metric, score = "rel_acc", relative_accuracy(v, g["value"], g.get("value_range"))
        unparsed = v is None
    elif kind == "choice":
        s, unparsed = choice_accuracy(text, g["choice"], g.get("options"))
        metric, score = "accuracy", float(s)
    elif kind == "keywords":
        metric, score = "keywords", keyword_score(text, g["keywords"])
        unparsed = score == 0.0
    else:
        raise ValueError(f"unknown gold type {kind!r}")
    if score >= 1.0 - 1e-9:
        cause = ""
    elif text.strip().lower().startswith("unknown"):
        cause = "unknown"
    elif unparsed:
        cause = "unparseable"
    else:
        cause = "partial" if score > 0 else "wrong"
    return metric, float(score), cause


def score_record(record, model: ModelUnderTest) -> ScoreRow:
    prompt = render_prompt(record)
    try:
        ans = model.answer(prompt, record)
        metric, score, cause = score_answer(record, ans)
    except Exception as exc:  # a failing model or endpoint scores zero on this item
        ans, metric, score, cause = f"<error: {exc!r}>", "error", 0.0, "error"
    return ScoreRow(record.id, record.task, metric, score, cause, _noise_free(record),
                    len(prompt.split()), len(ans.split()), ans)


# --- report ----------------------------------------------------------------------------------

COLUMNS = (
    ("Trend Cate", ("trend",)),
    ("Season Cate", ("season",)),
    ("Noise Cate", ("noise",)),
    ("Local Cate", ("local",)),
    ("Trend Num", ("numeric.max", "numeric.min", "numeric.value_at", "numeric.segment_avg")),
    ("Season Num", ("numeric.period",)),
    ("Local Num", ("numeric.fluct_amplitude", "numeric.fluct_position")),
    ("Corr", ("correlation",)),
    ("Clus", ("cluster",)),
    ("Inductive", ("inductive",)),
    ("Deductive", ("deductive",)),
    ("Causal", ("causal",)),
    ("Comparison", ("comparison",)),
    ("Instruct", ("instruct_follow",)),
)


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else float("nan")


@dataclass
class EvalReport:
    rows: list[ScoreRow]
    model: str = ""
    table: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self.recompute()

    def recompute(self) -> "EvalReport":
        """Rebuild table and summary from the rows alone."""
        table = {}
        for name, tasks in COLUMNS:
            scores = [r.score for r in self.rows if r.task in tasks]
            if scores:
                table[name] = {"n": len(scores), "score": _mean(scores)}
        table["Overall"] = {"n": len(self.rows), "score": _mean(v["score"] for v in table.values())}
        cate = [r.score for r in self.rows if r.metric in ("f1", "pair_f1")]
        num = [r for r in self.rows if r.metric == "rel_acc"]
        causes: dict[str, int] = {}
        for r in self.rows:
            if r.cause:
                causes[r.cause] = causes.get(r.cause, 0) + 1
        self.table = table
        self.summary = {
            "items": len(self.rows),
            "categorical_f1": _mean(cate),
            "numeric_rel_acc": _mean(r.score for r in num),
            "numeric_rel_acc_noise_free": _mean(r.score for r in num if r.noise_free),
            "overall": table["Overall"]["score"],
            "failed": sum(1 for r in self.rows if r.score == 0.0),
            "failures_by_cause": dict(sorted(causes.items())),
            "mean_prompt_tokens": _mean(r.prompt_tokens for r in self.rows),
            "mean_answer_tokens": _mean(r.answer_tokens for r in self.rows),
        }
        return self

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(r.score == 0.0 for r in self.rows)

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, float) and math.isnan(x):
                return None
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            return x

        body = {"model": self.model, "summary": clean(self.summary), "table": clean(self.table),
                "rows": [asdict(r) for r in self.rows]}
        return json.dumps(body, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["column", "n", "score"])
        for name, v in self.table.items():
            w.writerow([name, v["n"], f"{v['score']:.6f}"])
        cate = [r for r in self.rows if r.metric in ("f1", "pair_f1")]
        num = [r for r in self.rows if r.metric == "rel_acc"]
        nf = [r for r in num if r.noise_free]
        for name, group, key in (("Categorical F1", cate, "categorical_f1"),
                                 ("Numeric RelAcc", num, "numeric_rel_acc"),
                                 ("Numeric RelAcc (noise-free)", nf, "numeric_rel_acc_noise_free")):
            if group:
                w.writerow([name, len(group), f"{self.summary[key]:.6f}"])
        return buf.getvalue()

    def format_table(self) -> str:
        width = max(len(k) for k in self.table) if self.table else 8
        lines = [f"{'column':<{width}}  {'n':>5}  score"]
        for name, v in self.table.items():
            lines.append(f"{name:<{width}}  {v['n']:>5}  {v['score']:.4f}")
        return "\n".join(lines)


def run_benchmark(records: Iterable, model: ModelUnderTest, in_flight_limit: int = 4, name: str = "") -> EvalReport:
    """Score ``model`` on every record; rows come back sorted by id."""
    records = list(getattr(records, "records", records))
    if in_flight_limit < 1:
        raise ValueError("in_flight_limit must be >= 1")
    if in_flight_limit == 1:
        rows = [score_record(r, model) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=in_flight_limit) as pool:
            rows = list(pool.map(lambda r: score_record(r, model), records))
    rows.sort(key=lambda r: r.id)
    return EvalReport(rows, name or type(model).__name__)
