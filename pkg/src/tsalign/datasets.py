"""Prompt documents, corpus composition and JSONL persistence.

One JSONL line is one record; the ground truth (pools, normalization
parameters, correlation groups) travels inside the record. Writing a corpus
also writes ``<stem>.manifest.json`` next to it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .describe import (
    ALIGNMENT_TASKS,
    NUMERIC_TASKS,
    REASONING_TASKS,
    SLOT,
    QARecord,
    check_gold,
    gen_alignment_qa,
    gen_instruct_follow,
    gen_mts_qa,
    gen_numeric_qa,
    gen_reasoning_qa,
)
from .genpool import (
    LOCAL,
    SHAPE,
    MAX_LENGTH,
    MIN_LENGTH,
    AttributePool,
    CorrelationPool,
    build_correlation_group,
    sample_pool,
    sample_unrelated_pool,
    select_subset,
)
from .rng import make_rng, split_seed
from .synth import NormalizedSeries, TimeSeries, denormalize, normalize, render
from .taxonomy import MetricSpec, metric_catalog

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DATASETS = ("uts", "mts_shape", "mts_local", "tsevol", "instruct_follow", "reasoning")
REQUIRED = ("id", "stage", "task", "question", "answer", "gold_labels", "series",
            "prompt_segments", "provenance", "seed")


# --- prompt documents -----------------------------------------------------------


@dataclass
class PromptDocument:
    segments: list[dict]  # {"type": "text", "text": ...} or {"type": "series", "index": i}
    series_meta: list[dict]

    def header(self, i: int) -> str:
        m = self.series_meta[i]
        return (f"[series {i}: {m['name']}, length {m['length']}, "
                f"value scaling {m['value_scaling']!r}, value offset {m['value_offset']!r}]")

    def flat(self, placeholder: str = SLOT) -> str:
        """Text with one metadata header plus one placeholder per series."""
        out = []
        for seg in self.segments:
            if seg["type"] == "text":
                out.append(seg["text"])
            else:
                out.append(f"{self.header(seg['index'])} {placeholder}")
        return "".join(out)

    def inline(self, values: Sequence[Sequence[float]], digits: int = 4) -> str:
        """Flat text with each placeholder replaced by the normalized values."""
        out = []
        for seg in self.segments:
            if seg["type"] == "text":
                out.append(seg["text"])
            else:
                vals = " ".join(f"{v:.{digits}f}" for v in values[seg["index"]])
                out.append(f"{self.header(seg['index'])} <values> {vals} </values>")
        return "".join(out)


def assemble_prompt(
    question: str,
    series: Sequence[NormalizedSeries],
    meta: Sequence[Mapping] | None = None,
) -> PromptDocument:
    """Split ``question`` at its ``<ts>`` slots and attach one header per series."""
    pieces = question.split(SLOT)
    if len(pieces) - 1 != len(series):
        raise ValueError(f"question has {len(pieces) - 1} series slots but {len(series)} series were given")
    series_meta = []
    for i, s in enumerate(series):
        extra = dict(meta[i]) if meta else {}
        series_meta.append({
            "name": extra.get("name", s.name),
            "length": int(extra.get("length", len(s.values))),
            "value_scaling": float(s.value_scaling),
            "value_offset": float(s.value_offset),
        })
    segments: list[dict] = []
    for i, text in enumerate(pieces):
        if text:
            segments.append({"type": "text", "text": text})
        if i < len(series):
            segments.append({"type": "series", "index": i})
    return PromptDocument(segments, series_meta)


# --- records ------------------------------------------------------------------------


@dataclass
class SeriesEntry:
    name: str
    length: int
    values: list[float]  # normalized
    value_scaling: float
    value_offset: float
    pool: dict

    def normalized(self) -> NormalizedSeries:
        return NormalizedSeries(np.asarray(self.values, dtype=float), self.value_scaling, self.value_offset, self.name)

    def raw(self) -> np.ndarray:
        return denormalize(self.normalized()).values

    def attribute_pool(self) -> AttributePool:
        return AttributePool.from_dict(self.pool)


@dataclass
class Record:
    id: str
    stage: str
    dataset: str
    task: str
    question: str
    answer: str
    gold_labels: dict
    series: list[SeriesEntry]
    prompt_segments: list[dict]
    provenance: dict
    seed: int
    correlation_pool: list[dict] | None = None
    extra: dict = field(default_factory=dict)  # unknown fields, kept verbatim

    def to_json(self) -> dict:
        d: dict[str, Any] = {
            "schema": SCHEMA_VERSION,
            "id": self.id,
            "stage": self.stage,
            "dataset": self.dataset,
            "task": self.task,
            "question": self.question,
            "answer": self.answer,
            "gold_labels": self.gold_labels,
            "series": [asdict(s) for s in self.series],
            "prompt_segments": self.prompt_segments,
            "provenance": self.provenance,
            "seed": self.seed,
        }
        if self.correlation_pool is not None:
            d["correlation_pool"] = self.correlation_pool
        d.update(self.extra)
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "Record":
        missing = [k for k in REQUIRED if k not in d]
        if missing:
            raise ValueError(f"missing fields {missing}")
        if d.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        known = set(REQUIRED) | {"schema", "dataset", "correlation_pool"}
        series = [
            SeriesEntry(s["name"], int(s["length"]), list(s["values"]), float(s["value_scaling"]),
                        float(s["value_offset"]), dict(s["pool"]))
            for s in d["series"]
        ]
        return cls(
            id=d["id"], stage=d["stage"], dataset=d.get("dataset", ""), task=d["task"],
            question=d["question"], answer=d["answer"], gold_labels=dict(d["gold_labels"]),
            series=series, prompt_segments=list(d["prompt_segments"]),
            provenance=dict(d["provenance"]), seed=int(d["seed"]),
            correlation_pool=d.get("correlation_pool"),
            extra={k: v for k, v in d.items() if k not in known},
        )

    def qa(self) -> QARecord:
        return QARecord(self.id, self.task, self.question, self.answer, self.gold_labels,
                        [s.pool["id"] for s in self.series], self.provenance)

    def pools(self) -> dict[str, AttributePool]:
        return {s.pool["id"]: s.attribute_pool() for s in self.series}

    def document(self) -> PromptDocument:
        meta = [{"name": s.name, "length": s.length, "value_scaling": s.value_scaling,
                 "value_offset": s.value_offset} for s in self.series]
        return PromptDocument(self.prompt_segments, meta)

    def correlation_pools(self) -> list[CorrelationPool]:
        return [CorrelationPool.from_dict(c) for c in self.correlation_pool or []]


def make_record(
    qa: QARecord,
    pools: Sequence[AttributePool],
    series: Sequence[TimeSeries],
    stage: str,
    dataset: str,
    seed: int,
    corr: Sequence[CorrelationPool] | None = None,
) -> Record:
    entries, normed = [], []
    for p, s in zip(pools, series):
        n = normalize(s)
        normed.append(n)
        entries.append(SeriesEntry(p.metric.name, p.length, [float(v) for v in n.values],
                                   n.value_scaling, n.value_offset, p.to_dict()))
    doc = assemble_prompt(qa.question, normed)
    return Record(
        id=qa.id, stage=stage, dataset=dataset, task=qa.task, question=qa.question,
        answer=qa.answer, gold_labels=qa.gold_labels, series=entries,
        prompt_segments=doc.segments, provenance=dict(qa.provenance), seed=int(seed),
        correlation_pool=None if corr is None else [c.to_dict() for c in corr],
    )


def verify_record(rec: Record, run_verify: bool = False) -> list[str]:
    """Re-derive gold labels from the embedded pools and check the stored
    normalization parameters against a fresh render."""
    problems = []
    pools = rec.pools()
    raw = {}
    for s in rec.series:
        pool = pools[s.pool["id"]]
        fresh = render(pool).values
        raw[pool.id] = fresh
        stored = s.raw()
        scale = max(float(np.max(np.abs(fresh))), 1e-300)
        if len(stored) != len(fresh) or np.max(np.abs(stored - fresh)) > 1e-9 * scale:
            problems.append(f"{pool.id}: stored series does not denormalize to the rendered pool")
    problems += check_gold(rec.qa(), pools, raw, run_verify=run_verify)
    if rec.task in ("correlation", "cluster"):
        from .genpool import verify_correlation

        for corr in rec.correlation_pools():
            problems += verify_correlation(corr, pools)
    return problems


# --- corpus specs ------------------------------------------------------------------------


@dataclass
class CorpusSpec:
    stage: str = "alignment"  # alignment | sft
    uts: int = 0
    mts_shape: int = 0
    mts_local: int = 0
    tsevol: int = 0
    instruct_follow: int = 0
    reasoning: int = 0  # template reasoning seeds emitted as-is
    alignment_mix_fraction: float = 0.30
    mix_mode: str = "alignment"  # alignment: fraction of the alignment corpus; sft: of the final corpus
    length_min: int = MIN_LENGTH
    length_max: int = MAX_LENGTH
    numeric_fraction: float = 0.5  # share of uts records asking numeric questions
    mts_members: tuple[int, int] = (2, 5)
    mts_independent: tuple[int, int] = (0, 2)
    evol_rounds: int = 1
    evol_seed_alignment_fraction: float = 0.5
    master_seed: int = 0

    def problems(self) -> list[str]:
        out = []
        if self.stage not in ("alignment", "sft"):
            out.append(f"stage must be alignment or sft, got {self.stage!r}")
        for name in DATASETS:
            if getattr(self, name) < 0:
                out.append(f"{name} count must be >= 0")
        if self.stage == "alignment" and self.tsevol:
            out.append("alignment stage must have tsevol = 0")
        if not 0.0 <= self.alignment_mix_fraction < 1.0:
            out.append("alignment_mix_fraction must be in [0, 1)")
        if self.mix_mode not in ("alignment", "sft"):
            out.append(f"mix_mode must be alignment or sft, got {self.mix_mode!r}")
        if not MIN_LENGTH <= self.length_min <= self.length_max <= MAX_LENGTH:
            out.append(f"length range must lie within [{MIN_LENGTH}, {MAX_LENGTH}]")
        if not 0.0 <= self.numeric_fraction <= 1.0:
            out.append("numeric_fraction must be in [0, 1]")
        lo, hi = self.mts_members
        if not 2 <= lo <= hi <= 16:
            out.append("mts_members must satisfy 2 <= lo <= hi <= 16")
        lo, hi = self.mts_independent
        if not 0 <= lo <= hi:
            out.append("mts_independent must satisfy 0 <= lo <= hi")
        if self.evol_rounds < 1:
            out.append("evol_rounds must be >= 1")
        return out

    def mix_count(self, alignment_size: int) -> int:
        f = self.alignment_mix_fraction
        if f == 0:
            return 0
        if self.mix_mode == "alignment":
            return min(alignment_size, int(round(f * alignment_size)))
        own = self.tsevol + self.instruct_follow + self.reasoning
        return min(alignment_size, int(round(f / (1.0 - f) * own)))


@dataclass
class Corpus:
    records: list[Record]
    manifest: dict

    def __len__(self):
        return len(self.records)

    def lines(self) -> list[str]:
        return [json.dumps(r.to_json(), ensure_ascii=False) for r in self.records]

    def __eq__(self, other):
        return isinstance(other, Corpus) and self.lines() == other.lines() and self.manifest == other.manifest

    def by_id(self) -> dict[str, Record]:
        return {r.id: r for r in self.records}


def build_manifest(records: Sequence[Record], stage: str, seed: int, spec: CorpusSpec | None = None) -> dict:
    tasks: dict[str, int] = {}
    datasets: dict[str, int] = {}
    for r in records:
        tasks[r.task] = tasks.get(r.task, 0) + 1
        datasets[r.dataset] = datasets.get(r.dataset, 0) + 1
    m = {
        "schema": SCHEMA_VERSION,
        "stage": stage,
        "total": len(records),
        "datasets": dict(sorted(datasets.items())),
        "tasks": dict(sorted(tasks.items())),
        "seed": seed,
        "version": __version__,
    }
    if spec is not None:
        m["spec"] = _jsonable(asdict(spec))
    return m


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# --- composition ----------------------------------------------------------------------------


class _Context:
    def __init__(self, spec: CorpusSpec, catalog: Sequence[MetricSpec]):
        self.spec = spec
        self.catalog = list(catalog)

    def rng(self, *labels):
        return make_rng(split_seed(self.spec.master_seed, *labels))

    def length(self, rng) -> int:
        return int(rng.integers(self.spec.length_min, self.spec.length_max + 1))

    def metrics(self, rng, k: int) -> list[MetricSpec]:
        idx = rng.choice(len(self.catalog), size=k, replace=False)
        return [self.catalog[int(i)] for i in idx]


def _uts_record(ctx: _Context, i: int) -> Record:
    spec = ctx.spec
    rng = ctx.rng("uts", i)
    metric = ctx.metrics(rng, 1)[0]
    seed = split_seed(spec.master_seed, "uts-pool", i)
    pool = sample_pool(select_subset(metric), ctx.length(rng), seed)
    series = render(pool)
    tseed = split_seed(spec.master_seed, "uts-template", i)
    qa = None
    if rng.random() < spec.numeric_fraction:
        order = [NUMERIC_TASKS[int(j)] for j in rng.permutation(len(NUMERIC_TASKS))]
        for task in order:
            qa = gen_numeric_qa(pool, series, task, tseed)
            if qa is not None:
                break
    if qa is None:
        task = ALIGNMENT_TASKS[int(rng.integers(len(ALIGNMENT_TASKS)))]
        qa = gen_alignment_qa(pool, series, task, tseed)
    return make_record(qa, [pool], [series], spec.stage, "uts", tseed)


def _mts_record(ctx: _Context, kind: str, i: int) -> Record:
    spec = ctx.spec
    name = "mts_shape" if kind == SHAPE else "mts_local"
    rng = ctx.rng(name, i)
    n_members = int(rng.integers(spec.mts_members[0], spec.mts_members[1] + 1))
    n_indep = int(rng.integers(spec.mts_independent[0], spec.mts_independent[1] + 1))
    length = ctx.length(rng)
    metrics = ctx.metrics(rng, n_members + n_indep)
    subsets = [select_subset(m) for m in metrics]
    gseed = split_seed(spec.master_seed, name, "group", i)
    corr, pools = build_correlation_group(kind, n_members, subsets[:n_members], length, gseed)
    for j, sub in enumerate(subsets[n_members:]):
        pools.append(sample_unrelated_pool(sub, length, split_seed(gseed, "independent", j), [corr]))
    order = [int(j) for j in rng.permutation(len(pools))]
    pools = [pools[j] for j in order]
    series = [render(p) for p in pools]
    task = "correlation"
    if kind == SHAPE and rng.random() < 0.5:
        task = "cluster"
    tseed = split_seed(spec.master_seed, name, "template", i)
    qa = gen_mts_qa(corr, pools, series, task, tseed)
    return make_record(qa, pools, series, spec.stage, name, tseed, [corr])


def _instruct_record(ctx: _Context, i: int) -> Record:
    tseed = split_seed(ctx.spec.master_seed, "instruct_follow", i)
    qa = gen_instruct_follow(tseed)
    return make_record(qa, [], [], ctx.spec.stage, "instruct_follow", tseed)


def _seed_qa(ctx: _Context, i: int):
    """A univariate seed for evolution plus its pool and series."""
    spec = ctx.spec
    rng = ctx.rng("evol-seed", i)
    metric = ctx.metrics(rng, 1)[0]
    pseed = split_seed(spec.master_seed, "evol-pool", i)
    pool = sample_pool(select_subset(metric), ctx.length(rng), pseed)
    series = render(pool)
    tseed = split_seed(spec.master_seed, "evol-template", i)
    qa = None
    if rng.random() >= spec.evol_seed_alignment_fraction:
        for j in rng.permutation(len(REASONING_TASKS)):
            qa = gen_reasoning_qa(pool, series, REASONING_TASKS[int(j)], tseed)
            if qa is not None:
                break
    if qa is None:
        task = ALIGNMENT_TASKS[int(rng.integers(len(ALIGNMENT_TASKS)))]
        qa = gen_alignment_qa(pool, series, task, tseed)
    return qa, pool, series, tseed


def _reasoning_record(ctx: _Context, i: int) -> Record:
    spec = ctx.spec
    rng = ctx.rng("reasoning", i)
    metric = ctx.metrics(rng, 1)[0]
    pool = sample_pool(select_subset(metric), ctx.length(rng), split_seed(spec.master_seed, "reasoning-pool", i))
    series = render(pool)
    tseed = split_seed(spec.master_seed, "reasoning-template", i)
    for j in rng.permutation(len(REASONING_TASKS)):
        qa = gen_reasoning_qa(pool, series, REASONING_TASKS[int(j)], tseed)
        if qa is not None:
            return make_record(qa, [pool], [series], spec.stage, "reasoning", tseed)
    raise RuntimeError("no reasoning template applies")  # inductive always applies


def _tsevol_records(ctx: _Context, count: int, generator) -> tuple[list[Record], dict]:
    from .tsevol import MockGenerator, run_evolution

    gen = generator or MockGenerator()
    spec = ctx.spec
    out: list[Record] = []
    stats = {"attempted": 0, "accepted": 0, "errors": 0}
    i = 0
    batch = 32
    while len(out) < count:
        items = [_seed_qa(ctx, j) for j in range(i, i + batch)]
        i += batch
        seeds = [qa for qa, _, _, _ in items]
        pools = {pool.id: pool for _, pool, _, _ in items}
        by_pool = {pool.id: (pool, series, tseed) for _, pool, series, tseed in items}
        res = run_evolution(seeds, pools, spec.evol_rounds, gen,
                            split_seed(spec.master_seed, "evolution", i), in_flight=1)
        stats["attempted"] += res.attempted
        stats["accepted"] += res.accepted
        stats["errors"] += len(res.errors)
        for child in res.records:
            if len(out) == count:
                break
            pool, series, tseed = by_pool[child.series_refs[0]]
            out.append(make_record(child, [pool], [series], spec.stage, "tsevol", tseed))
        if i > 100 * max(count, 1) + batch:
            raise RuntimeError("evolution acceptance too low to reach the requested count")
    return out, stats


def compose_corpus(
    spec: CorpusSpec,
    alignment_corpus: Corpus | None = None,
    generator=None,
    catalog: Sequence[MetricSpec] | None = None,
) -> Corpus:
    """Build a stage corpus; a pure function of ``spec`` (and its inputs)."""
    problems = spec.problems()
    if problems:
        raise ValueError("invalid corpus spec: " + "; ".join(problems))
    ctx = _Context(spec, catalog or metric_catalog())
    records: list[Record] = []
    records += [_uts_record(ctx, i) for i in range(spec.uts)]
    records += [_mts_record(ctx, SHAPE, i) for i in range(spec.mts_shape)]
    records += [_mts_record(ctx, LOCAL, i) for i in range(spec.mts_local)]
    records += [_reasoning_record(ctx, i) for i in range(spec.reasoning)]
    evol_stats = None
    if spec.tsevol:
        evolved, evol_stats = _tsevol_records(ctx, spec.tsevol, generator)
        records += evolved
    records += [_instruct_record(ctx, i) for i in range(spec.instruct_follow)]
    mixed = 0
    if spec.stage == "sft" and spec.alignment_mix_fraction > 0:
        if alignment_corpus is None:
            raise ValueError("sft stage with alignment_mix_fraction > 0 needs an alignment corpus")
        mixed = spec.mix_count(len(alignment_corpus))
        rng = ctx.rng("mix")
        idx = sorted(int(j) for j in rng.choice(len(alignment_corpus), size=mixed, replace=False))
        for j in idx:
            src = alignment_corpus.records[j]
            d = src.to_json()
            d["stage"] = spec.stage
            d["provenance"] = {**src.provenance, "mixed_from": "alignment"}
            records.append(Record.from_json(d))
    seen = set()
    for r in records:
        if r.id in seen:
            raise RuntimeError(f"duplicate record id {r.id}")
        seen.add(r.id)
    manifest = build_manifest(records, spec.stage, spec.master_seed, spec)
    manifest["alignment_mix"] = mixed
    if evol_stats is not None:
        manifest["evolution"] = evol_stats
    return Corpus(records, manifest)


# --- JSONL ------------------------------------------------------------------------------------


class CorpusFormatError(ValueError):
    pass


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.manifest.json")


def write_jsonl(corpus: Corpus, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in corpus.lines():
            fh.write(line + "\n")
    manifest_path(path).write_text(json.dumps(corpus.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_jsonl(path: str | Path, verify: bool = False) -> Corpus:
    """Load a corpus; malformed lines raise CorpusFormatError naming the line."""
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = Record.from_json(json.loads(line))
            except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}:{lineno}: bad record: {exc}") from None
            if verify:
                problems = verify_record(rec)
                if problems:
                    raise CorpusFormatError(f"{path}:{lineno}: gold check failed: {problems}")
            records.append(rec)
    mpath = manifest_path(path)
    if mpath.exists():
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    else:
        manifest = build_manifest(records, records[0].stage if records else "", 0)
    return Corpus(records, manifest)


def manifest_matches(corpus: Corpus) -> bool:
    """Whether the manifest counts equal the actual record counts."""
    fresh = build_manifest(corpus.records, corpus.manifest.get("stage", ""), corpus.manifest.get("seed", 0))
    return all(corpus.manifest.get(k) == fresh[k] for k in ("total", "datasets", "tasks"))

