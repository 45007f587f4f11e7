"""Command-line entry point: ``tsalign taxonomy | generate | evolve | eval | plot``.

Exit codes: 0 ok, 2 configuration error, 3 I/O error (missing or malformed
files, unknown record id), 4 generation failure, 5 generator endpoint
unreachable, 6 every evaluated item failed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from html import escape
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import Config, ConfigError, load_config
from .datasets import Corpus, CorpusFormatError, build_manifest, compose_corpus, make_record, read_jsonl, write_jsonl
from .synth import TimeSeries, export_csv, render
from .taxonomy import CatalogError, metric_catalog, registry

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_GENERATION, EXIT_ENDPOINT, EXIT_ALL_FAILED = 0, 2, 3, 4, 5, 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _say(msg: str) -> None:
    print(msg, flush=True)


def _out_dir(args, cfg: Config) -> Path:
    out = Path(args.out or cfg.run.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc}") from None
    return out


def _read_corpus(path: str | None) -> Corpus:
    if not path:
        raise CliError(EXIT_CONFIG, "--corpus is required")
    try:
        return read_jsonl(path)
    except (OSError, CorpusFormatError) as exc:
        raise CliError(EXIT_IO, f"cannot read corpus: {exc}") from None


def _generator(args, cfg: Config):
    """Mock generator with ``--mock``; otherwise the configured endpoint."""
    from .tsevol import ChatCompletionGenerator, MockGenerator

    if args.mock:
        return MockGenerator()
    g = cfg.generator
    if not g.url or not g.model:
        raise CliError(EXIT_ENDPOINT, "no generator endpoint configured (set [generator] url and model, or pass --mock)")
    audit = Path(args.out or cfg.run.out) / "audit.jsonl" if args.audit else None
    return ChatCompletionGenerator(g.url, g.model, g.key_env, g.temperature, g.timeout, audit)


# --- commands ---------------------------------------------------------------------------------


def cmd_taxonomy(args, cfg: Config) -> int:
    tax = registry()
    counts = {cat: len(kinds) for cat, kinds in tax.categories().items()}
    catalog = metric_catalog()
    if args.json:
        _say(json.dumps({"counts": counts, "kinds": {c: list(tax.ids(c)) for c in counts},
                         "catalog_size": len(catalog)}, indent=2))
        return EXIT_OK
    for cat in counts:
        _say(f"{cat} ({counts[cat]}): " + ", ".join(tax.ids(cat)))
    _say(f"metric catalog: {len(catalog)} entries")
    return EXIT_OK


def cmd_generate(args, cfg: Config) -> int:
    spec = cfg.corpus_spec(args.seed)
    out = _out_dir(args, cfg)
    alignment = None
    if spec.stage == "sft" and spec.alignment_mix_fraction > 0:
        alignment = _read_corpus(cfg.run.alignment_corpus or None)
    generator = _generator(args, cfg) if spec.tsevol else None
    start = time.perf_counter()
    try:
        corpus = compose_corpus(spec, alignment, generator)
    except (RuntimeError, ValueError) as exc:
        if type(exc).__name__ == "EndpointError":
            raise
        raise CliError(EXIT_GENERATION, f"generation failed: {exc}") from None
    path = out / f"{cfg.run.name or spec.stage}.jsonl"
    try:
        write_jsonl(corpus, path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None
    m = corpus.manifest
    _say(f"wrote {m['total']} records to {path} ({time.perf_counter() - start:.1f}s)")
    for name, n in m["datasets"].items():
        _say(f"  dataset {name}: {n}")
    for name, n in m["tasks"].items():
        _say(f"  task {name}: {n}")
    if "evolution" in m:
        _say(f"  evolution: {json.dumps(m['evolution'], sort_keys=True)}")
    return EXIT_OK


def cmd_evolve(args, cfg: Config) -> int:
    from .tsevol import run_evolution

    corpus = _read_corpus(args.corpus)
    out = _out_dir(args, cfg)
    records = [r for r in corpus.records if r.series]
    if args.limit:
        records = records[: args.limit]
    if not records:
        raise CliError(EXIT_GENERATION, "seed corpus has no records with series")
    gen = _generator(args, cfg)
    seed = cfg.run.seed if args.seed is None else args.seed
    pools, corr, origin = {}, {}, {}
    for rec in records:
        pools.update(rec.pools())
        for c in rec.correlation_pools():
            corr[c.group_id] = c
        for s in rec.series:
            origin[s.pool["id"]] = rec
    seeds = [r.qa() for r in records]
    try:
        res = run_evolution(seeds, pools, args.rounds or cfg.evolve.rounds, gen, seed,
                            k=cfg.evolve.k, in_flight=cfg.generator.in_flight, retries=cfg.generator.retries,
                            tolerances=cfg.evol_tolerances(), corr_pools=corr,
                            decode={"temperature": cfg.generator.temperature})
    except ValueError as exc:
        raise CliError(EXIT_GENERATION, f"evolution failed: {exc}") from None
    stage = records[0].stage
    evolved = []
    for child in res.records:
        parent = origin[child.series_refs[0]]
        ps = [pools[r] for r in child.series_refs]
        evolved.append(make_record(child, ps, [render(p) for p in ps], stage, "tsevol", parent.seed,
                                   parent.correlation_pools() or None))
    manifest = build_manifest(evolved, stage, seed)
    manifest["evolution"] = res.summary()
    path = out / f"{cfg.run.name or 'evolved'}.jsonl"
    try:
        write_jsonl(Corpus(evolved, manifest), path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from None
    _say(f"wrote {len(evolved)} evolved records to {path}")
    _say(f"acceptance rate: {res.acceptance_rate:.4f} ({res.accepted}/{res.attempted})")
    return EXIT_OK


def _parse_tools_arg(text: str) -> tuple[float, list[str] | None]:
    acc, tools = None, None
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip()
        if key == "acc":
            try:
                acc = float(value)
            except ValueError:
                raise CliError(EXIT_CONFIG, f"--tools: acc must be a number, got {value!r}") from None
        elif key == "tools":
            tools = [t for t in value.split("+") if t]
        else:
            raise CliError(EXIT_CONFIG, f"--tools: unknown key {key!r} (expected acc=<x>[,tools=a+b])")
    if acc is None or not 0.0 <= acc <= 1.0:
        raise CliError(EXIT_CONFIG, "--tools needs acc=<x> with 0 <= x <= 1")
    return acc, tools


def cmd_eval(args, cfg: Config) -> int:
    from .evalkit import EndpointModel, PoolEchoOracle, run_benchmark, tool_answerer

    corpus = _read_corpus(args.corpus)
    out = _out_dir(args, cfg)
    if args.oracle:
        model, tag = PoolEchoOracle(), "oracle"
    elif args.tools:
        acc, tools = _parse_tools_arg(args.tools)
        tools = tools or [t for t in cfg.eval.tools.split(",") if t]
        seed = cfg.eval.tool_seed if args.seed is None else args.seed
        try:
            model = tool_answerer(acc, tools, seed)
        except ValueError as exc:
            raise CliError(EXIT_CONFIG, f"--tools: {exc}") from None
        tag = f"tools-{acc:g}"
    else:
        model, tag = EndpointModel(_generator(args, cfg)), "endpoint"
    report = run_benchmark(corpus, model, cfg.eval.in_flight_limit, tag)
    stem = out / f"report-{tag}"
    try:
        Path(f"{stem}.json").write_text(report.to_json() + "\n", encoding="utf-8")
        Path(f"{stem}.csv").write_text(report.to_csv(), encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write report: {exc}") from None
    _say(report.format_table())
    s = report.summary
    _say(f"categorical F1 {s['categorical_f1']:.4f}  numeric rel. acc. {s['numeric_rel_acc']:.4f}")
    if hasattr(model, "truthful_fraction"):
        _say(f"tool truthfulness {model.truthful_fraction():.4f} over {len(model.calls)} calls")
    _say(f"report written to {stem}.json and {stem}.csv")
    if report.all_failed:
        _say("every item failed")
        return EXIT_ALL_FAILED
    return EXIT_OK


def render_svg(series: Sequence[np.ndarray], names: Sequence[str], windows: Sequence[tuple[int, int]],
               width: int = 800, height: int = 300) -> str:
    """Line plot with one polyline per series (each scaled to its own range)
    and shaded [start, end) index windows."""
    pad = 20
    n = max(len(s) for s in series)
    sx = (width - 2 * pad) / max(n - 1, 1)
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    for a, b in windows:
        x0 = pad + (a - 0.5) * sx
        parts.append(f'<rect class="fluct" data-start="{a}" data-end="{b}" x="{x0:.2f}" y="{pad}" '
                     f'width="{(b - a) * sx:.2f}" height="{height - 2 * pad}" fill="#f5c542" fill-opacity="0.35"/>')
    for i, (vals, name) in enumerate(zip(series, names)):
        v = np.asarray(vals, dtype=float)
        lo, hi = float(v.min()), float(v.max())
        span = hi - lo if hi > lo else 1.0
        pts = " ".join(f"{pad + t * sx:.2f},{height - pad - (x - lo) / span * (height - 2 * pad):.2f}"
                       for t, x in enumerate(v))
        parts.append(f'<polyline fill="none" stroke="{colors[i % len(colors)]}" stroke-width="1.2" '
                     f'points="{pts}"><title>{escape(name)}</title></polyline>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot(args, cfg: Config) -> int:
    corpus = _read_corpus(args.corpus)
    if not args.id:
        raise CliError(EXIT_CONFIG, "--id is required")
    rec = corpus.by_id().get(args.id)
    if rec is None:
        raise CliError(EXIT_IO, f"no record with id {args.id!r}")
    if not rec.series:
        raise CliError(EXIT_IO, f"record {args.id!r} has no series")
    out = _out_dir(args, cfg)
    tax = registry()
    raws, names, windows = [], [], []
    try:
        for k, s in enumerate(rec.series):
            raw = s.raw()
            raws.append(raw)
            names.append(s.name)
            export_csv(TimeSeries(raw, s.name), out / f"{rec.id}-{k}.csv")
            for f in s.attribute_pool().fluctuations:
                end = s.length if tax.fluct(f.kind).persistent else max(f.end, f.position + 1)
                windows.append((f.position, end))
        svg = out / f"{rec.id}.svg"
        svg.write_text(render_svg(raws, names, sorted(set(windows))), encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write plot: {exc}") from None
    _say(f"wrote {svg} and {len(raws)} CSV file(s)")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--mock", action="store_true", help="use the offline mock generator")
    common.add_argument("--audit", action="store_true", help="log endpoint traffic to <out>/audit.jsonl")
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="tsalign", description="Synthetic time-series alignment toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("taxonomy", parents=[common], help="show attribute counts and the metric catalog size")
    t.add_argument("--json", action="store_true")
    sub.add_parser("generate", parents=[common], help="compose an alignment or SFT corpus")
    e = sub.add_parser("evolve", parents=[common], help="evolve a seed corpus into inductive QAs")
    e.add_argument("--corpus", help="seed corpus JSONL")
    e.add_argument("--rounds", type=int)
    e.add_argument("--limit", type=int, help="use only the first N seed records")
    v = sub.add_parser("eval", parents=[common], help="score a model on a corpus")
    v.add_argument("--corpus", help="corpus JSONL")
    target = v.add_mutually_exclusive_group()
    target.add_argument("--oracle", action="store_true", help="pool-echo oracle")
    target.add_argument("--tools", metavar="acc=X[,tools=a+b]", help="perfect-tools answerer")
    pl = sub.add_parser("plot", parents=[common], help="export one record as CSV and SVG")
    pl.add_argument("--corpus")
    pl.add_argument("--id")
    return p


COMMANDS = {"taxonomy": cmd_taxonomy, "generate": cmd_generate, "evolve": cmd_evolve,
            "eval": cmd_eval, "plot": cmd_plot}


def main(argv: Sequence[str] | None = None) -> int:
    from .tsevol import EndpointError

    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CatalogError as exc:
        print(f"catalog error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EndpointError as exc:
        print(f"endpoint unreachable: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
