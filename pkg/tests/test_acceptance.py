"""Acceptance criteria, one test per criterion.

Each test prints a single ``[ACCEPT n] PASS|FAIL ...`` line (visible with
``pytest -s`` or in the summary captured by ``-rA``) and then asserts.
Seeds are fixed constants chosen before the first run.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from tsalign.cli import main
from tsalign.datasets import CorpusSpec, compose_corpus, manifest_matches, write_jsonl
from tsalign.describe import NUMERIC_FACTS, gen_alignment_qa
from tsalign.evalkit import (
    PoolEchoOracle,
    choice_accuracy,
    f1,
    relative_accuracy,
    run_benchmark,
    tool_answerer,
)
from tsalign.genpool import full_subset, sample_pool, select_subset
from tsalign.rng import make_rng, split_seed
from tsalign.synth import TimeSeries, Tolerances, denormalize, normalize, render, verify
from tsalign.taxonomy import metric_catalog, registry
from tsalign.tsevol import (
    EvolutionType,
    MockGenerator,
    eliminate,
    evolve,
    inject_attributes,
    run_evolution,
)

ALIGN_SEED = 2024
TOOL_SEED = 0


def report(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="module")
def alignment_1000():
    spec = CorpusSpec(stage="alignment", uts=500, mts_shape=250, mts_local=250, master_seed=ALIGN_SEED)
    return compose_corpus(spec)


# 1 ---------------------------------------------------------------------------------------


def test_accept_1_taxonomy(capsys):
    t0 = time.perf_counter()
    tax = registry()
    counts = {cat: len(kinds) for cat, kinds in tax.categories().items()}
    size = len(metric_catalog())
    dt = time.perf_counter() - t0
    ok = counts == {"trend": 4, "season": 7, "noise": 3, "local": 19} and size == 567 and dt < 1.0
    report(capsys, 1, ok, f"counts={counts} catalog={size} {dt:.3f}s")
    assert ok


# 2 ---------------------------------------------------------------------------------------


def _pool(i: int, noise: str):
    catalog = metric_catalog()
    metric = catalog[i % len(catalog)]
    sub = full_subset(metric) if i % 2 else select_subset(metric)
    sub = replace(sub, noise_kinds=(noise,))
    return sample_pool(sub, 64 + (i * 37) % 961, split_seed(77, noise, i))


def test_accept_2_generator_exactness(capsys):
    t0 = time.perf_counter()
    exact_fail = []
    for i in range(1000):
        pool = _pool(i, "none")
        rep = verify(pool, render(pool))
        if not rep.passed:
            exact_fail.append((pool.id, [c.name for c in rep.failures()]))
    noisy_pass = 0
    for i in range(1000):
        pool = _pool(i, "gaussian")
        noisy_pass += verify(pool, render(pool), Tolerances()).passed
    dt = time.perf_counter() - t0
    ok = not exact_fail and noisy_pass >= 990 and dt < 60
    report(capsys, 2, ok, f"noise-free {1000 - len(exact_fail)}/1000, gaussian {noisy_pass}/1000, {dt:.1f}s")
    assert not exact_fail, exact_fail[:5]
    assert noisy_pass >= 990 and dt < 60


# 3 ---------------------------------------------------------------------------------------


def test_accept_3_normalization(capsys):
    t0 = time.perf_counter()
    rng = make_rng(3)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(1, 500))
        scale = 10.0 ** rng.uniform(-6, 6)
        x = rng.normal(rng.uniform(-1, 1) * scale, scale, n)
        back = denormalize(normalize(TimeSeries(x))).values
        worst = max(worst, float(np.max(np.abs(back - x)) / max(np.max(np.abs(x)), 1e-300)))
    c = normalize(TimeSeries(np.full(17, -4.25)))
    const_ok = c.value_scaling == 1.0 and c.value_offset == -4.25 and not np.any(c.values)
    const_ok = const_ok and np.array_equal(denormalize(c).values, np.full(17, -4.25))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and const_ok and dt < 10
    report(capsys, 3, ok, f"worst rel err {worst:.2e}, constant rule {const_ok}, {dt:.2f}s")
    assert ok


# 4 ---------------------------------------------------------------------------------------


def test_accept_4_metric_tables(capsys):
    rel = [relative_accuracy(100, 100), relative_accuracy(110, 100), relative_accuracy(300, 100)]
    f1s = [f1({"spike"}, {"spike"}), f1({"spike"}, {"spike", "dip"}), f1(set(), {"spike"}), f1(set(), set())]
    choices = [choice_accuracy("Answer: B", "B"), choice_accuracy("True, because of x", "False"),
               choice_accuracy("maybe", "A")]
    ok = (rel == [1.0, 0.9, 0.0] and f1s == [1.0, 2 / 3, 0.0, 1.0]
          and choices == [(1, False), (0, False), (0, True)])
    report(capsys, 4, ok, f"rel={rel} f1={[round(v, 4) for v in f1s]} choice={choices}")
    assert ok


# 5 ---------------------------------------------------------------------------------------


def test_accept_5_pool_echo_oracle(capsys, alignment_1000):
    t0 = time.perf_counter()
    rep = run_benchmark(alignment_1000, PoolEchoOracle())
    dt = time.perf_counter() - t0
    s = rep.summary
    ok = len(rep.rows) == 1000 and s["categorical_f1"] == 1.0 and s["numeric_rel_acc_noise_free"] >= 0.99 and dt < 60
    report(capsys, 5, ok, f"F1={s['categorical_f1']:.4f} relacc(noise-free)={s['numeric_rel_acc_noise_free']:.4f} "
                          f"items={len(rep.rows)} {dt:.1f}s")
    assert ok


# 6 ---------------------------------------------------------------------------------------


def test_accept_6_tool_accuracy(capsys, alignment_1000):
    f1s, truth = {}, {}
    for acc in (0.8, 0.9, 0.95, 1.0):
        model = tool_answerer(acc, seed=TOOL_SEED)
        rep = run_benchmark(alignment_1000, model)
        f1s[acc] = rep.summary["categorical_f1"]
        truth[acc] = model.truthful_fraction()
    accs = sorted(f1s)
    monotone = all(f1s[a] <= f1s[b] for a, b in zip(accs, accs[1:]))
    close = all(abs(truth[a] - a) <= 0.02 for a in accs)
    ok = monotone and f1s[1.0] == 1.0 and close
    detail = " ".join(f"acc={a}: F1={f1s[a]:.4f} truthful={truth[a]:.4f}" for a in accs)
    report(capsys, 6, ok, detail)
    assert monotone and f1s[1.0] == 1.0
    assert close, truth


# 7 ---------------------------------------------------------------------------------------


def _evol_seeds(n: int, seed: int):
    catalog = metric_catalog()
    pools, seeds = {}, []
    for i in range(n):
        p = sample_pool(full_subset(catalog[(i * 7) % len(catalog)]), 64 + (i * 53) % 448, split_seed(seed, i))
        pools[p.id] = p
        task = ("trend", "season", "noise", "local")[i % 4]
        seeds.append(gen_alignment_qa(p, render(p), task, split_seed(seed, "qa", i)))
    return seeds, pools


def _mutate_value(fact: dict, pool, u: float) -> float | int:
    """Push a numeric fact well past the eliminator's tolerance."""
    v = fact["value"]
    if fact["kind"] == "trend_slope_sign":
        return -v if v else 1
    sign = 1.0 if u < 0.5 else -1.0
    span = float(pool.metric.span)
    if fact["units"] in ("steps", "index"):
        return int(v + sign * max(1, math.ceil(0.1 * abs(v)) + 1))
    mag = max(0.05 * abs(v), 3.0 * pool.noise.std, 0.01 * span)
    return v + sign * (1.0 + u) * 1.5 * mag


class _MutatingGenerator:
    """MockGenerator whose FACTS payload has one numeric entry corrupted."""

    def __init__(self, pools, seed):
        self.pools, self.seed, self.mock = pools, seed, MockGenerator()

    def complete(self, prompt, **params):
        text = self.mock.complete(prompt)
        head, payload = text.split("FACTS: ", 1)
        facts = json.loads(payload)
        numeric = [i for i, f in enumerate(facts) if f["kind"] in NUMERIC_FACTS]
        rng = make_rng(split_seed(self.seed, "mutate", prompt))
        i = numeric[int(rng.integers(len(numeric)))]
        facts[i]["value"] = _mutate_value(facts[i], self.pools[facts[i]["series_ref"]], float(rng.random()))
        return head + "FACTS: " + json.dumps(facts, sort_keys=True) + "\n"


def test_accept_7_tsevol(capsys):
    seeds, pools = _evol_seeds(100, 7)

    def run():
        res = run_evolution(seeds, pools, 3, MockGenerator(), master_seed=99)
        return json.dumps([(r.id, r.question, r.answer, r.gold_labels) for r in res.records], sort_keys=True), res

    a, res_a = run()
    b, _ = run()
    reproducible = a == b and res_a.attempted > 0

    trials, rejected = 0, 0
    mseeds, mpools = _evol_seeds(250, 8)
    gen = _MutatingGenerator(mpools, 5)
    etypes = list(EvolutionType)
    j = 0
    while trials < 1000:
        qa = mseeds[j % len(mseeds)]
        pool = mpools[qa.series_refs[0]]
        facts = inject_attributes([pool], k=3, seed=split_seed(5, "trial", j))
        j += 1
        if not any(f.kind in NUMERIC_FACTS for f in facts):
            continue  # nothing numeric to corrupt in this draw
        cand = evolve(qa, mpools, etypes[j % len(etypes)], facts, gen)
        trials += 1
        rejected += not eliminate(cand, mpools).accepted
    ok = reproducible and rejected == trials
    report(capsys, 7, ok, f"3-round reproducible={reproducible} (attempted {res_a.attempted}, "
                          f"accepted {res_a.accepted}); mutants rejected {rejected}/{trials}")
    assert ok


# 8 ---------------------------------------------------------------------------------------


def test_accept_8_corpus_composition(capsys, tmp_path):
    t0 = time.perf_counter()
    outputs = []
    for run in range(2):
        align = compose_corpus(CorpusSpec(stage="alignment", uts=350, mts_shape=350, mts_local=350, master_seed=8))
        sft = compose_corpus(CorpusSpec(stage="sft", tsevol=243, instruct_follow=51, master_seed=9), align)
        pa, ps = write_jsonl(align, tmp_path / f"a{run}.jsonl"), write_jsonl(sft, tmp_path / f"s{run}.jsonl")
        outputs.append((pa.read_bytes(), ps.read_bytes(), align, sft))
    dt = time.perf_counter() - t0
    align, sft = outputs[0][2], outputs[0][3]
    ds = sft.manifest["datasets"]
    counts_ok = (align.manifest["total"] == 1050
                 and align.manifest["datasets"] == {"mts_local": 350, "mts_shape": 350, "uts": 350}
                 and ds.get("tsevol") == 243 and ds.get("instruct_follow") == 51
                 and sft.manifest["alignment_mix"] == 315 and sft.manifest["total"] == 609
                 and manifest_matches(align) and manifest_matches(sft))
    same = outputs[0][:2] == outputs[1][:2]
    ok = counts_ok and same and dt < 120
    report(capsys, 8, ok, f"alignment={align.manifest['total']} sft={sft.manifest['total']} "
                          f"(mix {sft.manifest['alignment_mix']}) byte-identical={same} {dt:.1f}s (two runs)")
    assert ok


# 9 ---------------------------------------------------------------------------------------


def test_accept_9_end_to_end(capsys, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nseed = 21\n\n[corpus]\nuts = 100\nmts_shape = 50\nmts_local = 50\n")
    out = tmp_path / "out"
    t0 = time.perf_counter()
    codes = [main(["generate", "--config", str(cfg), "--out", str(out)])]
    corpus = str(out / "alignment.jsonl")
    codes.append(main(["eval", "--config", str(cfg), "--corpus", corpus, "--oracle", "--out", str(out)]))
    codes.append(main(["eval", "--config", str(cfg), "--corpus", corpus, "--tools", "acc=0.9", "--out", str(out)]))
    first_id = json.loads(open(corpus, encoding="utf-8").readline())["id"]
    codes.append(main(["plot", "--corpus", corpus, "--id", first_id, "--out", str(out / "plots")]))
    dt = time.perf_counter() - t0
    files = [out / "report-oracle.json", out / "report-tools-0.9.json", out / "plots" / f"{first_id}.svg"]
    ok = codes == [0, 0, 0, 0] and all(f.exists() for f in files) and dt < 300
    report(capsys, 9, ok, f"exit codes {codes}, {dt:.1f}s")
    assert ok
