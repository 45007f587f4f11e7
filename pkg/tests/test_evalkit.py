import json
import threading

import pytest

from tsalign.evalkit import (
    COLUMNS,
    EvalReport,
    PoolEchoOracle,
    ScoreRow,
    ToolQuery,
    perfect_tool,
    run_benchmark,
    score_answer,
    tool_answerer,
)


def _record_with_series(corpus, task=None):
    for r in corpus.records:
        if r.series and (task is None or r.task == task):
            return r
    raise LookupError(task)


def test_gold_answers_score_full_marks(small_alignment, small_sft):
    for r in small_alignment.records + small_sft.records:
        metric, score, cause = score_answer(r, r.answer)
        assert score == pytest.approx(1.0, abs=1e-6), (r.id, r.answer)


def test_oracle_is_perfect(small_alignment, small_sft):
    for corpus in (small_alignment, small_sft):
        rep = run_benchmark(corpus, PoolEchoOracle())
        assert rep.summary["categorical_f1"] == 1.0
        assert rep.summary["overall"] == pytest.approx(1.0)
        assert [r.id for r in rep.rows] == sorted(r.id for r in corpus.records)


def test_perfect_tool_truth_and_crn():
    from conftest import pool_for

    p = pool_for(3, full=True)
    q = ToolQuery.make("trend", p.id)
    truth = perfect_tool(q, {p.id: p}, 1.0, 0)
    assert truth.truthful and truth.payload["kinds"] == p.kinds("trend")
    lie = perfect_tool(q, {p.id: p}, 0.0, 0)
    assert not lie.truthful and lie.payload["kinds"] != truth.payload["kinds"]
    # common random numbers: truthful at some accuracy implies truthful at any higher one
    for seed in range(200):
        flags = [perfect_tool(q, {p.id: p}, a, seed).truthful for a in (0.2, 0.5, 0.8, 0.95)]
        assert flags == sorted(flags)
    with pytest.raises(ValueError):
        perfect_tool(ToolQuery.make("trend", "pool-missing"), {p.id: p}, 1.0, 0)
    with pytest.raises(ValueError):
        perfect_tool(q, {p.id: p}, 1.5, 0)


def test_tool_answerer_monotone_and_logs(small_alignment):
    scores = []
    for acc in (0.5, 0.8, 1.0):
        model = tool_answerer(acc, seed=4)
        rep = run_benchmark(small_alignment, model, in_flight_limit=4)
        scores.append(rep.summary["overall"])
        assert len(model.calls) >= len(small_alignment)
    assert scores == sorted(scores) and scores[-1] == pytest.approx(1.0)


def test_disabled_tool_answers_unknown(small_alignment):
    model = tool_answerer(1.0, tools=["point_value"], seed=0)
    rec = _record_with_series(small_alignment, "correlation")
    assert model.answer("", rec) == "unknown"
    metric, score, cause = score_answer(rec, "unknown")
    assert score == 0.0 and cause == "unknown"
    with pytest.raises(ValueError):
        tool_answerer(1.0, tools=[])
    with pytest.raises(ValueError):
        tool_answerer(1.0, tools=["crystal_ball"])


class _Crashing:
    def answer(self, prompt, record):
        raise RuntimeError("boom")


def test_crashing_model_is_recorded(small_alignment):
    rep = run_benchmark(small_alignment.records[:5], _Crashing())
    assert rep.all_failed
    assert rep.summary["failures_by_cause"] == {"error": 5}


class _Counting:
    def __init__(self):
        self.active, self.peak, self.lock = 0, 0, threading.Lock()

    def answer(self, prompt, record):
        import time

        with self.lock:
            self.active += 1
            self.peak = max(self.peak, self.active)
        time.sleep(0.005)
        with self.lock:
            self.active -= 1
        return "unknown"


def test_in_flight_limit(small_alignment):
    m = _Counting()
    run_benchmark(small_alignment.records[:24], m, in_flight_limit=3)
    assert 1 <= m.peak <= 3


def test_report_recompute_and_serialization(small_alignment):
    rep = run_benchmark(small_alignment, PoolEchoOracle())
    before = json.loads(rep.to_json())
    rep.rows[0].score = 0.0
    rep.recompute()
    assert rep.summary["failed"] == 1
    rows = [ScoreRow(**r) for r in before["rows"]]
    assert json.loads(EvalReport(rows, before["model"]).to_json()) == before
    csv_text = rep.to_csv()
    assert csv_text.startswith("column,n,score\n") and "Categorical F1" in csv_text
    names = [c for c, _ in COLUMNS]
    assert all(k in names + ["Overall"] for k in rep.table)
