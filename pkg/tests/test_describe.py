import numpy as np
import pytest

from conftest import pool_for
from tsalign.describe import (
    ALIGNMENT_TASKS,
    NUMERIC_TASKS,
    REASONING_TASKS,
    SLOT,
    Fact,
    QARecord,
    article,
    check_gold,
    describe,
    fmt,
    gen_alignment_qa,
    gen_instruct_follow,
    gen_mts_qa,
    gen_numeric_qa,
    gen_reasoning_qa,
    pool_facts,
    span_text,
)
from tsalign.evalkit.metrics import parse_number
from tsalign.genpool import SHAPE, build_correlation_group, select_subset
from tsalign.synth import render
from tsalign.taxonomy import metric_catalog, registry


def test_formatting_helpers():
    assert fmt(3.0) == "3"
    assert fmt(0.123456) == "0.1235"
    assert article("upward spike") == "an" and article("gap") == "a"
    assert span_text(10, 20) == "t=10 to t=19"


def test_description_mentions_every_kind():
    for i in range(30):
        p = pool_for(i, full=True)
        d = describe(p)
        for cat in ("trend", "season", "noise", "local"):
            for k in p.kinds(cat):
                if k != "none":
                    assert k in d.text
        assert d.facts == pool_facts(p)


def test_fact_round_trip():
    f = Fact("fluct_position", 12, "index", (12, 13), "pool-x")
    assert Fact.from_dict(f.to_dict()) == f


def test_alignment_qa_gold_and_slot():
    p = pool_for(5, full=True)
    s = render(p)
    for task in ALIGNMENT_TASKS:
        qa = gen_alignment_qa(p, s, task, 1)
        assert qa.question.count(SLOT) == 1
        assert qa.gold_labels["labels"] == sorted(p.kinds(qa.gold_labels["category"]))
        assert check_gold(qa, {p.id: p}, {p.id: s}) == []
        assert QARecord.from_dict(qa.to_dict()) == qa


def test_numeric_answers_end_with_gold():
    made = 0
    for i in range(40):
        p = pool_for(i, full=True)
        s = render(p)
        for task in NUMERIC_TASKS:
            qa = gen_numeric_qa(p, s, task, i)
            if qa is None:
                continue
            made += 1
            assert check_gold(qa, {p.id: p}, {p.id: s}) == []
            assert parse_number(qa.answer) == pytest.approx(qa.gold_labels["value"], rel=1e-7)
    assert made > 100


def test_numeric_max_gold_matches_series():
    p = pool_for(3)
    s = render(p)
    qa = gen_numeric_qa(p, s, "numeric.max", 0)
    assert qa.gold_labels["value"] == float(np.max(s.values))
    assert qa.gold_labels["query"]["at"] == int(np.argmax(s.values))


def test_period_task_requires_seasonality():
    for i in range(60):
        p = pool_for(i)
        if p.seasonality is None:
            assert gen_numeric_qa(p, render(p), "numeric.period", 0) is None
            return
    pytest.skip("no season-free pool in sample")


def test_gold_tampering_is_detected():
    p = pool_for(8, full=True)
    s = render(p)
    qa = gen_numeric_qa(p, s, "numeric.value_at", 0)
    qa.gold_labels["value"] += 1.0
    assert check_gold(qa, {p.id: p}, {p.id: s})
    qa = gen_alignment_qa(p, s, "noise", 0)
    qa.gold_labels["labels"] = ["pink"]
    assert check_gold(qa, {p.id: p}, {p.id: s})


def test_reasoning_and_instruct_gold():
    for i in range(30):
        p = pool_for(i, full=True)
        s = render(p)
        for task in REASONING_TASKS:
            qa = gen_reasoning_qa(p, s, task, i)
            if qa is not None:
                assert check_gold(qa, {p.id: p}, {p.id: s}) == []
        qa = gen_instruct_follow(i)
        assert qa.series_refs == [] and SLOT not in qa.question
        chosen = qa.gold_labels["option_text"]["ABCD".index(qa.gold_labels["choice"])]
        assert registry().category_of(chosen) == qa.gold_labels["query"]["category"]


def test_mts_questions():
    cat = metric_catalog()
    subs = [select_subset(cat[j]) for j in (1, 50, 300)]
    corr, pools = build_correlation_group(SHAPE, 3, subs, 200, 4)
    series = [render(p) for p in pools]
    by_id = {p.id: p for p in pools}
    raw = {p.id: s for p, s in zip(pools, series)}
    for task in ("correlation", "cluster"):
        qa = gen_mts_qa(corr, pools, series, task, 0)
        assert qa.question.count(SLOT) == 3
        assert check_gold(qa, by_id, raw) == []
    with pytest.raises(ValueError):
        gen_mts_qa(corr, pools[:1], series[:1], "cluster", 0)


def test_unknown_task_rejected():
    p = pool_for(0)
    with pytest.raises(ValueError):
        gen_alignment_qa(p, render(p), "numeric.max", 0)
