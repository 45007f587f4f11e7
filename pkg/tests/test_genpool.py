import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from conftest import pool_for
from tsalign.genpool import (
    LOCAL,
    MAX_LENGTH,
    MIN_LENGTH,
    SHAPE,
    AttributePool,
    AttributeSubset,
    build_correlation_group,
    full_subset,
    has_relation,
    sample_pool,
    sample_unrelated_pool,
    select_subset,
    validate_pool,
    verify_correlation,
)
from tsalign.taxonomy import FLUCT, NONE_LABEL, metric_catalog, registry


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 566), st.integers(MIN_LENGTH, MAX_LENGTH), st.integers(0, 2**63))
def test_sampled_pools_are_valid(i, length, seed):
    metric = metric_catalog()[i]
    pool = sample_pool(full_subset(metric), length, seed)
    assert validate_pool(pool) == []
    assert pool.length == length
    assert pool.metric == metric


def test_sampling_is_deterministic():
    m = metric_catalog()[3]
    a = sample_pool(select_subset(m), 300, 99)
    b = sample_pool(select_subset(m), 300, 99)
    assert a == b
    assert a != sample_pool(select_subset(m), 300, 100)


def test_frozen_pool():
    p = sample_pool(select_subset(metric_catalog()[0]), 128, 5)
    assert p.id == "pool-0000000000000005"
    assert [s.kind for s in p.trend] == ["linear increase"]
    assert p.seasonality.kind == "sawtooth" and p.seasonality.period == 38
    assert p.noise.kind == "uniform"
    assert [(f.kind, f.position, f.duration) for f in p.fluctuations] == [
        ("rapid rise slow decline", 18, 18),
        ("transient rise", 54, 9),
        ("transient dip", 114, 4),
    ]


def test_dict_round_trip_through_json():
    for i in range(20):
        p = pool_for(i, full=True)
        assert AttributePool.from_dict(json.loads(json.dumps(p.to_dict()))) == p


def test_length_bounds_rejected():
    sub = select_subset(metric_catalog()[0])
    for n in (MIN_LENGTH - 1, MAX_LENGTH + 1):
        with pytest.raises(ValueError):
            sample_pool(sub, n, 0)


def test_subset_restricts_kinds():
    m = metric_catalog()[10]
    sub = replace(full_subset(m), trend_kinds=("steady",), noise_kinds=("gaussian",),
                  fluct_kinds=("upward spike",), season_probability=0.0)
    for s in range(30):
        p = sample_pool(sub, 200, s)
        assert {t.kind for t in p.trend} == {"steady"}
        assert p.noise.kind == "gaussian"
        assert p.seasonality is None
        assert {f.kind for f in p.fluctuations} <= {"upward spike"}


def test_validate_flags_overlap_and_bad_kind():
    p = pool_for(1, full=True)
    bad = replace(p, noise=replace(p.noise, kind="pink"))
    assert any("pink" in msg for msg in validate_pool(bad))
    if len(p.fluctuations) >= 2:
        f0, f1 = p.fluctuations[:2]
        clash = replace(p, fluctuations=(f0, replace(f1, position=f0.position)) + p.fluctuations[2:])
        assert validate_pool(clash)


class _BrokenSelector:
    def propose(self, metric, taxonomy):
        return AttributeSubset(metric, ("wobbly",), (), (), ())


def test_invalid_selector_falls_back():
    m = metric_catalog()[0]
    sub = select_subset(m, _BrokenSelector())
    assert sub.trend_kinds and sub.noise_kinds
    assert sub.notes and "rule-based default" in sub.notes[-1]


@pytest.mark.parametrize("kind", [SHAPE, LOCAL])
def test_correlation_groups_hold(kind):
    cat = metric_catalog()
    for s in range(15):
        subs = [select_subset(cat[(s * 7 + j) % len(cat)]) for j in range(3)]
        corr, pools = build_correlation_group(kind, 3, subs, 256, s)
        by_id = {p.id: p for p in pools}
        assert verify_correlation(corr, by_id) == []
        assert all(validate_pool(p) == [] for p in pools)
        other = sample_unrelated_pool(subs[0], 256, 10_000 + s, [corr])
        assert not has_relation(other, corr.kind, corr.relation)


def test_correlation_group_size_bounds():
    sub = select_subset(metric_catalog()[0])
    with pytest.raises(ValueError):
        build_correlation_group(SHAPE, 1, sub, 128, 0)


def test_kinds_report_none():
    p = pool_for(2, full=True)
    empty = replace(p, fluctuations=())
    assert empty.kinds(FLUCT) == [NONE_LABEL]
    assert all(k in registry() for k in p.kinds(FLUCT) if k != NONE_LABEL)
