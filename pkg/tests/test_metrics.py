import math

import pytest
from hypothesis import given, strategies as st

from tsalign.evalkit.metrics import (
    choice_accuracy,
    edit_distance,
    f1,
    keyword_score,
    pair_f1,
    parse_categorical,
    parse_choice,
    parse_number,
    parse_partition,
    relative_accuracy,
    stem,
)
from tsalign.taxonomy import registry

LOCAL = registry().vocab("local")
SEASON = registry().vocab("season")
NOISE = registry().vocab("noise")
TREND = registry().vocab("trend")


@pytest.mark.parametrize("answer,label,expected", [
    (100, 100, 1.0),
    (110, 100, 0.9),
    (300, 100, 0.0),
    (90, 100, 0.9),
    (-100, 100, 0.0),
    (None, 100, 0.0),
    (float("nan"), 100, 0.0),
])
def test_relative_accuracy_table(answer, label, expected):
    assert relative_accuracy(answer, label) == expected


def test_relative_accuracy_near_zero_uses_range():
    # 1% of a range of 200 is 2, so an error of 1 on a zero label scores 0.5
    assert relative_accuracy(1.0, 0.0, (0.0, 200.0)) == 0.5
    assert relative_accuracy(0.0, 0.0) == 1.0
    assert relative_accuracy(1.0, 0.0) == 0.0


@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False))
def test_relative_accuracy_bounded(a, b):
    assert 0.0 <= relative_accuracy(a, b, 10.0) <= 1.0


@pytest.mark.parametrize("pred,gold,expected", [
    (set(), set(), 1.0),
    ({"a"}, set(), 0.0),
    (set(), {"a"}, 0.0),
    ({"a"}, {"a"}, 1.0),
    ({"a", "b"}, {"a"}, 2 / 3),
    ({"a"}, {"a", "b"}, 2 / 3),
    ({"a", "c"}, {"a", "b"}, 0.5),
    ({"c"}, {"a"}, 0.0),
])
def test_f1_table(pred, gold, expected):
    assert f1(pred, gold) == pytest.approx(expected)


@pytest.mark.parametrize("answer,gold,options,expected", [
    ("Answer: B", "B", "ABCD", (1, False)),
    ("I think the answer is C.", "C", "ABCD", (1, False)),
    ("B) because of a spike", "B", "ABCD", (1, False)),
    ("a spike explains it. Answer: D", "D", "ABCD", (1, False)),
    ("A", "B", "AB", (0, False)),
    ("no idea", "A", "ABCD", (0, True)),
    ("True. The maximum is 4.", "True", ["True", "False"], (1, False)),
    ("false", "False", ["True", "False"], (1, False)),
    ("It is not true.", "False", ["True", "False"], (0, False)),
])
def test_choice_accuracy_table(answer, gold, options, expected):
    assert choice_accuracy(answer, gold, list(options)) == expected


def test_choice_gold_must_be_an_option():
    with pytest.raises(ValueError):
        choice_accuracy("A", "E", list("ABCD"))
    assert parse_choice("Answer: (b)", list("ABCD")) is None


def test_parse_categorical_examples():
    assert parse_categorical("There is an upward spike near t=100", LOCAL) == {"upward spike"}
    assert parse_categorical("An upward level shift, not an upward spike.", LOCAL) == {"upward level shift"}
    assert parse_categorical("no local fluctuations at all", LOCAL) == {"none"}
    assert parse_categorical("The series shows sine seasonality.", SEASON) == {"sine"}
    assert parse_categorical("amplitude-modulated sine", SEASON) == {"amplitude-modulated sine"}
    assert parse_categorical("Gaussian noise", NOISE) == {"gaussian"}
    assert parse_categorical("The series is noise-free", NOISE) == {"none"}
    assert parse_categorical("steady, then linear increase", TREND) == {"steady", "linear increase"}
    assert parse_categorical("", TREND) == set()
    with pytest.raises(ValueError):
        parse_categorical("x", [])


def test_parse_number():
    assert parse_number("The value is 1,234.5 units") == 1234.5
    assert parse_number("from t=3 to 4.5e-3") == 0.0045
    assert parse_number("-7 then -2.5") == -2.5
    assert parse_number("no digits here") is None
    assert parse_number("version2 ends") is None


def test_partition_and_pair_f1():
    vocab = ["a_m", "b_m", "c_m", "d_m"]
    groups = parse_partition("Group 1: a_m, b_m. Group 2: c_m, d_m.", vocab)
    assert groups == [{"a_m", "b_m"}, {"c_m", "d_m"}]
    assert pair_f1(groups, [["a_m", "b_m"], ["c_m", "d_m"]]) == 1.0
    assert pair_f1([{"a_m", "b_m", "c_m", "d_m"}], [["a_m", "b_m"], ["c_m", "d_m"]]) == pytest.approx(0.5)
    assert pair_f1([{"a_m"}, {"b_m"}], [["a_m"], ["b_m"]]) == 1.0


def test_keyword_score():
    kws = ["linear increase", "sine", "12.5", "upward spike"]
    assert keyword_score("Linearly increasing with sine seasonality; spike upward at 12.50", kws) == 1.0
    assert keyword_score("linear increase and sine", kws) == 0.5
    assert keyword_score("", kws) == 0.0
    assert keyword_score("value 12.5001", ["12.5"]) == 1.0
    assert keyword_score("value 13", ["12.5"]) == 0.0
    with pytest.raises(ValueError):
        keyword_score("x", [])


def test_stem_and_edit_distance():
    assert stem("increasing") == "increas"
    assert edit_distance("trend", "trand") == 1
    assert edit_distance("a", "abcdef") == 2
    assert math.isclose(keyword_score("gausian noise", ["gaussian"]), 1.0)
