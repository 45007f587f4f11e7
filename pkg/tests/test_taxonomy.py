import pytest

from tsalign.taxonomy import (
    FLUCT,
    NOISE,
    NONE_LABEL,
    SEASON,
    TREND,
    CatalogError,
    metric_catalog,
    parse_catalog,
    registry,
)


def test_category_counts():
    tax = registry()
    counts = {c: len(k) for c, k in tax.categories().items()}
    assert counts == {TREND: 4, SEASON: 7, NOISE: 3, FLUCT: 19}


def test_registry_is_a_singleton_and_ids_unique():
    tax = registry()
    assert tax is registry()
    ids = [k for c in tax.categories() for k in tax.ids(c)]
    assert len(ids) == len(set(ids))


def test_lookup_and_vocab():
    tax = registry()
    assert tax.category_of("upward spike") == FLUCT
    assert tax.fluct("upward level shift").persistent
    assert not tax.fluct("upward spike").persistent
    assert tax.kind("linear decrease").direction == -1
    assert NONE_LABEL in tax.vocab(FLUCT)
    assert tax.vocab(NOISE).count(NONE_LABEL) == 1
    with pytest.raises(KeyError):
        tax.fluct("sine")


def test_catalog_size_and_ranges():
    cat = metric_catalog()
    assert len(cat) == 567
    assert len({m.name for m in cat}) == 567
    for m in cat:
        assert m.low < m.high
        if m.nonneg:
            assert m.low >= 0


def test_parse_catalog_comments_and_errors():
    text = "# header\nfoo,AIOps,0,10,true\n\nbar,weather,-5,5,no  # trailing\n"
    got = parse_catalog(text)
    assert [m.name for m in got] == ["foo", "bar"]
    assert got[1].low == -5 and not got[1].nonneg
    with pytest.raises(CatalogError, match="<catalog>:2: duplicate"):
        parse_catalog("a,AIOps,0,1,true\na,AIOps,0,1,true\n")
    with pytest.raises(CatalogError):
        parse_catalog("a,AIOps,5,1,true\n")
