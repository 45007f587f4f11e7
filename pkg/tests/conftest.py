from dataclasses import replace

import pytest

from tsalign.datasets import CorpusSpec, compose_corpus
from tsalign.genpool import full_subset, sample_pool, select_subset
from tsalign.taxonomy import metric_catalog


def subset_with_noise(metric, noise: str):
    return replace(select_subset(metric), noise_kinds=(noise,))


def pool_for(i: int, noise: str | None = None, length: int | None = None, full: bool = False):
    catalog = metric_catalog()
    metric = catalog[i % len(catalog)]
    sub = full_subset(metric) if full else select_subset(metric)
    if noise is not None:
        sub = replace(sub, noise_kinds=(noise,))
    n = length if length is not None else 64 + (i * 37) % 961
    return sample_pool(sub, n, 1000 + i)


@pytest.fixture(scope="session")
def catalog():
    return metric_catalog()


@pytest.fixture(scope="session")
def small_alignment():
    spec = CorpusSpec(stage="alignment", uts=60, mts_shape=30, mts_local=30, master_seed=11,
                      length_max=256)
    return compose_corpus(spec)


@pytest.fixture(scope="session")
def small_sft(small_alignment):
    spec = CorpusSpec(stage="sft", tsevol=12, instruct_follow=6, reasoning=8, master_seed=12,
                      length_max=256)
    return compose_corpus(spec, small_alignment)
