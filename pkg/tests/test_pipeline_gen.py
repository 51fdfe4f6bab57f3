"""Tests for the random pipeline generator used by the agreement benchmark."""
import os
import sys
from collections import Counter

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from component_pool import ComponentKind, get_component  # noqa: E402
from pipeline_gen import random_corpus, random_pipeline  # noqa: E402


def test_max_len_one_gives_a_lone_predictor(pool):
    for seed in range(50):
        p = random_pipeline(pool, 1, seed)
        assert len(p) == 1
        assert p.predictor.component.is_predictive


def test_draws_follow_the_template_and_cover_every_length(pool):
    corpus = random_corpus(pool, 2000, 6, seed=0)
    lengths = Counter(len(p) for p in corpus)
    assert set(lengths) == {1, 2, 3, 4, 5, 6}
    for p in corpus:
        assert p.follows_template()
        assert p.predictor.component.is_predictive
        assert all(0 <= s.setting < len(s.component.hyperparams) for s in p.steps)


def test_every_component_gets_drawn(pool):
    drawn = {cid for p in random_corpus(pool, 2000, 6, seed=1) for cid in p.component_ids}
    assert drawn == {s.id for s in pool}


def test_corpus_is_reproducible_per_seed(pool):
    a = [p.describe() for p in random_corpus(pool, 30, 6, seed=7)]
    b = [p.describe() for p in random_corpus(pool, 30, 6, seed=7)]
    c = [p.describe() for p in random_corpus(pool, 30, 6, seed=8)]
    assert a == b
    assert a != c


def test_length_is_capped_by_the_kinds_available():
    pool = [get_component('replace_missing'), get_component('knn')]
    lengths = {len(random_pipeline(pool, 6, seed)) for seed in range(100)}
    assert lengths == {1, 2}


def test_max_len_below_one_is_refused(pool):
    with pytest.raises(ValueError):
        random_pipeline(pool, 0, 0)


def test_pool_without_predictor_is_refused():
    pool = [get_component('center'), get_component('pca')]
    assert all(s.kind != ComponentKind.PREDICTOR for s in pool)
    with pytest.raises(ValueError, match='no predictor'):
        random_pipeline(pool, 3, 0)
