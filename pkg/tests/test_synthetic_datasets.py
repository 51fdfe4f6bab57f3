"""Tests for the synthetic characteristic suite.

Each case exists to switch on one characteristic (plus whatever that
characteristic necessarily drags along) so the knowledge base can attribute a
success or a failure to it. A case that leaks a second characteristic would
silently teach the knowledge base the wrong capability.
"""
import json
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from dataset_model import CHARACTERISTICS, PREDICTIVE_MODEL, AttributeKind  # noqa: E402
from synthetic_datasets import (  # noqa: E402
    generate_suite,
    isolation_violations,
    load_suite,
    suite_hash,
    write_suite,
)


def test_suite_has_a_case_per_characteristic_and_variant(suite):
    assert len(suite) == 22
    keys = [c.key for c in suite]
    assert keys == sorted(keys)
    assert 'MISSING_CLASS_VALUES__numeric' in keys
    assert 'MISSING_CLASS_VALUES__nominal' in keys


def test_every_characteristic_but_the_model_flag_is_covered(suite):
    covered = {c.characteristic for c in suite}
    assert covered == set(CHARACTERISTICS) - {PREDICTIVE_MODEL}


@pytest.mark.parametrize('rows', [8, 16, 40])
def test_every_case_isolates_its_characteristic(rows):
    for case in generate_suite(rows=rows, seed=3):
        assert isolation_violations(case) == [], case.key
        assert case.dataset.n_rows == rows


def test_declared_categories_are_all_used_except_on_empty_columns(suite):
    for case in suite:
        d = case.dataset
        for attr in d.attributes:
            empty = case.characteristic == 'EMPTY_NOMINAL_ATTRIBUTES' and attr.name == 'x'
            if attr.kind != AttributeKind.NOMINAL or empty:
                continue
            assert set(d.frame[attr.name].dropna()) == set(attr.categories), (case.key, attr.name)


def test_suite_is_deterministic_in_rows_and_seed():
    assert suite_hash(generate_suite(16, 0)) == suite_hash(generate_suite(16, 0))
    assert suite_hash(generate_suite(16, 0)) != suite_hash(generate_suite(16, 1))


def test_too_few_rows_is_refused():
    with pytest.raises(ValueError):
        generate_suite(rows=4)


def test_written_suite_reads_back_with_the_same_hash(suite, tmp_path):
    manifest_path = write_suite(suite, tmp_path, rows=16, seed=0)
    manifest = json.loads(manifest_path.read_text())
    assert manifest['suite_hash'] == suite_hash(suite)
    assert len(manifest['cases']) == 22
    assert manifest['cases'][0]['expected_token'][PREDICTIVE_MODEL] == 0
    assert suite_hash(load_suite(tmp_path)) == suite_hash(suite)
