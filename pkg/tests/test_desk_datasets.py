"""Tests for the bundled desk datasets used by the benchmarks."""
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from dataset_model import (  # noqa: E402
    BINARY_CLASS,
    EMPTY_NOMINAL_ATTRIBUTES,
    MISSING_CLASS_VALUES,
    MISSING_VALUES,
    NOMINAL_ATTRIBUTES,
    NUMERIC_CLASS,
    UNARY_ATTRIBUTES,
    extract_token,
    load_dataset,
)
from desk_datasets import bundled_names, load_bundled, secom_like, write_bundled  # noqa: E402


def test_six_bundled_datasets():
    assert bundled_names() == ['numeric_clean', 'secom_like', 'nominal_attrs',
                               'mixed_missing_class', 'regression', 'pathological']


def test_bundled_prefix_is_accepted():
    assert load_bundled('bundled:regression').fingerprint() == load_bundled('regression').fingerprint()


def test_unknown_bundled_name_raises_key_error():
    with pytest.raises(KeyError):
        load_bundled('nope')


def test_secom_like_has_the_sensor_shape(desk):
    d = desk['secom_like']
    assert d.n_rows == 400
    assert d.n_cells == 12_400
    assert extract_token(d)[MISSING_VALUES] == 1


@pytest.mark.parametrize('name, characteristic', [
    ('numeric_clean', BINARY_CLASS),
    ('nominal_attrs', NOMINAL_ATTRIBUTES),
    ('mixed_missing_class', MISSING_CLASS_VALUES),
    ('regression', NUMERIC_CLASS),
    ('pathological', EMPTY_NOMINAL_ATTRIBUTES),
    ('pathological', UNARY_ATTRIBUTES),
])
def test_each_dataset_shows_its_signature_characteristic(desk, name, characteristic):
    assert extract_token(desk[name])[characteristic] == 1


def test_numeric_clean_has_nothing_missing(desk):
    token = extract_token(desk['numeric_clean'])
    assert token[MISSING_VALUES] == 0
    assert token[MISSING_CLASS_VALUES] == 0


def test_generation_is_deterministic():
    assert secom_like().fingerprint() == load_bundled('secom_like').fingerprint()


def test_written_files_read_back(tmp_path):
    paths = write_bundled(tmp_path, ['nominal_attrs', 'pathological'])
    assert [p.name for p in paths] == ['nominal_attrs.arff', 'pathological.arff']
    for path in paths:
        again = load_dataset(path)
        assert again.fingerprint() == load_bundled(path.stem).fingerprint()
