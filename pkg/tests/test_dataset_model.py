"""Tests for datasets, token extraction and the two on-disk formats.

The token is the only thing the surrogate ever sees of a dataset, so most of
these pin one characteristic each: that it turns on when it should and stays
off when a neighbouring characteristic is what the data really has.
"""
import json
import os
import sys

import pytest
from pydantic import ValidationError

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from dataset_model import (  # noqa: E402
    BINARY_ATTRIBUTES,
    BINARY_CLASS,
    CHARACTERISTICS,
    DATE_ATTRIBUTES,
    EMPTY_NOMINAL_ATTRIBUTES,
    MISSING_CLASS_VALUES,
    MISSING_VALUES,
    NOMINAL_ATTRIBUTES,
    NOMINAL_CLASS,
    NUMERIC_ATTRIBUTES,
    NUMERIC_CLASS,
    PREDICTIVE_MODEL,
    STRING_CLASS,
    SYMBOLIC_CLASS,
    UNARY_ATTRIBUTES,
    UNARY_CLASS,
    Attribute,
    AttributeKind,
    CharacteristicToken,
    Dataset,
    DatasetInvariantError,
    DatasetParseError,
    SchemaMismatchError,
    extract_token,
    implied_characteristics,
    load_dataset,
    parse_arff,
    write_arff,
)

NUM = AttributeKind.NUMERIC
NOM = AttributeKind.NOMINAL

WEATHER = """% a small weather table
@RELATION weather

@attribute temp NUMERIC
@attribute outlook {sunny, rain}
@attribute note string
@attribute play {yes,no}

@data
1.5,sunny,'light wind',yes
?,rain,?,no
2.0,rain,calm,yes
"""


def dataset(attributes, rows, class_index=None):
    ci = len(attributes) - 1 if class_index is None else class_index
    return Dataset.from_rows('t', attributes, rows, ci)


def with_last_row(replacement):
    lines = WEATHER.splitlines()
    lines[-1] = replacement
    return '\n'.join(lines) + '\n'


# --- token extraction ------------------------------------------------------

def test_binary_nominal_class_sets_the_symbolic_family():
    d = dataset([Attribute(name='x', kind=NUM),
                 Attribute(name='y', kind=NOM, categories=('a', 'b'))],
                [[1.0, 'a'], [2.0, 'b'], [3.0, 'a']])
    assert set(extract_token(d).active()) == {
        BINARY_CLASS, NOMINAL_CLASS, SYMBOLIC_CLASS, NUMERIC_ATTRIBUTES}


def test_a_class_with_one_observed_value_is_unary_not_binary():
    """Two categories declared, only one ever seen."""
    d = dataset([Attribute(name='x', kind=NUM),
                 Attribute(name='y', kind=NOM, categories=('a', 'b'))],
                [[1.0, 'a'], [2.0, 'a']])
    token = extract_token(d)
    assert token[UNARY_CLASS] == 1
    assert token[BINARY_CLASS] == 0
    assert token[NOMINAL_CLASS] == 1


def test_missing_class_cells_do_not_count_as_missing_values():
    d = dataset([Attribute(name='x', kind=NUM), Attribute(name='y', kind=NUM)],
                [[1.0, 0.5], [2.0, None], [3.0, 1.5]])
    token = extract_token(d)
    assert token[NUMERIC_CLASS] == 1
    assert token[MISSING_CLASS_VALUES] == 1
    assert token[MISSING_VALUES] == 0


def test_string_class_is_symbolic_but_not_nominal():
    d = dataset([Attribute(name='x', kind=NUM), Attribute(name='y', kind=AttributeKind.STRING)],
                [[1.0, 'p'], [2.0, 'q']])
    token = extract_token(d)
    assert token[STRING_CLASS] == 1
    assert token[SYMBOLIC_CLASS] == 1
    assert token[NOMINAL_CLASS] == 0


def test_all_missing_nominal_attribute_is_empty_and_missing_but_not_unary():
    d = dataset([Attribute(name='x', kind=NUM),
                 Attribute(name='e', kind=NOM, categories=('p', 'q', 'r')),
                 Attribute(name='y', kind=NOM, categories=('a', 'b', 'c'))],
                [[1.0, None, 'a'], [2.0, None, 'b'], [3.0, None, 'c']])
    token = extract_token(d)
    assert token[EMPTY_NOMINAL_ATTRIBUTES] == 1
    assert token[NOMINAL_ATTRIBUTES] == 1
    assert token[MISSING_VALUES] == 1
    assert token[UNARY_ATTRIBUTES] == 0
    assert token[BINARY_ATTRIBUTES] == 0


def test_constant_column_is_unary():
    d = dataset([Attribute(name='c', kind=NUM), Attribute(name='x', kind=NUM),
                 Attribute(name='y', kind=NOM, categories=('a', 'b', 'c'))],
                [[7.0, 1.0, 'a'], [7.0, 2.0, 'b'], [7.0, 3.0, 'c']])
    assert extract_token(d)[UNARY_ATTRIBUTES] == 1


def test_date_feature_sets_date_attributes():
    d = dataset([Attribute(name='when', kind=AttributeKind.DATE), Attribute(name='y', kind=NUM)],
                [['2020-01-01', 1.0], ['2020-02-01', 2.0]])
    token = extract_token(d)
    assert token[DATE_ATTRIBUTES] == 1
    assert token[NUMERIC_ATTRIBUTES] == 0


def test_extraction_never_claims_a_trained_model():
    d = dataset([Attribute(name='x', kind=NUM), Attribute(name='y', kind=NUM)],
                [[1.0, 1.0], [2.0, 2.0]])
    assert extract_token(d)[PREDICTIVE_MODEL] == 0


def test_implied_characteristics_follow_extraction_rules():
    assert implied_characteristics([BINARY_CLASS]) == {BINARY_CLASS, NOMINAL_CLASS, SYMBOLIC_CLASS}
    assert implied_characteristics([EMPTY_NOMINAL_ATTRIBUTES]) == {
        EMPTY_NOMINAL_ATTRIBUTES, NOMINAL_ATTRIBUTES, MISSING_VALUES}


# --- characteristic vectors ------------------------------------------------

def test_token_must_name_every_characteristic():
    values = {c: 0 for c in CHARACTERISTICS[:-1]}
    with pytest.raises(ValidationError):
        CharacteristicToken(values=values)


def test_token_values_are_binary():
    with pytest.raises(ValidationError):
        CharacteristicToken.of(MISSING_VALUES=2)


def test_active_lists_names_in_table_order():
    token = CharacteristicToken.from_active([NUMERIC_ATTRIBUTES, BINARY_CLASS, MISSING_VALUES])
    assert token.active() == [BINARY_CLASS, MISSING_VALUES, NUMERIC_ATTRIBUTES]
    assert token.as_array().sum() == 3


# --- dataset invariants ----------------------------------------------------

def test_class_index_out_of_range_is_rejected():
    with pytest.raises(DatasetInvariantError):
        dataset([Attribute(name='x', kind=NUM)], [[1.0]], class_index=3)


def test_nominal_value_outside_categories_is_rejected():
    with pytest.raises(DatasetInvariantError, match='outside its categories'):
        dataset([Attribute(name='x', kind=NUM),
                 Attribute(name='y', kind=NOM, categories=('a', 'b'))],
                [[1.0, 'a'], [2.0, 'z']])


def test_duplicate_attribute_names_are_rejected():
    with pytest.raises(DatasetInvariantError, match='duplicate'):
        dataset([Attribute(name='x', kind=NUM), Attribute(name='x', kind=NUM)],
                [[1.0, 2.0]])


def test_ragged_rows_are_rejected():
    with pytest.raises(DatasetInvariantError):
        dataset([Attribute(name='x', kind=NUM), Attribute(name='y', kind=NUM)],
                [[1.0, 2.0], [3.0]])


def test_take_keeps_schema_and_requested_order():
    d = dataset([Attribute(name='x', kind=NUM), Attribute(name='y', kind=NUM)],
                [[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
    sub = d.take([2, 0])
    assert sub.attributes == d.attributes
    assert sub.rows() == [[3.0, 30.0], [1.0, 10.0]]


# --- ARFF ------------------------------------------------------------------

def test_arff_subset_parses_comments_quotes_and_missing_cells():
    d = parse_arff(WEATHER)
    assert d.name == 'weather'
    assert d.class_attribute.name == 'play'
    assert [a.kind for a in d.attributes] == [NUM, NOM, AttributeKind.STRING, NOM]
    assert d.attributes[1].categories == ('sunny', 'rain')
    assert d.rows() == [[1.5, 'sunny', 'light wind', 'yes'],
                        [None, 'rain', None, 'no'],
                        [2.0, 'rain', 'calm', 'yes']]
    assert set(extract_token(d).active()) == {
        BINARY_CLASS, NOMINAL_CLASS, SYMBOLIC_CLASS, BINARY_ATTRIBUTES,
        MISSING_VALUES, NOMINAL_ATTRIBUTES, NUMERIC_ATTRIBUTES}


def test_class_index_can_be_chosen_explicitly():
    d = parse_arff(WEATHER, class_index=0)
    assert d.class_attribute.name == 'temp'
    assert extract_token(d)[NUMERIC_CLASS] == 1


def test_unknown_category_reports_line_and_column():
    with pytest.raises(DatasetParseError) as err:
        parse_arff(with_last_row('2.0, snow, calm, yes'), path='w.arff')
    assert (err.value.line, err.value.column) == (12, 6)
    assert 'snow' in str(err.value)
    assert str(err.value).startswith('w.arff:12:6:')


def test_non_numeric_value_in_numeric_column_is_a_parse_error():
    with pytest.raises(DatasetParseError) as err:
        parse_arff(with_last_row('abc,rain,calm,yes'))
    assert (err.value.line, err.value.column) == (12, 1)


def test_row_with_wrong_arity_is_a_schema_mismatch():
    with pytest.raises(SchemaMismatchError):
        parse_arff(with_last_row('2.0,rain,yes'))


def test_sparse_rows_are_refused():
    with pytest.raises(DatasetParseError, match='sparse'):
        parse_arff(with_last_row('{0 2.0, 3 yes}'))


def test_missing_data_section_is_a_parse_error():
    with pytest.raises(DatasetParseError, match='@data'):
        parse_arff('@relation r\n@attribute x numeric\n')


def test_bad_date_is_a_parse_error():
    text = '@relation r\n@attribute d date\n@attribute y numeric\n@data\nnot-a-date,1\n'
    with pytest.raises(DatasetParseError) as err:
        parse_arff(text)
    assert err.value.line == 5


@pytest.mark.parametrize('value', ["'March 3 2020'", '03/04/2020', '2020-13-01', 'soon'])
def test_only_iso_dates_are_accepted(value):
    text = f"@relation r\n@attribute d date\n@attribute y numeric\n@data\n2020-01-06,0\n{value},1\n"
    with pytest.raises(DatasetParseError, match='ISO-8601') as err:
        parse_arff(text)
    assert err.value.line == 6


@pytest.mark.parametrize('value', ['2020-01-06', '2020-01-06T12:30:00', "'2020-01-06 12:30:00'"])
def test_iso_dates_and_timestamps_parse(value):
    d = parse_arff(f"@relation r\n@attribute d date\n@attribute y numeric\n@data\n{value},1\n")
    assert d.n_rows == 1


def test_written_arff_reads_back_to_the_same_dataset(tmp_path):
    d = parse_arff(WEATHER)
    path = tmp_path / 'weather.arff'
    write_arff(d, path)
    again = load_dataset(path)
    assert again.fingerprint() == d.fingerprint()


# --- CSV with schema sidecar -------------------------------------------------

SCHEMA = {
    'class_index': 2,
    'attributes': [
        {'name': 'x', 'kind': 'numeric'},
        {'name': 'colour', 'kind': 'nominal', 'categories': ['red', 'blue']},
        {'name': 'label', 'kind': 'nominal', 'categories': ['yes', 'no']},
    ],
}


def write_csv(tmp_path, header='x,colour,label', schema=SCHEMA):
    csv_path = tmp_path / 'data.csv'
    csv_path.write_text(f"{header}\n1.0,red,yes\n,blue,no\n2.5,?,yes\n")
    (tmp_path / 'data.schema.json').write_text(json.dumps(schema))
    return csv_path


def test_csv_uses_the_schema_sidecar(tmp_path):
    d = load_dataset(write_csv(tmp_path))
    assert d.name == 'data'
    assert d.class_attribute.name == 'label'
    assert d.rows() == [[1.0, 'red', 'yes'], [None, 'blue', 'no'], [2.5, None, 'yes']]


def test_csv_header_disagreeing_with_schema_is_a_mismatch(tmp_path):
    with pytest.raises(SchemaMismatchError):
        load_dataset(write_csv(tmp_path, header='x,color,label'))


def test_unknown_format_is_a_parse_error(tmp_path):
    with pytest.raises(DatasetParseError, match='unknown dataset format'):
        load_dataset(tmp_path / 'data.parquet')
