#!/usr/bin/env python3
"""
Datasets, their on-disk formats, and the 16 dataset-characteristics.

A Dataset is an immutable column store (a pandas DataFrame behind a pydantic
model) with typed attributes and one designated class attribute. Everything the
surrogate knows about a dataset is the CharacteristicToken extracted here: a
0/1 value for each of the 16 characteristics below.

Two formats are read: a strict ARFF subset (@relation/@attribute/@data, `?` for
missing, single-quoted values) and CSV with a JSON schema sidecar
(`<name>.schema.json` next to `<name>.csv`).

Usage:
    python dataset_model.py some.arff          # print the extracted token
"""

import hashlib
import io
import json
import logging
import re
import sys
from enum import Enum
from pathlib import Path
from typing import Any, ClassVar, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Table order. Tokens, vectors and KB files all list characteristics in this order.
BINARY_CLASS = 'BINARY_CLASS'
NUMERIC_CLASS = 'NUMERIC_CLASS'
DATE_CLASS = 'DATE_CLASS'
MISSING_CLASS_VALUES = 'MISSING_CLASS_VALUES'
NOMINAL_CLASS = 'NOMINAL_CLASS'
SYMBOLIC_CLASS = 'SYMBOLIC_CLASS'
STRING_CLASS = 'STRING_CLASS'
UNARY_CLASS = 'UNARY_CLASS'
BINARY_ATTRIBUTES = 'BINARY_ATTRIBUTES'
DATE_ATTRIBUTES = 'DATE_ATTRIBUTES'
EMPTY_NOMINAL_ATTRIBUTES = 'EMPTY_NOMINAL_ATTRIBUTES'
MISSING_VALUES = 'MISSING_VALUES'
NOMINAL_ATTRIBUTES = 'NOMINAL_ATTRIBUTES'
NUMERIC_ATTRIBUTES = 'NUMERIC_ATTRIBUTES'
UNARY_ATTRIBUTES = 'UNARY_ATTRIBUTES'
PREDICTIVE_MODEL = 'PREDICTIVE_MODEL'

CHARACTERISTICS: Tuple[str, ...] = (
    BINARY_CLASS, NUMERIC_CLASS, DATE_CLASS, MISSING_CLASS_VALUES, NOMINAL_CLASS,
    SYMBOLIC_CLASS, STRING_CLASS, UNARY_CLASS, BINARY_ATTRIBUTES, DATE_ATTRIBUTES,
    EMPTY_NOMINAL_ATTRIBUTES, MISSING_VALUES, NOMINAL_ATTRIBUTES, NUMERIC_ATTRIBUTES,
    UNARY_ATTRIBUTES, PREDICTIVE_MODEL,
)

CLASS_SIDE = (BINARY_CLASS, NUMERIC_CLASS, DATE_CLASS, MISSING_CLASS_VALUES,
              NOMINAL_CLASS, SYMBOLIC_CLASS, STRING_CLASS, UNARY_CLASS)
ATTRIBUTE_SIDE = (BINARY_ATTRIBUTES, DATE_ATTRIBUTES, EMPTY_NOMINAL_ATTRIBUTES,
                  MISSING_VALUES, NOMINAL_ATTRIBUTES, NUMERIC_ATTRIBUTES, UNARY_ATTRIBUTES)

# At most one of these is set for a dataset. BINARY_CLASS and UNARY_CLASS refine
# NOMINAL_CLASS and co-occur with it.
BASE_CLASS_KINDS = (NUMERIC_CLASS, DATE_CLASS, NOMINAL_CLASS, STRING_CLASS)

_IMPLIED = {
    BINARY_CLASS: (NOMINAL_CLASS, SYMBOLIC_CLASS),
    UNARY_CLASS: (NOMINAL_CLASS, SYMBOLIC_CLASS),
    NOMINAL_CLASS: (SYMBOLIC_CLASS,),
    STRING_CLASS: (SYMBOLIC_CLASS,),
    BINARY_ATTRIBUTES: (NOMINAL_ATTRIBUTES,),
    EMPTY_NOMINAL_ATTRIBUTES: (NOMINAL_ATTRIBUTES, MISSING_VALUES),
}


def implied_characteristics(names: Iterable[str]) -> set:
    """Closure of `names` under the co-occurrence rules of extract_token."""
    out = set()
    stack = list(names)
    while stack:
        name = stack.pop()
        if name in out:
            continue
        out.add(name)
        stack.extend(_IMPLIED.get(name, ()))
    return out


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class AvatarError(Exception):
    """Root of every error this project raises on purpose."""


class DatasetInvariantError(AvatarError):
    """A dataset built in memory breaks one of the Dataset invariants."""


class DatasetParseError(AvatarError):
    """A dataset file does not parse. Line and column are 1-based."""

    def __init__(self, path, line: int, column: int, message: str):
        self.path = str(path)
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"{self.path}:{line}:{column}: {message}")


class SchemaMismatchError(AvatarError):
    """The declared schema and the observed data disagree on arity."""


# ---------------------------------------------------------------------------
# Attributes and datasets
# ---------------------------------------------------------------------------

class AttributeKind(str, Enum):
    NUMERIC = 'numeric'
    NOMINAL = 'nominal'
    STRING = 'string'
    DATE = 'date'


class Attribute(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: AttributeKind
    categories: Tuple[str, ...] = ()


def _is_missing(value: Any) -> bool:
    if value is None:
        return True
    if isinstance(value, float) and np.isnan(value):
        return True
    return False


class Dataset(BaseModel):
    """Immutable table: typed attributes, optional cells, one class attribute.

    Numeric columns are float64 with NaN for missing; nominal, string and date
    columns hold str or None. Columns are named after their attributes and kept
    in attribute order.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    attributes: Tuple[Attribute, ...]
    frame: pd.DataFrame
    class_index: int

    @model_validator(mode='after')
    def _check_invariants(self):
        n = len(self.attributes)
        if not 0 <= self.class_index < n:
            raise DatasetInvariantError(
                f"class_index {self.class_index} out of range for {n} attributes")
        names = [a.name for a in self.attributes]
        if len(set(names)) != n:
            raise DatasetInvariantError(f"duplicate attribute names in {names}")
        if list(self.frame.columns) != names:
            raise DatasetInvariantError(
                f"frame columns {list(self.frame.columns)} do not match attributes {names}")
        for attr in self.attributes:
            if attr.kind != AttributeKind.NOMINAL:
                continue
            col = self.frame[attr.name]
            present = col[col.notna()]
            if not attr.categories and len(present):
                raise DatasetInvariantError(
                    f"nominal attribute {attr.name!r} has values but no categories")
            bad = set(present) - set(attr.categories)
            if bad:
                raise DatasetInvariantError(
                    f"nominal attribute {attr.name!r} has values {sorted(bad)} "
                    f"outside its categories {list(attr.categories)}")
        return self

    # -- construction --------------------------------------------------------

    @classmethod
    def from_rows(cls, name: str, attributes: Sequence[Attribute],
                  rows: Sequence[Sequence[Any]], class_index: int) -> 'Dataset':
        """Build from a row-major grid; None (or NaN) marks a missing cell."""
        attributes = tuple(attributes)
        for i, row in enumerate(rows):
            if len(row) != len(attributes):
                raise DatasetInvariantError(
                    f"row {i} has {len(row)} cells, expected {len(attributes)}")
        columns = {}
        for j, attr in enumerate(attributes):
            columns[attr.name] = _column([row[j] for row in rows], attr)
        frame = pd.DataFrame(columns, index=pd.RangeIndex(len(rows)))
        if not rows:
            frame = pd.DataFrame({a.name: _column([], a) for a in attributes})
        return cls(name=name, attributes=attributes, frame=frame, class_index=class_index)

    @classmethod
    def from_columns(cls, name: str, attributes: Sequence[Attribute],
                     columns: Dict[str, Sequence[Any]], class_index: int) -> 'Dataset':
        attributes = tuple(attributes)
        frame = pd.DataFrame({a.name: _column(list(columns[a.name]), a) for a in attributes})
        return cls(name=name, attributes=attributes, frame=frame, class_index=class_index)

    def replace(self, attributes: Sequence[Attribute], frame: pd.DataFrame,
                class_index: Optional[int] = None) -> 'Dataset':
        """A new dataset with the same name; used by components to emit their output."""
        attributes = tuple(attributes)
        frame = frame.reset_index(drop=True)
        frame = pd.DataFrame({a.name: _column(list(frame[a.name]), a) for a in attributes},
                             index=pd.RangeIndex(len(frame)))
        return Dataset(name=self.name, attributes=attributes, frame=frame,
                       class_index=self.class_index if class_index is None else class_index)

    # -- views ---------------------------------------------------------------

    @property
    def class_attribute(self) -> Attribute:
        return self.attributes[self.class_index]

    @property
    def feature_attributes(self) -> List[Attribute]:
        return [a for i, a in enumerate(self.attributes) if i != self.class_index]

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def n_cells(self) -> int:
        return self.n_rows * len(self.attributes)

    def class_values(self) -> pd.Series:
        return self.frame[self.class_attribute.name]

    def rows(self) -> List[List[Any]]:
        """Row-major grid with None for missing cells."""
        out = []
        for record in self.frame.itertuples(index=False, name=None):
            out.append([None if _is_missing(v) else v for v in record])
        return out

    def take(self, indices: Sequence[int]) -> 'Dataset':
        """Row subset (or multiset) in the given order."""
        frame = self.frame.iloc[list(indices)].reset_index(drop=True)
        return Dataset(name=self.name, attributes=self.attributes, frame=frame,
                       class_index=self.class_index)

    def to_arff(self) -> str:
        buf = io.StringIO()
        buf.write(f"@relation {_quote(self.name)}\n\n")
        for attr in self.attributes:
            buf.write(f"@attribute {_quote(attr.name)} {_arff_type(attr)}\n")
        buf.write("\n@data\n")
        for row in self.rows():
            cells = [_arff_cell(v, a) for v, a in zip(row, self.attributes)]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_arff().encode('utf-8')).hexdigest()


def _column(values: List[Any], attr: Attribute):
    if attr.kind == AttributeKind.NUMERIC:
        return np.array([np.nan if _is_missing(v) else float(v) for v in values],
                        dtype=np.float64)
    return pd.Series([None if _is_missing(v) else str(v) for v in values], dtype=object).to_numpy()


# ---------------------------------------------------------------------------
# Characteristic vectors
# ---------------------------------------------------------------------------

class CharacteristicVector(BaseModel):
    """Map over exactly the 16 characteristics; subclasses fix the value range."""
    model_config = ConfigDict(frozen=True)

    ALLOWED: ClassVar[Tuple[int, ...]] = (0, 1)

    values: Dict[str, int]

    @model_validator(mode='after')
    def _check_keys(self):
        keys = set(self.values)
        missing = [c for c in CHARACTERISTICS if c not in keys]
        extra = sorted(keys - set(CHARACTERISTICS))
        if missing or extra:
            raise ValueError(f"characteristic keys wrong: missing={missing} extra={extra}")
        for k, v in self.values.items():
            if v not in self.ALLOWED:
                raise ValueError(f"{k}={v} is outside {self.ALLOWED}")
        return self

    @classmethod
    def zeros(cls):
        return cls(values={c: 0 for c in CHARACTERISTICS})

    @classmethod
    def of(cls, **set_values: int):
        values = {c: 0 for c in CHARACTERISTICS}
        values.update(set_values)
        return cls(values=values)

    @classmethod
    def from_active(cls, names: Iterable[str]):
        names = set(names)
        return cls(values={c: int(c in names) for c in CHARACTERISTICS})

    def __getitem__(self, name: str) -> int:
        return self.values[name]

    def active(self) -> List[str]:
        """Names with a non-zero value, in table order."""
        return [c for c in CHARACTERISTICS if self.values[c]]

    def as_array(self) -> np.ndarray:
        return np.array([self.values[c] for c in CHARACTERISTICS], dtype=np.int8)

    def ordered(self) -> List[Tuple[str, int]]:
        return [(c, self.values[c]) for c in CHARACTERISTICS]


class CharacteristicToken(CharacteristicVector):
    """The Petri-net token: which characteristics a dataset (or model) exhibits."""


# ---------------------------------------------------------------------------
# Token extraction
# ---------------------------------------------------------------------------

def extract_token(d: Dataset) -> CharacteristicToken:
    """Compute the 16 dataset-characteristics of `d`. Pure and deterministic."""
    frame = d.frame
    cls = d.class_attribute
    present_class = frame[cls.name].dropna()
    on = set()

    if cls.kind == AttributeKind.NUMERIC:
        on.add(NUMERIC_CLASS)
    elif cls.kind == AttributeKind.DATE:
        on.add(DATE_CLASS)
    elif cls.kind == AttributeKind.STRING:
        on.update((STRING_CLASS, SYMBOLIC_CLASS))
    else:
        on.update((NOMINAL_CLASS, SYMBOLIC_CLASS))
        distinct = present_class.nunique()
        if distinct == 2:
            on.add(BINARY_CLASS)
        elif distinct == 1:
            on.add(UNARY_CLASS)
    if len(present_class) < len(frame):
        on.add(MISSING_CLASS_VALUES)

    for attr in d.feature_attributes:
        col = frame[attr.name]
        missing = col.isna()
        n_missing = int(missing.sum())
        if n_missing:
            on.add(MISSING_VALUES)
        if attr.kind == AttributeKind.NUMERIC:
            on.add(NUMERIC_ATTRIBUTES)
        elif attr.kind == AttributeKind.DATE:
            on.add(DATE_ATTRIBUTES)
        elif attr.kind == AttributeKind.NOMINAL:
            on.add(NOMINAL_ATTRIBUTES)
            if len(attr.categories) == 2:
                on.add(BINARY_ATTRIBUTES)
            if len(col) and n_missing == len(col):
                on.add(EMPTY_NOMINAL_ATTRIBUTES)
        if col.nunique(dropna=True) == 1:
            on.add(UNARY_ATTRIBUTES)

    return CharacteristicToken.from_active(on)


# ---------------------------------------------------------------------------
# ARFF subset
# ---------------------------------------------------------------------------

_NUMERIC_TYPES = {'numeric', 'real', 'integer'}


def _quote(text: str) -> str:
    if text == '' or re.search(r"[\s,{}'%\"?]", text):
        return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"
    return text


def _arff_type(attr: Attribute) -> str:
    if attr.kind == AttributeKind.NUMERIC:
        return 'numeric'
    if attr.kind == AttributeKind.STRING:
        return 'string'
    if attr.kind == AttributeKind.DATE:
        return 'date'
    return '{' + ','.join(_quote(c) for c in attr.categories) + '}'


def _arff_cell(value: Any, attr: Attribute) -> str:
    if value is None:
        return '?'
    if attr.kind == AttributeKind.NUMERIC:
        return repr(float(value))
    return _quote(str(value))


def _split_fields(text: str, path, line_no: int, start_col: int = 1) -> List[Tuple[str, bool, int]]:
    """Split a comma-separated ARFF line into (value, was_quoted, column) triples."""
    fields = []
    i, n = 0, len(text)
    while True:
        while i < n and text[i] in ' \t':
            i += 1
        col = start_col + i
        if i < n and text[i] == "'":
            i += 1
            buf = []
            while i < n and text[i] != "'":
                if text[i] == '\\' and i + 1 < n:
                    i += 1
                buf.append(text[i])
                i += 1
            if i >= n:
                raise DatasetParseError(path, line_no, col, 'unterminated quoted value')
            i += 1
            value, quoted = ''.join(buf), True
            while i < n and text[i] in ' \t':
                i += 1
        else:
            j = i
            while i < n and text[i] != ',':
                i += 1
            value, quoted = text[j:i].strip(), False
        fields.append((value, quoted, col))
        if i >= n:
            break
        if text[i] != ',':
            raise DatasetParseError(path, line_no, start_col + i, f"expected ',' but found {text[i]!r}")
        i += 1
    return fields


def _parse_attribute(rest: str, path, line_no: int, offset: int) -> Attribute:
    rest = rest.strip()
    if rest.startswith("'"):
        end = rest.find("'", 1)
        while end != -1 and rest[end - 1] == '\\':
            end = rest.find("'", end + 1)
        if end == -1:
            raise DatasetParseError(path, line_no, offset, 'unterminated attribute name')
        name = rest[1:end].replace("\\'", "'")
        type_text = rest[end + 1:].strip()
    else:
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise DatasetParseError(path, line_no, offset, 'attribute needs a name and a type')
        name, type_text = parts[0], parts[1].strip()
    lowered = type_text.lower()
    if lowered in _NUMERIC_TYPES:
        return Attribute(name=name, kind=AttributeKind.NUMERIC)
    if lowered == 'string':
        return Attribute(name=name, kind=AttributeKind.STRING)
    if lowered.startswith('date'):
        return Attribute(name=name, kind=AttributeKind.DATE)
    if type_text.startswith('{') and type_text.endswith('}'):
        inner = type_text[1:-1]
        categories = [v for v, _, _ in _split_fields(inner, path, line_no)] if inner.strip() else []
        if len(set(categories)) != len(categories):
            raise DatasetParseError(path, line_no, offset, f"duplicate categories in {type_text}")
        return Attribute(name=name, kind=AttributeKind.NOMINAL, categories=tuple(categories))
    raise DatasetParseError(path, line_no, offset, f"unsupported attribute type {type_text!r}")


def parse_arff(text: str, path='<string>', class_index: Optional[int] = None) -> Dataset:
    """Parse the ARFF subset. The class is the last attribute unless told otherwise."""
    relation = None
    attributes: List[Attribute] = []
    rows: List[List[Any]] = []
    in_data = False
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith('%'):
            continue
        offset = len(raw) - len(raw.lstrip()) + 1
        if not in_data:
            keyword = line.split(None, 1)[0].lower()
            rest = line[len(keyword):]
            if keyword == '@relation':
                relation = rest.strip().strip("'")
            elif keyword == '@attribute':
                attr = _parse_attribute(rest, path, line_no, offset)
                if any(a.name == attr.name for a in attributes):
                    raise DatasetParseError(path, line_no, offset, f"duplicate attribute {attr.name!r}")
                attributes.append(attr)
            elif keyword == '@data':
                if relation is None:
                    raise DatasetParseError(path, line_no, offset, '@data before @relation')
                if not attributes:
                    raise DatasetParseError(path, line_no, offset, '@data without attributes')
                in_data = True
            else:
                raise DatasetParseError(path, line_no, offset, f"unexpected header line {line[:40]!r}")
            continue
        if line.startswith('{'):
            raise DatasetParseError(path, line_no, offset, 'sparse rows are not supported')
        fields = _split_fields(raw.rstrip(), path, line_no)
        if len(fields) != len(attributes):
            raise SchemaMismatchError(
                f"{path}:{line_no}: row has {len(fields)} values, "
                f"{len(attributes)} attributes declared")
        row = []
        for (value, quoted, col), attr in zip(fields, attributes):
            row.append(_convert_cell(value, quoted, attr, path, line_no, col))
        rows.append(row)
    if not in_data:
        raise DatasetParseError(path, max(1, len(text.splitlines())), 1, 'no @data section')
    ci = len(attributes) - 1 if class_index is None else class_index
    if not 0 <= ci < len(attributes):
        raise DatasetParseError(path, 1, 1, f"class index {ci} out of range")
    return Dataset.from_rows(relation or Path(str(path)).stem, attributes, rows, ci)


def _convert_cell(value: str, quoted: bool, attr: Attribute, path, line_no: int, col: int):
    if value == '?' and not quoted:
        return None
    if attr.kind == AttributeKind.NUMERIC:
        try:
            return float(value)
        except ValueError:
            raise DatasetParseError(path, line_no, col,
                                    f"{value!r} is not numeric (attribute {attr.name!r})") from None
    if attr.kind == AttributeKind.NOMINAL and value not in attr.categories:
        raise DatasetParseError(path, line_no, col,
                                f"{value!r} is not a category of {attr.name!r} "
                                f"{list(attr.categories)}")
    if attr.kind == AttributeKind.DATE:
        try:
            pd.to_datetime(value, format='ISO8601')
        except (ValueError, TypeError):
            raise DatasetParseError(path, line_no, col,
                                    f"{value!r} is not an ISO-8601 date (attribute {attr.name!r})") from None
    return value


def write_arff(d: Dataset, path) -> None:
    Path(path).write_text(d.to_arff(), encoding='utf-8')


# ---------------------------------------------------------------------------
# CSV + JSON schema sidecar
# ---------------------------------------------------------------------------

class SchemaAttribute(BaseModel):
    name: str
    kind: AttributeKind
    categories: Optional[List[str]] = None


class DatasetSchema(BaseModel):
    class_index: int
    attributes: List[SchemaAttribute]


def schema_path_for(csv_path) -> Path:
    return Path(csv_path).with_suffix('.schema.json')


def load_schema(path) -> DatasetSchema:
    try:
        raw = json.loads(Path(path).read_text(encoding='utf-8'))
        return DatasetSchema.model_validate(raw)
    except json.JSONDecodeError as e:
        raise DatasetParseError(path, e.lineno, e.colno, f"schema is not JSON: {e.msg}") from None
    except ValidationError as e:
        err = e.errors()[0]
        where = '.'.join(str(p) for p in err['loc'])
        raise SchemaMismatchError(f"{path}: schema field {where}: {err['msg']}") from None


def parse_csv(path, schema: DatasetSchema) -> Dataset:
    df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    declared = [a.name for a in schema.attributes]
    if len(df.columns) != len(declared):
        raise SchemaMismatchError(
            f"{path}: header has {len(df.columns)} columns, schema declares {len(declared)}")
    if list(df.columns) != declared:
        raise SchemaMismatchError(f"{path}: header {list(df.columns)} != schema {declared}")
    attributes = [Attribute(name=a.name, kind=a.kind, categories=tuple(a.categories or ()))
                  for a in schema.attributes]
    rows = []
    for r, record in enumerate(df.itertuples(index=False, name=None)):
        row = []
        for c, (value, attr) in enumerate(zip(record, attributes)):
            value = value.strip()
            missing = value in ('', '?')
            row.append(None if missing else _convert_cell(value, False, attr, path, r + 2, c + 1))
        rows.append(row)
    if not 0 <= schema.class_index < len(attributes):
        raise SchemaMismatchError(f"{path}: class_index {schema.class_index} out of range")
    return Dataset.from_rows(Path(path).stem, attributes, rows, schema.class_index)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def load_dataset(path, format: Optional[str] = None, schema_path=None,
                 class_index: Optional[int] = None) -> Dataset:
    """Load `path` as 'arff' or 'csv' (guessed from the extension when not given)."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip('.')).lower()
    if fmt in ('arff', 'arff-subset'):
        text = path.read_text(encoding='utf-8')
        return parse_arff(text, path, class_index)
    if fmt in ('csv', 'csv-with-schema'):
        schema = load_schema(schema_path or schema_path_for(path))
        return parse_csv(path, schema)
    raise DatasetParseError(path, 1, 1, f"unknown dataset format {fmt!r}")


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    if len(sys.argv) != 2:
        raise SystemExit('usage: python dataset_model.py DATASET')
    token = extract_token(load_dataset(sys.argv[1]))
    print(json.dumps(dict(token.ordered()), indent=2))
