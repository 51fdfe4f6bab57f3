#!/usr/bin/env python3
"""
Minimal datasets that each isolate one dataset-characteristic.

Every attribute-side characteristic gets a numeric-class and a nominal-class case;
every class-side characteristic gets a case with its own class kind
(MISSING_CLASS_VALUES gets both a numeric and a nominal one). Each case also
carries a uniform numeric "carrier" attribute so predictors always have a usable
feature, which keeps NUMERIC_ATTRIBUTES on everywhere.

Usage:
    python synthetic_datasets.py --out synthetic/ [--rows 16] [--seed 0]
"""

import argparse
import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict

from dataset_model import (
    BINARY_ATTRIBUTES, BINARY_CLASS, DATE_ATTRIBUTES, DATE_CLASS,
    EMPTY_NOMINAL_ATTRIBUTES, MISSING_CLASS_VALUES, MISSING_VALUES,
    NOMINAL_ATTRIBUTES, NOMINAL_CLASS, NUMERIC_ATTRIBUTES, NUMERIC_CLASS,
    SCHEMA_VERSION, STRING_CLASS, UNARY_ATTRIBUTES, UNARY_CLASS,
    Attribute, AttributeKind, CharacteristicToken, Dataset, extract_token,
    implied_characteristics, load_dataset, write_arff,
)

logger = logging.getLogger(__name__)

NUMERIC, NOMINAL, DATE, STRING = 'numeric', 'nominal', 'date', 'string'

CLASS_FLAG = {NUMERIC: NUMERIC_CLASS, NOMINAL: NOMINAL_CLASS, DATE: DATE_CLASS, STRING: STRING_CLASS}

ATTRIBUTE_CASES = (BINARY_ATTRIBUTES, DATE_ATTRIBUTES, EMPTY_NOMINAL_ATTRIBUTES, MISSING_VALUES,
                   NOMINAL_ATTRIBUTES, NUMERIC_ATTRIBUTES, UNARY_ATTRIBUTES)

CLASS_CASES = (
    (BINARY_CLASS, NOMINAL),
    (NUMERIC_CLASS, NUMERIC),
    (DATE_CLASS, DATE),
    (MISSING_CLASS_VALUES, NUMERIC),
    (MISSING_CLASS_VALUES, NOMINAL),
    (NOMINAL_CLASS, NOMINAL),
    (STRING_CLASS, STRING),
    (UNARY_CLASS, NOMINAL),
)

CATEGORIES = ('a', 'b', 'c')
# One ISO week of 2020 (Monday to Sunday).
WEEK = tuple(f"2020-01-{day:02d}" for day in range(6, 13))


class SyntheticCase(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    characteristic: str
    class_variant: str
    dataset: Dataset

    @property
    def key(self) -> str:
        return f"{self.characteristic}__{self.class_variant}"

    @property
    def expected_active(self) -> set:
        """Characteristics the case is meant to exhibit, carrier included."""
        return implied_characteristics({self.characteristic, CLASS_FLAG[self.class_variant],
                                        NUMERIC_ATTRIBUTES})

    def token(self) -> CharacteristicToken:
        return extract_token(self.dataset)


def _cycle(values, rows: int, rng) -> List[str]:
    """Every value at least once (for rows >= len(values)), shuffled."""
    out = [values[i % len(values)] for i in range(rows)]
    rng.shuffle(out)
    return out


def _class_column(variant: str, characteristic: str, rows: int, rng):
    if characteristic == BINARY_CLASS:
        return Attribute(name='class', kind=AttributeKind.NOMINAL, categories=('a', 'b')), \
            _cycle(('a', 'b'), rows, rng)
    if characteristic == UNARY_CLASS:
        return Attribute(name='class', kind=AttributeKind.NOMINAL, categories=('a',)), ['a'] * rows
    missing = characteristic == MISSING_CLASS_VALUES
    present_rows = [i for i in range(rows) if not (missing and i % 4 == 0)]
    if variant == NUMERIC:
        values = [None] * rows
        for i, v in zip(present_rows, rng.random(len(present_rows))):
            values[i] = float(v)
        return Attribute(name='class', kind=AttributeKind.NUMERIC), values
    if variant == NOMINAL:
        values = [None] * rows
        for i, v in zip(present_rows, _cycle(CATEGORIES, len(present_rows), rng)):
            values[i] = v
        return Attribute(name='class', kind=AttributeKind.NOMINAL, categories=CATEGORIES), values
    if variant == DATE:
        return Attribute(name='class', kind=AttributeKind.DATE), _cycle(WEEK, rows, rng)
    return Attribute(name='class', kind=AttributeKind.STRING), [f"s{i}" for i in range(rows)]


def _target_column(characteristic: str, rows: int, rng):
    name = 'x'
    if characteristic == BINARY_ATTRIBUTES:
        return Attribute(name=name, kind=AttributeKind.NOMINAL, categories=('a', 'b')), \
            _cycle(('a', 'b'), rows, rng)
    if characteristic == DATE_ATTRIBUTES:
        return Attribute(name=name, kind=AttributeKind.DATE), _cycle(WEEK, rows, rng)
    if characteristic == EMPTY_NOMINAL_ATTRIBUTES:
        return Attribute(name=name, kind=AttributeKind.NOMINAL, categories=CATEGORIES), [None] * rows
    if characteristic == MISSING_VALUES:
        values = rng.random(rows)
        return Attribute(name=name, kind=AttributeKind.NUMERIC), \
            [None if i % 4 == 0 else float(v) for i, v in enumerate(values)]
    if characteristic == NOMINAL_ATTRIBUTES:
        return Attribute(name=name, kind=AttributeKind.NOMINAL, categories=CATEGORIES), \
            _cycle(CATEGORIES, rows, rng)
    if characteristic == UNARY_ATTRIBUTES:
        return Attribute(name=name, kind=AttributeKind.NUMERIC), [0.5] * rows
    return None


def _make_case(characteristic: str, variant: str, rows: int, rng) -> SyntheticCase:
    attributes = [Attribute(name='carrier', kind=AttributeKind.NUMERIC)]
    columns: Dict[str, list] = {'carrier': [float(v) for v in rng.random(rows)]}
    target = _target_column(characteristic, rows, rng)
    if target is not None:
        attributes.append(target[0])
        columns[target[0].name] = target[1]
    cls, values = _class_column(variant, characteristic, rows, rng)
    attributes.append(cls)
    columns[cls.name] = values
    d = Dataset.from_columns(f"synthetic-{characteristic}-{variant}", attributes, columns,
                             class_index=len(attributes) - 1)
    return SyntheticCase(characteristic=characteristic, class_variant=variant, dataset=d)


def generate_suite(rows: int = 16, seed: int = 0) -> List[SyntheticCase]:
    """All cases in (characteristic, class_variant) order. Deterministic in (rows, seed)."""
    if rows < 8:
        raise ValueError(f"rows must be >= 8, got {rows}")
    plan = [(c, v) for c in ATTRIBUTE_CASES for v in (NUMERIC, NOMINAL)] + list(CLASS_CASES)
    plan.sort()
    rng = np.random.default_rng(seed)
    return [_make_case(c, v, rows, rng) for c, v in plan]


def isolation_violations(case: SyntheticCase) -> List[str]:
    """Characteristics whose extracted value differs from what the case is built to isolate."""
    active = set(case.token().active())
    expected = case.expected_active
    return sorted(active ^ expected)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def suite_hash(cases: List[SyntheticCase]) -> str:
    entries = [{'characteristic': c.characteristic, 'class_variant': c.class_variant,
                'fingerprint': c.dataset.fingerprint()} for c in cases]
    return hashlib.sha256(json.dumps(entries, sort_keys=True).encode('utf-8')).hexdigest()


def write_suite(cases: List[SyntheticCase], out_dir, rows: int = None, seed: int = None) -> Path:
    """ARFF per case plus manifest.json listing case -> expected token."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for case in cases:
        name = f"{case.key}.arff"
        write_arff(case.dataset, out / name)
        entries.append({
            'file': name,
            'characteristic': case.characteristic,
            'class_variant': case.class_variant,
            'expected_token': dict(case.token().ordered()),
        })
    manifest = {'schema_version': SCHEMA_VERSION, 'rows': rows, 'seed': seed,
                'suite_hash': suite_hash(cases), 'cases': entries}
    path = out / 'manifest.json'
    path.write_text(json.dumps(manifest, indent=2) + '\n', encoding='utf-8')
    logger.info(f"Wrote {len(cases)} synthetic cases to {out}")
    return path


def load_suite(directory) -> List[SyntheticCase]:
    directory = Path(directory)
    manifest = json.loads((directory / 'manifest.json').read_text(encoding='utf-8'))
    cases = []
    for entry in manifest['cases']:
        d = load_dataset(directory / entry['file'], format='arff')
        cases.append(SyntheticCase(characteristic=entry['characteristic'],
                                   class_variant=entry['class_variant'], dataset=d))
    return cases


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Write the synthetic characteristic suite.')
    ap.add_argument('--out', required=True)
    ap.add_argument('--rows', type=int, default=16)
    ap.add_argument('--seed', type=int, default=0)
    args = ap.parse_args()
    write_suite(generate_suite(args.rows, args.seed), args.out, args.rows, args.seed)


if __name__ == '__main__':
    main()
