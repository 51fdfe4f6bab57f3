#!/usr/bin/env python3
"""
The six bundled desk datasets the benchmarks run on.

They are generated in code from fixed seeds, so `bundled:<name>` always means the
same bytes. Together they cover the capability branches of the pool: clean
numeric data, numeric data with missing cells, nominal attributes, missing class
values, a numeric class, and unary/empty-nominal columns.

Usage:
    python desk_datasets.py --out datasets/
"""

import argparse
import logging
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from dataset_model import Attribute, AttributeKind, Dataset, write_arff

logger = logging.getLogger(__name__)

BUNDLED_PREFIX = 'bundled:'


def _numeric(name: str) -> Attribute:
    return Attribute(name=name, kind=AttributeKind.NUMERIC)


def _nominal(name: str, categories) -> Attribute:
    return Attribute(name=name, kind=AttributeKind.NOMINAL, categories=tuple(categories))


def _every_category(values: List[str], categories, rng) -> List[str]:
    """Overwrite a few random cells so every declared category is present."""
    idx = rng.choice(len(values), size=len(categories), replace=False)
    for i, cat in zip(idx, categories):
        values[int(i)] = cat
    return values


def _labels(score: np.ndarray, categories) -> List[str]:
    """Cut a continuous score into len(categories) equal-frequency classes."""
    cuts = np.quantile(score, np.linspace(0, 1, len(categories) + 1)[1:-1])
    return [categories[int(i)] for i in np.searchsorted(cuts, score)]


def numeric_clean() -> Dataset:
    rng = np.random.default_rng(101)
    n, p = 200, 6
    X = rng.normal(size=(n, p))
    score = X[:, 0] + 0.5 * X[:, 1] - X[:, 2] + 0.3 * rng.normal(size=n)
    attributes = [_numeric(f"f{j}") for j in range(p)] + [_nominal('class', ('neg', 'pos'))]
    columns = {f"f{j}": X[:, j] for j in range(p)}
    columns['class'] = _labels(score, ('neg', 'pos'))
    return Dataset.from_columns('numeric_clean', attributes, columns, class_index=p)


def secom_like() -> Dataset:
    """Sensor-style data: 30 numeric readings with missing cells, three outcomes."""
    rng = np.random.default_rng(202)
    n, p = 400, 30
    X = rng.normal(size=(n, p)) * rng.uniform(0.5, 5.0, size=p) + rng.uniform(-10, 10, size=p)
    score = X[:, 0] / 5 - X[:, 3] / 3 + X[:, 7] / 4 + 0.5 * rng.normal(size=n)
    labels = _labels(score, ('pass', 'fail', 'review'))
    X[rng.random(size=(n, p)) < 0.05] = np.nan
    attributes = [_numeric(f"sensor{j:02d}") for j in range(p)]
    attributes.append(_nominal('class', ('pass', 'fail', 'review')))
    columns = {f"sensor{j:02d}": X[:, j] for j in range(p)}
    columns['class'] = labels
    return Dataset.from_columns('secom_like', attributes, columns, class_index=p)


def nominal_attrs() -> Dataset:
    rng = np.random.default_rng(303)
    n = 240
    colour = _every_category(list(rng.choice(['red', 'green', 'blue'], size=n)),
                             ('red', 'green', 'blue'), rng)
    size = _every_category(list(rng.choice(['s', 'm', 'l', 'xl'], size=n)), ('s', 'm', 'l', 'xl'), rng)
    flag = _every_category(list(rng.choice(['yes', 'no'], size=n)), ('yes', 'no'), rng)
    x = rng.normal(size=n)
    score = x + (np.array(colour) == 'red') - 0.8 * (np.array(flag) == 'yes') + 0.3 * rng.normal(size=n)
    attributes = [_nominal('colour', ('red', 'green', 'blue')), _nominal('size', ('s', 'm', 'l', 'xl')),
                  _nominal('flag', ('yes', 'no')), _numeric('x'), _nominal('class', ('good', 'bad'))]
    columns = {'colour': colour, 'size': size, 'flag': flag, 'x': x,
               'class': _labels(score, ('good', 'bad'))}
    return Dataset.from_columns('nominal_attrs', attributes, columns, class_index=4)


def mixed_missing_class() -> Dataset:
    rng = np.random.default_rng(404)
    n = 240
    a = rng.normal(size=n)
    b = rng.uniform(0, 10, size=n)
    kind = _every_category(list(rng.choice(['k1', 'k2', 'k3'], size=n)), ('k1', 'k2', 'k3'), rng)
    score = a + b / 5 + 0.4 * rng.normal(size=n)
    labels = _labels(score, ('low', 'mid', 'high'))
    a[rng.random(n) < 0.08] = np.nan
    kind_values: List = [None if rng.random() < 0.05 else k for k in kind]
    kind_values = _every_category(kind_values, ('k1', 'k2', 'k3'), rng)
    class_values: List = [None if i % 20 == 7 else v for i, v in enumerate(labels)]
    attributes = [_numeric('a'), _numeric('b'), _nominal('kind', ('k1', 'k2', 'k3')),
                  _nominal('class', ('low', 'mid', 'high'))]
    columns = {'a': a, 'b': b, 'kind': kind_values, 'class': class_values}
    return Dataset.from_columns('mixed_missing_class', attributes, columns, class_index=3)


def regression() -> Dataset:
    rng = np.random.default_rng(505)
    n, p = 200, 5
    X = rng.uniform(-1, 1, size=(n, p))
    y = 3 * X[:, 0] - 2 * X[:, 1] + X[:, 2] * X[:, 3] + 0.1 * rng.normal(size=n)
    attributes = [_numeric(f"r{j}") for j in range(p)] + [_numeric('target')]
    columns = {f"r{j}": X[:, j] for j in range(p)}
    columns['target'] = y
    return Dataset.from_columns('regression', attributes, columns, class_index=p)


def pathological() -> Dataset:
    """A constant column and a nominal column with no values at all."""
    rng = np.random.default_rng(606)
    n = 120
    carrier = rng.normal(size=n)
    shade = _every_category(list(rng.choice(['light', 'dark', 'mid'], size=n)), ('light', 'dark', 'mid'), rng)
    attributes = [_numeric('carrier'), _numeric('constant'), _nominal('empty', ('p', 'q', 'r')),
                  _nominal('shade', ('light', 'dark', 'mid')), _nominal('class', ('a', 'b'))]
    columns = {'carrier': carrier, 'constant': np.full(n, 1.0), 'empty': [None] * n,
               'shade': shade, 'class': _labels(carrier + 0.5 * rng.normal(size=n), ('a', 'b'))}
    return Dataset.from_columns('pathological', attributes, columns, class_index=4)


BUNDLED: Dict[str, Callable[[], Dataset]] = {
    'numeric_clean': numeric_clean,
    'secom_like': secom_like,
    'nominal_attrs': nominal_attrs,
    'mixed_missing_class': mixed_missing_class,
    'regression': regression,
    'pathological': pathological,
}


def bundled_names() -> List[str]:
    return list(BUNDLED)


@lru_cache(maxsize=None)
def load_bundled(name: str) -> Dataset:
    if name.startswith(BUNDLED_PREFIX):
        name = name[len(BUNDLED_PREFIX):]
    if name not in BUNDLED:
        raise KeyError(f"no bundled dataset {name!r}; choose from {bundled_names()}")
    return BUNDLED[name]()


def bundled_datasets(names=None) -> List[Dataset]:
    return [load_bundled(n) for n in (names or bundled_names())]


def write_bundled(out_dir, names=None) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for d in bundled_datasets(names):
        path = out / f"{d.name}.arff"
        write_arff(d, path)
        paths.append(path)
        logger.info(f"Wrote {d.name}: {d.n_rows} rows x {len(d.attributes)} attributes -> {path}")
    return paths


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Write the bundled desk datasets as ARFF.')
    ap.add_argument('--out', required=True)
    args = ap.parse_args()
    write_bundled(args.out)


if __name__ == '__main__':
    main()
