#!/usr/bin/env python3
"""
The native component pool: executable preprocessors and predictors with strict
input contracts.

Every component declares the dataset-characteristics it rejects. execute_component
checks the input token against that set before running anything, so a component
fails with `incompatibility` exactly when its contract is violated. Inside the
contract the implementations are total: they run on every synthetic and bundled
dataset without raising.

Preprocessors are fit/transform objects. Instance filters (outlier removal and the
samplers) only act on the data they were fitted on and pass held-out data through.

Usage:
    python component_pool.py                 # print the roster
    python component_pool.py --out pool.json
"""

import argparse
import json
import logging
import math
import time
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator

from dataset_model import (
    BINARY_ATTRIBUTES, BINARY_CLASS, DATE_ATTRIBUTES, DATE_CLASS,
    EMPTY_NOMINAL_ATTRIBUTES, MISSING_VALUES, NOMINAL_ATTRIBUTES, NOMINAL_CLASS,
    NUMERIC_CLASS, SCHEMA_VERSION, STRING_CLASS, SYMBOLIC_CLASS, UNARY_CLASS,
    Attribute, AttributeKind, AvatarError, Dataset, extract_token,
)
from learners import (
    Bagging, Deadline, DecisionTree, ExecutionTimeout, IncompatibleDataError,
    KNearestNeighbours, LinearRegression, Logistic, NaiveBayes, ZeroR, random_tree,
)

logger = logging.getLogger(__name__)


class UnknownComponentError(AvatarError):
    """A component id that neither the pool nor the knowledge base knows."""

    def __init__(self, component_id: str):
        self.component_id = component_id
        super().__init__(f"unknown component {component_id!r}")


class ComponentKind(str, Enum):
    MISSING_VALUE_HANDLER = 'missing_value_handler'
    OUTLIER_REMOVER = 'outlier_remover'
    TRANSFORMER = 'transformer'
    DIMENSIONALITY_REDUCER = 'dimensionality_reducer'
    SAMPLER = 'sampler'
    PREDICTOR = 'predictor'
    META_PREDICTOR = 'meta_predictor'


# Order in which preprocessing kinds may appear in a pipeline, each at most once.
TEMPLATE_ORDER: Tuple[ComponentKind, ...] = (
    ComponentKind.MISSING_VALUE_HANDLER,
    ComponentKind.OUTLIER_REMOVER,
    ComponentKind.TRANSFORMER,
    ComponentKind.DIMENSIONALITY_REDUCER,
    ComponentKind.SAMPLER,
)
PREDICTIVE_KINDS = frozenset({ComponentKind.PREDICTOR, ComponentKind.META_PREDICTOR})


class ComponentSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    kind: ComponentKind
    hyperparams: Tuple[Dict[str, Any], ...] = ({},)
    rejects: FrozenSet[str] = frozenset()
    description: str = ''

    @field_validator('hyperparams')
    @classmethod
    def _small_grid(cls, v):
        if not 1 <= len(v) <= 4:
            raise ValueError(f"hyperparameter grid must hold 1..4 settings, got {len(v)}")
        return v

    @property
    def is_predictive(self) -> bool:
        return self.kind in PREDICTIVE_KINDS

    def setting(self, index: int) -> Dict[str, Any]:
        return dict(self.hyperparams[index])

    def setting_index(self, hyperparams: Dict[str, Any]) -> int:
        for i, s in enumerate(self.hyperparams):
            if s == hyperparams:
                return i
        raise ValueError(f"{self.id}: {hyperparams} is not one of {list(self.hyperparams)}")


class ExecutionLimits(BaseModel):
    """Resource allowance for one execution: a wall-clock timeout and the seed."""
    model_config = ConfigDict(frozen=True)

    timeout: float
    seed: int = 0

    @field_validator('timeout')
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError(f"timeout must be > 0, got {v}")
        return v


class FailureReason(str, Enum):
    INCOMPATIBILITY = 'incompatibility'
    TIMEOUT = 'timeout'
    INTERNAL = 'internal'


# ---------------------------------------------------------------------------
# Row witnesses
# ---------------------------------------------------------------------------

def witness_rows(d: Dataset) -> List[int]:
    """Rows that keep the characteristic profile of `d` when every other row is dropped.

    One missing row per column with missing cells; every distinct value of nominal
    columns (features and class); two distinct values of every other column.
    """
    keep = set()
    for attr in d.attributes:
        col = d.frame[attr.name]
        missing = col.isna()
        if missing.any():
            keep.add(int(np.flatnonzero(missing.to_numpy())[0]))
        present = col[~missing]
        firsts = present.drop_duplicates().index
        if attr.kind != AttributeKind.NOMINAL:
            firsts = firsts[:2]
        keep.update(int(j) for j in firsts)
    return sorted(keep)


# ---------------------------------------------------------------------------
# Preprocessors
# ---------------------------------------------------------------------------

def _numeric_features(d: Dataset) -> List[Attribute]:
    return [a for a in d.feature_attributes if a.kind == AttributeKind.NUMERIC]


def _require_absent(d: Dataset, *kinds: AttributeKind, missing: bool = False) -> None:
    for a in d.feature_attributes:
        if a.kind in kinds:
            raise IncompatibleDataError(f"cannot process {a.kind.value} attribute {a.name!r}")
        if missing and d.frame[a.name].isna().any():
            raise IncompatibleDataError(f"cannot process missing values in {a.name!r}")


class Preprocessor:
    """Base for dataset-to-dataset components."""

    def __init__(self, params: Dict[str, Any], seed: int):
        self.params = params
        self.seed = seed

    def fit(self, d: Dataset, deadline: Deadline) -> None:
        pass

    def apply(self, d: Dataset) -> Dataset:
        return d

    def fit_transform(self, d: Dataset, deadline: Deadline) -> Dataset:
        self.fit(d, deadline)
        return self.apply(d)


class InstanceFilter(Preprocessor):
    """Changes which rows the training data holds; held-out data passes through."""

    def select(self, d: Dataset, deadline: Deadline) -> List[int]:
        raise NotImplementedError

    def fit_transform(self, d: Dataset, deadline: Deadline) -> Dataset:
        return d.take(self.select(d, deadline))


class ReplaceMissing(Preprocessor):
    """Mean (or median) for numeric features, mode for everything else."""

    def fit(self, d, deadline):
        self.fill = {}
        for a in d.feature_attributes:
            deadline.check()
            col = d.frame[a.name]
            present = col.dropna()
            if a.kind == AttributeKind.NUMERIC:
                if not len(present):
                    self.fill[a.name] = 0.0
                elif self.params.get('numeric') == 'median':
                    self.fill[a.name] = float(present.median())
                else:
                    self.fill[a.name] = float(present.mean())
                continue
            if not len(present):
                raise IncompatibleDataError(f"no value to impute for {a.name!r}")
            counts = present.value_counts()
            best = counts.max()
            self.fill[a.name] = sorted(v for v, c in counts.items() if c == best)[0]

    def apply(self, d):
        frame = d.frame.copy()
        for name, value in self.fill.items():
            if name in frame:
                frame[name] = frame[name].where(frame[name].notna(), value)
        return d.replace(d.attributes, frame)


class IterativeImputer(Preprocessor):
    """
    EM-style imputation restricted to all-numeric data: start from column means,
    then repeatedly re-estimate each incomplete column by least squares on the
    others until the imputed cells stop moving.
    """

    def _matrix(self, d: Dataset) -> np.ndarray:
        if not self.names:
            return np.zeros((d.n_rows, 0))
        return d.frame[self.names].to_numpy(dtype=float)

    def _write(self, d: Dataset, Z: np.ndarray) -> Dataset:
        frame = d.frame.copy()
        for j, name in enumerate(self.names):
            frame[name] = Z[:, j]
        return d.replace(d.attributes, frame)

    def _run(self, X: np.ndarray, deadline: Optional[Deadline], learn: bool) -> np.ndarray:
        missing = np.isnan(X)
        Z = np.where(missing, self.means, X)
        for _ in range(int(self.params.get('max_iter', 10))):
            if deadline is not None:
                deadline.check()
            shift = 0.0
            for j in range(X.shape[1]):
                if not missing[:, j].any():
                    continue
                A = np.hstack([np.ones((len(Z), 1)), np.delete(Z, j, axis=1)])
                if learn:
                    observed = ~missing[:, j]
                    if not observed.any():
                        continue
                    self.coefs[j] = np.linalg.lstsq(A[observed], Z[observed, j], rcond=None)[0]
                if j not in self.coefs:
                    continue
                new = A[missing[:, j]] @ self.coefs[j]
                shift = max(shift, float(np.max(np.abs(new - Z[missing[:, j], j]))))
                Z[missing[:, j], j] = new
            if shift < 1e-6:
                break
        return Z

    def fit(self, d, deadline):
        _require_absent(d, AttributeKind.NOMINAL, AttributeKind.DATE)
        self.names = [a.name for a in _numeric_features(d)]
        X = self._matrix(d)
        self.means = np.zeros(X.shape[1])
        for j in range(X.shape[1]):
            present = X[~np.isnan(X[:, j]), j]
            self.means[j] = present.mean() if len(present) else 0.0
        self.coefs = {}
        self._fitted = self._run(X, deadline, learn=True)

    def fit_transform(self, d, deadline):
        self.fit(d, deadline)
        return self._write(d, self._fitted)

    def apply(self, d):
        X = self._matrix(d)
        if not np.isnan(X).any():
            return d
        return self._write(d, self._run(X, None, learn=False))


class IQROutlierRemover(InstanceFilter):
    """Drops rows with a numeric feature beyond Q1 - k*IQR or Q3 + k*IQR."""

    def select(self, d, deadline):
        factor = float(self.params.get('factor', 3.0))
        outlier = np.zeros(d.n_rows, dtype=bool)
        for a in _numeric_features(d):
            deadline.check()
            col = d.frame[a.name].to_numpy(dtype=float)
            present = col[~np.isnan(col)]
            if len(present) < 4:
                continue
            q1, q3 = np.percentile(present, [25, 75])
            iqr = q3 - q1
            if iqr <= 0:
                continue
            with np.errstate(invalid='ignore'):
                outlier |= (col < q1 - factor * iqr) | (col > q3 + factor * iqr)
        for i in witness_rows(d):
            outlier[i] = False
        keep = np.flatnonzero(~outlier)
        if len(keep) < min(2, d.n_rows):
            return list(range(d.n_rows))
        return [int(i) for i in keep]


class Center(Preprocessor):

    def fit(self, d, deadline):
        self.means = {}
        for a in _numeric_features(d):
            present = d.frame[a.name].dropna()
            self.means[a.name] = float(present.mean()) if len(present) else 0.0

    def apply(self, d):
        frame = d.frame.copy()
        for name, mean in self.means.items():
            frame[name] = frame[name] - mean
        return d.replace(d.attributes, frame)


class Standardize(Preprocessor):

    def fit(self, d, deadline):
        self.stats = {}
        for a in _numeric_features(d):
            present = d.frame[a.name].dropna()
            mean = float(present.mean()) if len(present) else 0.0
            std = float(present.std(ddof=0)) if len(present) else 0.0
            self.stats[a.name] = (mean, std if std > 0 else 1.0)

    def apply(self, d):
        frame = d.frame.copy()
        for name, (mean, std) in self.stats.items():
            frame[name] = (frame[name] - mean) / std
        return d.replace(d.attributes, frame)


class Discretize(Preprocessor):
    """Equal-width binning of numeric features into nominal ones."""

    def fit(self, d, deadline):
        self.bins = int(self.params.get('bins', 10))
        self.edges = {}
        for a in _numeric_features(d):
            present = d.frame[a.name].dropna()
            lo = float(present.min()) if len(present) else 0.0
            hi = float(present.max()) if len(present) else 0.0
            self.edges[a.name] = (lo, hi)

    def apply(self, d):
        labels = tuple(f"bin{i}" for i in range(self.bins))
        attributes = []
        frame = d.frame.copy()
        for a in d.attributes:
            if a.name not in self.edges or a is d.class_attribute:
                attributes.append(a)
                continue
            lo, hi = self.edges[a.name]
            col = frame[a.name].to_numpy(dtype=float)
            width = (hi - lo) / self.bins
            with np.errstate(invalid='ignore'):
                idx = np.zeros(len(col)) if width <= 0 else np.floor((col - lo) / width)
            idx = np.clip(idx, 0, self.bins - 1)
            frame[a.name] = [None if np.isnan(v) else labels[int(i)] for v, i in zip(col, idx)]
            attributes.append(Attribute(name=a.name, kind=AttributeKind.NOMINAL, categories=labels))
        return d.replace(attributes, frame)


class NominalToBinary(Preprocessor):
    """
    Numeric 0/1 indicators for nominal features. A two-category attribute becomes
    one indicator; a missing cell is missing in every indicator.
    """

    def fit(self, d, deadline):
        self.categories = {a.name: a.categories for a in d.feature_attributes
                           if a.kind == AttributeKind.NOMINAL}

    def apply(self, d):
        attributes, columns = [], {}
        taken = {a.name for a in d.attributes}
        for a in d.attributes:
            if a.name not in self.categories or a is d.class_attribute:
                attributes.append(a)
                columns[a.name] = d.frame[a.name]
                continue
            cats = self.categories[a.name]
            col = d.frame[a.name]
            missing = col.isna().to_numpy()
            for cat in (cats[:1] if len(cats) == 2 else cats):
                name = f"{a.name}={cat}"
                while name in taken:
                    name += '_'
                taken.add(name)
                values = (col == cat).to_numpy(dtype=float)
                values[missing] = np.nan
                attributes.append(Attribute(name=name, kind=AttributeKind.NUMERIC))
                columns[name] = values
        frame = pd.DataFrame(columns)
        class_index = [a.name for a in attributes].index(d.class_attribute.name)
        return d.replace(attributes, frame, class_index)


def _principal_axes(C: np.ndarray, deadline: Deadline, seed: int,
                    coverage: float) -> Tuple[np.ndarray, np.ndarray]:
    """Leading eigenpairs of a covariance matrix by power iteration with deflation."""
    p = C.shape[0]
    total = float(np.trace(C))
    rng = np.random.default_rng(seed)
    values, vectors = [], []
    if p == 0 or total <= 0:
        return np.zeros(0), np.zeros((p, 0))
    R = C.copy()
    covered = 0.0
    for _ in range(p):
        v = rng.normal(size=p)
        v /= np.linalg.norm(v)
        for _ in range(500):
            deadline.check()
            w = R @ v
            norm = np.linalg.norm(w)
            if norm == 0:
                break
            w /= norm
            if np.linalg.norm(w - v) < 1e-10:
                v = w
                break
            v = w
        lam = float(v @ C @ v)
        if lam <= 1e-10 * total:
            break
        values.append(lam)
        vectors.append(v)
        covered += lam
        R = R - lam * np.outer(v, v)
        if covered >= coverage * total - 1e-12:
            break
    return np.array(values), np.array(vectors).T


class PrincipalComponents(Preprocessor):
    """Projects the numeric features onto the leading axes covering the requested variance."""

    whiten = False

    def fit(self, d, deadline):
        _require_absent(d, AttributeKind.NOMINAL, AttributeKind.DATE, missing=True)
        self.names = [a.name for a in _numeric_features(d)]
        X = d.frame[self.names].to_numpy(dtype=float) if self.names else np.zeros((d.n_rows, 0))
        self.mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
        centred = X - self.mean
        C = centred.T @ centred / max(len(X), 1)
        coverage = 1.0 if self.whiten else float(self.params.get('variance_covered', 0.95))
        self.values, self.axes = _principal_axes(C, deadline, self.seed, coverage)

    def apply(self, d):
        X = d.frame[self.names].to_numpy(dtype=float) if self.names else np.zeros((d.n_rows, 0))
        Z = (X - self.mean) @ self.axes if self.axes.size else np.zeros((d.n_rows, 0))
        if self.whiten and len(self.values):
            Z = Z / np.sqrt(self.values)
        prefix = 'ic' if self.whiten else 'pc'
        attributes = [Attribute(name=f"{prefix}{i + 1}", kind=AttributeKind.NUMERIC)
                      for i in range(Z.shape[1])]
        columns = {a.name: Z[:, i] for i, a in enumerate(attributes)}
        cls = d.class_attribute
        columns[cls.name] = d.frame[cls.name].to_numpy()
        attributes.append(cls)
        return d.replace(attributes, pd.DataFrame(columns), len(attributes) - 1)


class IndependentComponents(PrincipalComponents):
    """Whitening transform: every axis with positive variance, scaled to unit variance."""

    whiten = True


class Resample(InstanceFilter):
    """Random subsample without replacement that always keeps the witness rows."""

    def select(self, d, deadline):
        deadline.check()
        fraction = float(self.params.get('fraction', 0.75))
        keep = set(witness_rows(d))
        target = max(len(keep), int(math.ceil(fraction * d.n_rows)))
        rest = [i for i in range(d.n_rows) if i not in keep]
        rng = np.random.default_rng(self.seed)
        extra = rng.choice(len(rest), size=target - len(keep), replace=False) if rest else []
        keep.update(rest[int(i)] for i in extra)
        return sorted(keep)


class ClassBalancer(InstanceFilter):
    """Oversamples every minority class up to the majority count."""

    def select(self, d, deadline):
        deadline.check()
        y = d.class_values()
        counts = y.dropna().value_counts()
        rows = list(range(d.n_rows))
        if counts.empty:
            return rows
        target = int(counts.max())
        rng = np.random.default_rng(self.seed)
        for value in sorted(counts.index):
            members = np.flatnonzero((y == value).to_numpy())
            short = target - len(members)
            if short > 0:
                rows.extend(int(i) for i in rng.choice(members, size=short, replace=True))
        return rows


# ---------------------------------------------------------------------------
# Predictors
# ---------------------------------------------------------------------------

class FeatureEncoder:
    """Numeric and nominal features as a float matrix; other kinds are not used."""

    def __init__(self, d: Dataset):
        self.attributes = [a for a in d.feature_attributes
                           if a.kind in (AttributeKind.NUMERIC, AttributeKind.NOMINAL)]
        self.n_categories = [len(a.categories) if a.kind == AttributeKind.NOMINAL else 0
                             for a in self.attributes]
        self._index = {a.name: {c: i for i, c in enumerate(a.categories)} for a in self.attributes}

    def transform(self, d: Dataset) -> np.ndarray:
        X = np.full((d.n_rows, len(self.attributes)), np.nan)
        for j, a in enumerate(self.attributes):
            if a.name not in d.frame:
                continue
            col = d.frame[a.name]
            if a.kind == AttributeKind.NUMERIC:
                X[:, j] = pd.to_numeric(col, errors='coerce').to_numpy(dtype=float)
            else:
                lookup = self._index[a.name]
                X[:, j] = [lookup.get(v, np.nan) if v is not None else np.nan for v in col]
        return X


class PredictiveModel:
    """A trained predictor: the encoder it saw and the fitted estimator."""

    def __init__(self, component_id: str, encoder: FeatureEncoder,
                 class_attribute: Attribute, estimator):
        self.component_id = component_id
        self.encoder = encoder
        self.class_attribute = class_attribute
        self.estimator = estimator

    @property
    def nominal(self) -> bool:
        return self.class_attribute.kind == AttributeKind.NOMINAL

    def predict(self, d: Dataset) -> List[Any]:
        raw = self.estimator.predict(self.encoder.transform(d))
        if not self.nominal:
            return [float(v) for v in raw]
        cats = self.class_attribute.categories
        return [cats[int(i)] if 0 <= int(i) < len(cats) else None for i in raw]


_ESTIMATORS = {
    'zero_r': lambda p, seed, width: ZeroR(),
    'decision_tree': lambda p, seed, width: DecisionTree(p['max_depth'], p['min_leaf'], seed=seed),
    'random_tree': lambda p, seed, width: random_tree(p['max_depth'], p['min_leaf'], width, seed),
    'naive_bayes': lambda p, seed, width: NaiveBayes(p['laplace']),
    'logistic': lambda p, seed, width: Logistic(p['ridge']),
    'linear_regression': lambda p, seed, width: LinearRegression(p['ridge']),
    'knn': lambda p, seed, width: KNearestNeighbours(p['k']),
    'bagging': lambda p, seed, width: Bagging(p['base'], p['n_estimators'], seed),
}


def train_predictor(spec: ComponentSpec, params: Dict[str, Any], d: Dataset,
                    deadline: Deadline, seed: int) -> PredictiveModel:
    """Fit the estimator of `spec` on the rows of `d` whose class is present."""
    cls = d.class_attribute
    if cls.kind not in (AttributeKind.NUMERIC, AttributeKind.NOMINAL):
        raise IncompatibleDataError(f"cannot learn a {cls.kind.value} class")
    labelled = d.take(np.flatnonzero(d.class_values().notna().to_numpy()))
    encoder = FeatureEncoder(labelled)
    X = encoder.transform(labelled)
    if cls.kind == AttributeKind.NOMINAL:
        lookup = {c: i for i, c in enumerate(cls.categories)}
        y = np.array([lookup[v] for v in labelled.class_values()], dtype=int)
        n_classes = max(1, len(cls.categories))
    else:
        y = labelled.class_values().to_numpy(dtype=float)
        n_classes = 0
    estimator = _ESTIMATORS[spec.id](params, seed, X.shape[1])
    estimator.fit(X, encoder.n_categories, y, n_classes, deadline)
    return PredictiveModel(spec.id, encoder, cls, estimator)


# ---------------------------------------------------------------------------
# Roster
# ---------------------------------------------------------------------------

_NOMINAL_ATTRS = frozenset({NOMINAL_ATTRIBUTES, BINARY_ATTRIBUTES, EMPTY_NOMINAL_ATTRIBUTES})
_NON_NUMERIC_CLASS = frozenset({NOMINAL_CLASS, BINARY_CLASS, UNARY_CLASS, SYMBOLIC_CLASS,
                                STRING_CLASS, DATE_CLASS})
_NON_NOMINAL_CLASS = frozenset({NUMERIC_CLASS, STRING_CLASS, DATE_CLASS})

_TREE_GRID = ({'max_depth': 8, 'min_leaf': 1}, {'max_depth': 4, 'min_leaf': 1},
              {'max_depth': 8, 'min_leaf': 5})

_ROSTER: Tuple[ComponentSpec, ...] = (
    ComponentSpec(id='replace_missing', kind=ComponentKind.MISSING_VALUE_HANDLER,
                  hyperparams=({'numeric': 'mean'}, {'numeric': 'median'}),
                  rejects=frozenset({EMPTY_NOMINAL_ATTRIBUTES}),
                  description='mean/median for numeric features, mode otherwise'),
    ComponentSpec(id='em_imputer', kind=ComponentKind.MISSING_VALUE_HANDLER,
                  hyperparams=({'max_iter': 10}, {'max_iter': 50}),
                  rejects=_NOMINAL_ATTRS | {DATE_ATTRIBUTES} | _NON_NUMERIC_CLASS,
                  description='iterative least-squares imputation of numeric data'),
    ComponentSpec(id='iqr_outlier_remover', kind=ComponentKind.OUTLIER_REMOVER,
                  hyperparams=({'factor': 3.0}, {'factor': 1.5}),
                  description='drops rows outside the interquartile fences'),
    ComponentSpec(id='center', kind=ComponentKind.TRANSFORMER,
                  description='subtracts the mean of every numeric feature'),
    ComponentSpec(id='standardize', kind=ComponentKind.TRANSFORMER,
                  description='zero mean, unit variance numeric features'),
    ComponentSpec(id='discretize', kind=ComponentKind.TRANSFORMER,
                  hyperparams=({'bins': 10}, {'bins': 5}, {'bins': 3}),
                  description='equal-width binning of numeric features'),
    ComponentSpec(id='nominal_to_binary', kind=ComponentKind.TRANSFORMER,
                  description='0/1 indicators for nominal features'),
    ComponentSpec(id='pca', kind=ComponentKind.DIMENSIONALITY_REDUCER,
                  hyperparams=({'variance_covered': 0.95}, {'variance_covered': 0.75}),
                  rejects=_NOMINAL_ATTRS | {MISSING_VALUES, DATE_ATTRIBUTES},
                  description='principal components by power iteration'),
    ComponentSpec(id='independent_components', kind=ComponentKind.DIMENSIONALITY_REDUCER,
                  rejects=_NOMINAL_ATTRS | {MISSING_VALUES, DATE_ATTRIBUTES},
                  description='whitening of the numeric features'),
    ComponentSpec(id='resample', kind=ComponentKind.SAMPLER,
                  hyperparams=({'fraction': 0.75}, {'fraction': 0.5}),
                  description='random subsample keeping witness rows'),
    ComponentSpec(id='class_balancer', kind=ComponentKind.SAMPLER,
                  rejects=_NON_NOMINAL_CLASS,
                  description='oversamples minority classes'),
    ComponentSpec(id='zero_r', kind=ComponentKind.PREDICTOR,
                  rejects=frozenset({DATE_CLASS, STRING_CLASS}),
                  description='majority class or mean'),
    ComponentSpec(id='decision_tree', kind=ComponentKind.PREDICTOR,
                  hyperparams=_TREE_GRID, rejects=_NON_NOMINAL_CLASS,
                  description='gini classification tree'),
    ComponentSpec(id='random_tree', kind=ComponentKind.PREDICTOR,
                  hyperparams=({'max_depth': 8, 'min_leaf': 1}, {'max_depth': 12, 'min_leaf': 2}),
                  rejects=_NON_NOMINAL_CLASS,
                  description='tree over random feature subsets'),
    ComponentSpec(id='naive_bayes', kind=ComponentKind.PREDICTOR,
                  hyperparams=({'laplace': 1.0}, {'laplace': 0.1}),
                  rejects=_NON_NOMINAL_CLASS | {DATE_ATTRIBUTES},
                  description='gaussian/categorical naive Bayes'),
    ComponentSpec(id='logistic', kind=ComponentKind.PREDICTOR,
                  hyperparams=({'ridge': 1e-4}, {'ridge': 1e-2}),
                  rejects=_NON_NOMINAL_CLASS | {MISSING_VALUES, DATE_ATTRIBUTES},
                  description='multinomial ridge logistic regression'),
    ComponentSpec(id='linear_regression', kind=ComponentKind.PREDICTOR,
                  hyperparams=({'ridge': 1e-8}, {'ridge': 1.0}),
                  rejects=_NON_NUMERIC_CLASS | {MISSING_VALUES, DATE_ATTRIBUTES},
                  description='ridge least squares'),
    ComponentSpec(id='knn', kind=ComponentKind.PREDICTOR,
                  hyperparams=({'k': 1}, {'k': 3}, {'k': 5}, {'k': 7}),
                  rejects=frozenset({DATE_CLASS, STRING_CLASS, DATE_ATTRIBUTES}),
                  description='k nearest neighbours'),
    ComponentSpec(id='bagging', kind=ComponentKind.META_PREDICTOR,
                  hyperparams=({'base': 'decision_tree', 'n_estimators': 5},
                               {'base': 'decision_tree', 'n_estimators': 10},
                               {'base': 'random_tree', 'n_estimators': 5},
                               {'base': 'random_tree', 'n_estimators': 10}),
                  rejects=_NON_NOMINAL_CLASS,
                  description='bootstrap aggregation over a tree predictor'),
)

_PREPROCESSORS = {
    'replace_missing': ReplaceMissing,
    'em_imputer': IterativeImputer,
    'iqr_outlier_remover': IQROutlierRemover,
    'center': Center,
    'standardize': Standardize,
    'discretize': Discretize,
    'nominal_to_binary': NominalToBinary,
    'pca': PrincipalComponents,
    'independent_components': IndependentComponents,
    'resample': Resample,
    'class_balancer': ClassBalancer,
}


def pool_roster() -> List[ComponentSpec]:
    return list(_ROSTER)


def roster_by_id(pool: Optional[Sequence[ComponentSpec]] = None) -> Dict[str, ComponentSpec]:
    return {spec.id: spec for spec in (pool if pool is not None else _ROSTER)}


def get_component(component_id: str, pool: Optional[Sequence[ComponentSpec]] = None) -> ComponentSpec:
    try:
        return roster_by_id(pool)[component_id]
    except KeyError:
        raise UnknownComponentError(component_id) from None


def dump_roster(path, pool: Optional[Sequence[ComponentSpec]] = None) -> None:
    doc = {
        'schema_version': SCHEMA_VERSION,
        'components': [{'id': s.id, 'kind': s.kind.value, 'hyperparams': list(s.hyperparams)}
                       for s in (pool if pool is not None else _ROSTER)],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + '\n', encoding='utf-8')


def load_roster(path) -> List[ComponentSpec]:
    """The native components named in a pool.json, in file order."""
    doc = json.loads(Path(path).read_text(encoding='utf-8'))
    entries = doc['components'] if isinstance(doc, dict) else doc
    return [get_component(e['id'] if isinstance(e, dict) else e) for e in entries]


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

class ExecutionOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    component_id: str
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return not isinstance(self, Failure)


class TransformedDataset(ExecutionOutcome):
    dataset: Dataset
    fitted: Any = None


class TrainedModel(ExecutionOutcome):
    model: Any


class Failure(ExecutionOutcome):
    reason: FailureReason
    message: str = ''
    violated: Tuple[str, ...] = ()


def make_component(spec: ComponentSpec, setting: int = 0, seed: int = 0) -> Preprocessor:
    return _PREPROCESSORS[spec.id](spec.setting(setting), seed)


def execute_component(spec: ComponentSpec, d: Dataset, limits: ExecutionLimits,
                      setting: int = 0) -> ExecutionOutcome:
    """Run one component on `d`. Never raises on a valid dataset."""
    start = time.perf_counter()
    deadline = Deadline(limits.timeout)
    token = extract_token(d)
    violated = tuple(c for c in token.active() if c in spec.rejects)
    if violated:
        return Failure(component_id=spec.id, reason=FailureReason.INCOMPATIBILITY,
                       message=f"rejects {', '.join(violated)}", violated=violated,
                       elapsed=time.perf_counter() - start)
    try:
        if spec.is_predictive:
            model = train_predictor(spec, spec.setting(setting), d, deadline, limits.seed)
            deadline.check()
            return TrainedModel(component_id=spec.id, model=model,
                                elapsed=time.perf_counter() - start)
        component = make_component(spec, setting, limits.seed)
        out = component.fit_transform(d, deadline)
        deadline.check()
        return TransformedDataset(component_id=spec.id, dataset=out, fitted=component,
                                  elapsed=time.perf_counter() - start)
    except IncompatibleDataError as e:
        reason, message = FailureReason.INCOMPATIBILITY, str(e)
    except ExecutionTimeout as e:
        reason, message = FailureReason.TIMEOUT, str(e)
    except Exception as e:
        logger.warning(f"{spec.id} failed internally on {d.name}: {type(e).__name__}: {e}")
        reason, message = FailureReason.INTERNAL, f"{type(e).__name__}: {e}"
    return Failure(component_id=spec.id, reason=reason, message=message,
                   elapsed=time.perf_counter() - start)


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    ap = argparse.ArgumentParser(description='Show or dump the native component pool.')
    ap.add_argument('--out', help='write pool.json here instead of printing')
    args = ap.parse_args()
    if args.out:
        dump_roster(args.out)
        logger.info(f"Wrote {len(_ROSTER)} components to {args.out}")
        return
    for spec in _ROSTER:
        rejects = ', '.join(sorted(spec.rejects)) or '-'
        print(f"{spec.id:24} {spec.kind.value:22} {len(spec.hyperparams)} settings  rejects: {rejects}")


if __name__ == '__main__':
    main()
