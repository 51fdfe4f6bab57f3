"""
From-scratch estimators behind the predictor components, plus the cooperative
deadline every long-running loop polls.

All estimators share one calling convention over an encoded feature matrix:

    fit(X, n_categories, y, n_classes, deadline)
    predict(X) -> class indices (n_classes > 0) or floats (n_classes == 0)

X is float64 with NaN for missing; a feature with n_categories[j] > 0 is nominal
and holds category indices. Estimators must predict for any row matching the
training width, including rows with missing cells.
"""

import time
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from dataset_model import AvatarError


class ExecutionTimeout(AvatarError):
    """A component ran past its deadline."""


class IncompatibleDataError(AvatarError):
    """A component was handed data its implementation cannot process."""


class Deadline:
    """Wall-clock deadline. Long loops call check() and unwind on expiry."""

    def __init__(self, seconds: float):
        self.seconds = seconds
        self.expires = time.monotonic() + seconds

    @classmethod
    def never(cls) -> 'Deadline':
        return cls(float('inf'))

    def remaining(self) -> float:
        return self.expires - time.monotonic()

    def expired(self) -> bool:
        return time.monotonic() > self.expires

    def check(self) -> None:
        if time.monotonic() > self.expires:
            raise ExecutionTimeout(f"deadline of {self.seconds:g}s exceeded")


def _majority(counts: np.ndarray) -> int:
    # argmax returns the first maximum, so ties go to the lowest class index
    return int(np.argmax(counts)) if len(counts) else 0


# ---------------------------------------------------------------------------
# Design matrix shared by the linear models
# ---------------------------------------------------------------------------

class DesignMatrix:
    """Standardized numeric columns plus one-hot nominal columns, missing as 0."""

    def fit(self, X: np.ndarray, n_categories: Sequence[int]) -> 'DesignMatrix':
        self.n_categories = list(n_categories)
        self.means = np.zeros(X.shape[1])
        self.scales = np.ones(X.shape[1])
        for j, m in enumerate(self.n_categories):
            if m:
                continue
            col = X[:, j]
            present = col[~np.isnan(col)]
            if len(present):
                self.means[j] = present.mean()
                std = present.std()
                self.scales[j] = std if std > 0 else 1.0
        return self

    @property
    def width(self) -> int:
        return sum(m if m else 1 for m in self.n_categories)

    def transform(self, X: np.ndarray) -> np.ndarray:
        blocks = []
        for j, m in enumerate(self.n_categories):
            col = X[:, j]
            if m:
                block = np.zeros((len(col), m))
                present = ~np.isnan(col)
                idx = col[present].astype(int)
                ok = (idx >= 0) & (idx < m)
                rows = np.flatnonzero(present)[ok]
                block[rows, idx[ok]] = 1.0
                blocks.append(block)
            else:
                z = (col - self.means[j]) / self.scales[j]
                blocks.append(np.nan_to_num(z, nan=0.0)[:, None])
        if not blocks:
            return np.zeros((X.shape[0], 0))
        return np.hstack(blocks)


# ---------------------------------------------------------------------------
# ZeroR
# ---------------------------------------------------------------------------

class ZeroR:
    """Majority class (nominal) or mean (numeric); ignores the features."""

    def fit(self, X, n_categories, y, n_classes, deadline):
        deadline.check()
        self.n_classes = n_classes
        if n_classes:
            self.value = _majority(np.bincount(y.astype(int), minlength=n_classes))
        else:
            self.value = float(y.mean()) if len(y) else 0.0
        return self

    def predict(self, X):
        if self.n_classes:
            return np.full(X.shape[0], self.value, dtype=int)
        return np.full(X.shape[0], self.value, dtype=float)


# ---------------------------------------------------------------------------
# Decision trees
# ---------------------------------------------------------------------------

class _Node:
    __slots__ = ('counts', 'feature', 'threshold', 'categorical', 'left', 'right', 'missing_left')

    def __init__(self, counts):
        self.counts = counts
        self.feature = None
        self.threshold = None
        self.categorical = False
        self.left = None
        self.right = None
        self.missing_left = True


class DecisionTree:
    """
    Gini classification tree over numeric and nominal features.

    Numeric splits are found with a sorted cumulative-count sweep; nominal splits
    test one category against the rest. Missing cells are left out of the gain
    computation (which is scaled by the fraction of rows present) and follow the
    larger branch. With n_features set, each split considers a random feature
    subset, which makes this the random-tree learner.
    """

    def __init__(self, max_depth: int = 8, min_leaf: int = 1,
                 n_features: Optional[int] = None, seed: int = 0):
        self.max_depth = max_depth
        self.min_leaf = max(1, min_leaf)
        self.n_features = n_features
        self.seed = seed

    def fit(self, X, n_categories, y, n_classes, deadline):
        self.n_classes = max(1, n_classes)
        self.n_categories = list(n_categories)
        self._rng = np.random.default_rng(self.seed)
        self.root = self._grow(X, y.astype(int), 0, deadline)
        return self

    def _grow(self, X, y, depth, deadline) -> _Node:
        deadline.check()
        counts = np.bincount(y, minlength=self.n_classes).astype(float)
        node = _Node(counts)
        if depth >= self.max_depth or len(y) < 2 * self.min_leaf or np.count_nonzero(counts) <= 1:
            return node
        p = X.shape[1]
        if p == 0:
            return node
        features = np.arange(p)
        if self.n_features is not None and self.n_features < p:
            features = np.sort(self._rng.choice(p, size=self.n_features, replace=False))
        best = None
        for f in features:
            found = self._best_split(X[:, f], self.n_categories[f] > 0, y)
            if found is not None and (best is None or found[0] > best[0] + 1e-12):
                best = (found[0], f, found[1], self.n_categories[f] > 0)
        if best is None or best[0] <= 1e-12:
            return node
        _, f, threshold, categorical = best
        col = X[:, f]
        present = ~np.isnan(col)
        goes_left = (col == threshold) if categorical else (col <= threshold)
        goes_left = goes_left & present
        goes_right = ~goes_left & present
        node.missing_left = goes_left.sum() >= goes_right.sum()
        if node.missing_left:
            goes_left = goes_left | ~present
        else:
            goes_right = goes_right | ~present
        node.feature, node.threshold, node.categorical = int(f), float(threshold), categorical
        node.left = self._grow(X[goes_left], y[goes_left], depth + 1, deadline)
        node.right = self._grow(X[goes_right], y[goes_right], depth + 1, deadline)
        return node

    def _best_split(self, col, categorical, y):
        present = ~np.isnan(col)
        xs, ys = col[present], y[present]
        n, k = len(xs), self.n_classes
        if n < 2 * self.min_leaf:
            return None
        total = np.bincount(ys, minlength=k).astype(float)
        parent = 1.0 - np.sum((total / n) ** 2)
        weight = n / len(y)
        if categorical:
            best = None
            for value in np.unique(xs):
                mask = xs == value
                nl = int(mask.sum())
                nr = n - nl
                if nl < self.min_leaf or nr < self.min_leaf:
                    continue
                left = np.bincount(ys[mask], minlength=k).astype(float)
                right = total - left
                gini = (nl * (1 - np.sum((left / nl) ** 2)) + nr * (1 - np.sum((right / nr) ** 2))) / n
                gain = (parent - gini) * weight
                if best is None or gain > best[0] + 1e-12:
                    best = (gain, float(value))
            return best
        order = np.argsort(xs, kind='mergesort')
        xs, ys = xs[order], ys[order]
        onehot = np.zeros((n, k))
        onehot[np.arange(n), ys] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        right = total - left
        nl = np.arange(1, n, dtype=float)
        nr = n - nl
        valid = (xs[:-1] < xs[1:]) & (nl >= self.min_leaf) & (nr >= self.min_leaf)
        if not valid.any():
            return None
        gini_l = 1 - np.sum((left / nl[:, None]) ** 2, axis=1)
        gini_r = 1 - np.sum((right / nr[:, None]) ** 2, axis=1)
        gain = (parent - (nl * gini_l + nr * gini_r) / n) * weight
        gain[~valid] = -np.inf
        i = int(np.argmax(gain))
        return float(gain[i]), float((xs[i] + xs[i + 1]) / 2)

    def _leaf_for(self, row) -> _Node:
        node = self.root
        while node.left is not None:
            v = row[node.feature]
            if np.isnan(v):
                node = node.left if node.missing_left else node.right
            elif node.categorical:
                node = node.left if v == node.threshold else node.right
            else:
                node = node.left if v <= node.threshold else node.right
        return node

    def predict_distribution(self, X) -> np.ndarray:
        out = np.zeros((X.shape[0], self.n_classes))
        for i, row in enumerate(X):
            counts = self._leaf_for(row).counts
            total = counts.sum()
            out[i] = counts / total if total else 0.0
        return out

    def predict(self, X):
        out = np.empty(X.shape[0], dtype=int)
        for i, row in enumerate(X):
            out[i] = _majority(self._leaf_for(row).counts)
        return out


def random_tree(max_depth: int, min_leaf: int, n_features_total: int, seed: int) -> DecisionTree:
    k = max(1, int(np.log2(max(1, n_features_total))) + 1)
    return DecisionTree(max_depth=max_depth, min_leaf=min_leaf, n_features=k, seed=seed)


class Bagging:
    """Bootstrap ensemble of trees; predictions average the leaf distributions."""

    def __init__(self, base: str = 'decision_tree', n_estimators: int = 10, seed: int = 0,
                 max_depth: int = 8, min_leaf: int = 1):
        self.base = base
        self.n_estimators = n_estimators
        self.seed = seed
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, n_categories, y, n_classes, deadline):
        rng = np.random.default_rng(self.seed)
        self.n_classes = max(1, n_classes)
        self.members: List[DecisionTree] = []
        n = len(y)
        for _ in range(self.n_estimators):
            deadline.check()
            idx = rng.integers(0, n, size=n) if n else np.arange(0)
            member_seed = int(rng.integers(0, 2**31 - 1))
            if self.base == 'random_tree':
                tree = random_tree(self.max_depth, self.min_leaf, X.shape[1], member_seed)
            else:
                tree = DecisionTree(self.max_depth, self.min_leaf, seed=member_seed)
            self.members.append(tree.fit(X[idx], n_categories, y[idx], n_classes, deadline))
        return self

    def predict(self, X):
        votes = np.zeros((X.shape[0], self.n_classes))
        for tree in self.members:
            votes += tree.predict_distribution(X)
        return np.argmax(votes, axis=1).astype(int)


# ---------------------------------------------------------------------------
# Naive Bayes
# ---------------------------------------------------------------------------

class NaiveBayes:
    """Gaussian likelihoods for numeric features, Laplace-smoothed tables for nominal ones.

    Missing cells are skipped both when counting and when scoring.
    """

    def __init__(self, laplace: float = 1.0):
        self.laplace = laplace

    def fit(self, X, n_categories, y, n_classes, deadline):
        deadline.check()
        k = max(1, n_classes)
        y = y.astype(int)
        self.n_classes = k
        self.n_categories = list(n_categories)
        class_counts = np.bincount(y, minlength=k).astype(float)
        self.log_prior = np.log((class_counts + self.laplace) / (len(y) + self.laplace * k))
        self.tables = []
        for j, m in enumerate(self.n_categories):
            deadline.check()
            col = X[:, j]
            present = ~np.isnan(col)
            if m:
                counts = np.zeros((k, m))
                idx = col[present].astype(int)
                np.add.at(counts, (y[present], idx), 1.0)
                probs = (counts + self.laplace) / (counts.sum(axis=1, keepdims=True) + self.laplace * m)
                self.tables.append(('nominal', np.log(probs)))
                continue
            overall = col[present]
            floor = 1e-9 * max(float(overall.var()) if len(overall) else 0.0, 1.0)
            means = np.zeros(k)
            variances = np.ones(k)
            usable = np.zeros(k, dtype=bool)
            for c in range(k):
                vals = col[present & (y == c)]
                if len(vals):
                    means[c] = vals.mean()
                    variances[c] = vals.var() + floor
                    usable[c] = True
            self.tables.append(('numeric', (means, variances, usable)))
        return self

    def predict(self, X):
        scores = np.tile(self.log_prior, (X.shape[0], 1))
        for j, (kind, table) in enumerate(self.tables):
            col = X[:, j]
            present = ~np.isnan(col)
            if not present.any():
                continue
            if kind == 'nominal':
                idx = col[present].astype(int)
                ok = (idx >= 0) & (idx < table.shape[1])
                rows = np.flatnonzero(present)[ok]
                scores[rows] += table[:, idx[ok]].T
            else:
                means, variances, usable = table
                if not usable.all():
                    continue
                v = col[present][:, None]
                scores[present] += -0.5 * (np.log(2 * np.pi * variances) + (v - means) ** 2 / variances)
        return np.argmax(scores, axis=1).astype(int)


# ---------------------------------------------------------------------------
# Linear models
# ---------------------------------------------------------------------------

class Logistic:
    """Multinomial ridge logistic regression fitted with L-BFGS."""

    def __init__(self, ridge: float = 1e-4, max_iter: int = 200):
        self.ridge = ridge
        self.max_iter = max_iter

    def fit(self, X, n_categories, y, n_classes, deadline):
        deadline.check()
        self.n_classes = k = max(1, n_classes)
        self.design = DesignMatrix().fit(X, n_categories)
        Z = self.design.transform(X)
        y = y.astype(int)
        n, p = Z.shape
        A = np.hstack([np.ones((n, 1)), Z])
        self.coef = np.zeros((p + 1, k))
        if n == 0 or np.count_nonzero(np.bincount(y, minlength=k)) <= 1:
            self.constant = _majority(np.bincount(y, minlength=k))
            return self
        self.constant = None
        target = np.zeros((n, k))
        target[np.arange(n), y] = 1.0
        penalty = np.ones((p + 1, k))
        penalty[0] = 0.0

        def loss(w):
            W = w.reshape(p + 1, k)
            logits = A @ W
            logits -= logits.max(axis=1, keepdims=True)
            log_norm = np.log(np.exp(logits).sum(axis=1, keepdims=True))
            log_p = logits - log_norm
            value = -np.sum(target * log_p) / n + self.ridge * np.sum(penalty * W ** 2)
            grad = A.T @ (np.exp(log_p) - target) / n + 2 * self.ridge * penalty * W
            return value, grad.ravel()

        result = minimize(loss, self.coef.ravel(), jac=True, method='L-BFGS-B',
                          options={'maxiter': self.max_iter},
                          callback=lambda _w: deadline.check())
        self.coef = result.x.reshape(p + 1, k)
        return self

    def predict(self, X):
        if self.constant is not None:
            return np.full(X.shape[0], self.constant, dtype=int)
        Z = self.design.transform(X)
        logits = np.hstack([np.ones((len(Z), 1)), Z]) @ self.coef
        return np.argmax(logits, axis=1).astype(int)


class LinearRegression:
    """Ridge least squares with an unpenalized intercept."""

    def __init__(self, ridge: float = 1e-8):
        self.ridge = ridge

    def fit(self, X, n_categories, y, n_classes, deadline):
        deadline.check()
        self.design = DesignMatrix().fit(X, n_categories)
        Z = self.design.transform(X)
        n, p = Z.shape
        self.intercept = float(y.mean()) if n else 0.0
        self.coef = np.zeros(p)
        if n == 0 or p == 0:
            return self
        Zc = Z - Z.mean(axis=0)
        A = np.vstack([Zc, np.sqrt(self.ridge) * np.eye(p)])
        b = np.concatenate([y - self.intercept, np.zeros(p)])
        self.coef = np.linalg.lstsq(A, b, rcond=None)[0]
        self.intercept -= float(Z.mean(axis=0) @ self.coef)
        return self

    def predict(self, X):
        return self.design.transform(X) @ self.coef + self.intercept


# ---------------------------------------------------------------------------
# Nearest neighbours
# ---------------------------------------------------------------------------

class KNearestNeighbours:
    """
    k-NN over standardized numeric and 0/1-mismatch nominal distances.

    A missing cell on either side contributes the maximal per-feature distance 1.
    Nominal classes vote (ties to the lowest index); numeric classes average.
    """

    CHUNK = 256

    def __init__(self, k: int = 3):
        self.k = k

    def fit(self, X, n_categories, y, n_classes, deadline):
        deadline.check()
        self.n_classes = n_classes
        self.n_categories = list(n_categories)
        self.design = DesignMatrix().fit(X, n_categories)
        self.train = self._scaled(X)
        self.y = y.astype(int) if n_classes else y.astype(float)
        if n_classes:
            self.fallback = _majority(np.bincount(self.y, minlength=n_classes))
        else:
            self.fallback = float(y.mean()) if len(y) else 0.0
        return self

    def _scaled(self, X):
        S = X.astype(float).copy()
        for j, m in enumerate(self.n_categories):
            if not m:
                S[:, j] = (S[:, j] - self.design.means[j]) / self.design.scales[j]
        return S

    def predict(self, X):
        m = X.shape[0]
        n = len(self.y)
        if n == 0:
            return np.full(m, self.fallback, dtype=int if self.n_classes else float)
        k = min(self.k, n)
        Q = self._scaled(X)
        out = np.empty(m, dtype=int if self.n_classes else float)
        for start in range(0, m, self.CHUNK):
            q = Q[start:start + self.CHUNK]
            dist = np.zeros((len(q), n))
            for j, cats in enumerate(self.n_categories):
                a = q[:, j][:, None]
                b = self.train[:, j][None, :]
                missing = np.isnan(a) | np.isnan(b)
                if cats:
                    part = (a != b).astype(float)
                else:
                    part = np.minimum((a - b) ** 2, 1e6)
                dist += np.where(missing, 1.0, part)
            nearest = np.argsort(dist, axis=1, kind='stable')[:, :k]
            labels = self.y[nearest]
            if self.n_classes:
                for i, row in enumerate(labels):
                    out[start + i] = _majority(np.bincount(row, minlength=self.n_classes))
            else:
                out[start:start + len(q)] = labels.mean(axis=1)
        return out
