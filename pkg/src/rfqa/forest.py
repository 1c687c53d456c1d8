"""Random forest regression: CART trees on bootstrap resamples.

Randomness: tree ``t`` resamples with numpy's PCG64 seeded by
``SeedSequence(seed, spawn_key=(t,))``. Each node then draws its candidate
features from a SplitMix64 stream keyed by a value derived from the same
(seed, t) and by the node's pre-order position, so every node owns an
independent stream. Trees can be trained in any order or in parallel and
still come out bit-identical.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
N_CLASSES = 5
CLASS_EDGES = (0.2, 0.4, 0.6, 0.8)


class LayoutMismatchError(ValueError):
    """Feature vectors or files do not match the layout a model was trained on."""


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


def tree_key(seed: int, *key: int) -> int:
    """64-bit key from which a tree's per-node feature streams are derived."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(key) + (0x40DE,)).generate_state(1, np.uint64)
    return int(state[0])


@dataclass
class ForestParams:
    n_trees: int = 500
    mtry: int | None = None  # None: floor(sqrt(n_features))
    min_leaf: int = 5
    max_depth: int | None = None
    bootstrap: bool = True

    def resolved_mtry(self, n_features):
        m = self.mtry if self.mtry is not None else max(1, int(math.isqrt(n_features)))
        if not 1 <= m <= n_features:
            raise ValueError(f"mtry={m} must lie in [1, {n_features}]")
        return m

    def validate(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be positive")


class Tree:
    """A regression tree stored as pre-order node arrays.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise samples with
    ``x[feature[i]] <= threshold[i]`` go to the left child ``i + 1`` and the
    rest to ``right[i]``.
    """

    def __init__(self, feature, threshold, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @classmethod
    def leaf(cls, value):
        return cls([-1], [0.0], [-1], [value])

    @classmethod
    def split(cls, feature, threshold, left, right):
        """Join two subtrees under a new root."""
        off_l, off_r = 1, 1 + len(left)
        return cls(
            np.concatenate([[feature], left.feature, right.feature]),
            np.concatenate([[threshold], left.threshold, right.threshold]),
            np.concatenate([[off_r], np.where(left.right >= 0, left.right + off_l, -1),
                            np.where(right.right >= 0, right.right + off_r, -1)]),
            np.concatenate([[np.nan], left.value, right.value]),
        )

    def __len__(self):
        return len(self.feature)

    def __eq__(self, other):
        return (
            isinstance(other, Tree)
            and np.array_equal(self.feature, other.feature)
            and np.array_equal(self.threshold, other.threshold)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.value, other.value, equal_nan=True)
        )

    @property
    def is_leaf(self):
        return self.feature[0] < 0

    @property
    def root_split(self):
        """(feature, threshold) at the root, or None for a single leaf."""
        if self.is_leaf:
            return None
        return int(self.feature[0]), float(self.threshold[0])

    def leaves(self):
        return self.value[self.feature < 0]

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r, n = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[n]
            node[inner] = np.where(go_left, n + 1, self.right[n])
        return self.value[node]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "right": self.right.tolist(),
            "value": [None if math.isnan(v) else v for v in self.value.tolist()],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["right"],
                   [math.nan if v is None else v for v in d["value"]])


TIE_TOLERANCE = 1e-10


def _mean_within(values):
    """Mean clipped to the values' range, so equal values give exactly that value."""
    lo, hi = values.min(), values.max()
    return float(min(max(math.fsum(values) / len(values), lo), hi))


def best_split(X, y, features, min_leaf=1):
    """Best (feature, threshold) over ``features`` or None.

    Thresholds sit midway between consecutive distinct values and both
    children keep at least ``min_leaf`` samples. Gains (reduction in summed
    squared error) within ``TIE_TOLERANCE * (1 + SSE)`` of the best count as
    ties; ties go to the lowest feature index, then the lowest threshold. A
    split must have a gain above that tolerance.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if len(y) < 2:
        return None
    feats = np.sort(np.asarray(features, dtype=np.int64))
    f, thr, _ = _kernels.best_split(X, y, np.arange(len(y)), feats, min_leaf, TIE_TOLERANCE)
    return None if f < 0 else (int(f), float(thr))


def train_tree(X, y, mtry, min_leaf=5, max_depth=None, seed=0, key=()) -> Tree:
    """Grow one CART regression tree.

    Each node draws ``mtry`` distinct candidate features from its own
    SplitMix64 stream, ``tree_key(seed, *key)`` combined with the node's
    pre-order position. A node becomes a leaf when it holds fewer than
    ``2 * min_leaf`` samples, reaches ``max_depth``, has zero label variance
    or admits no positive-gain split.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n_features = X.shape[1]
    key64 = np.uint64(tree_key(seed, *key))
    all_feats = np.arange(n_features, dtype=np.int64)
    feature, threshold, right, value = [], [], [], []
    # (sample indices, depth, parent slot needing the right-child id)
    stack = [(np.arange(len(y)), 0, None)]
    while stack:
        idx, depth, parent = stack.pop()
        node_id = len(feature)
        if parent is not None:
            right[parent] = node_id
        yy = y[idx]
        f = -1
        if (len(idx) >= 2 * min_leaf
                and (max_depth is None or depth < max_depth)
                and yy.max() > yy.min()):
            if mtry == n_features:
                feats = all_feats
            else:
                feats = _kernels.draw_features(key64, node_id, n_features, mtry)
            f, thr, _ = _kernels.best_split(X, y, idx, feats, min_leaf, TIE_TOLERANCE)
        if f < 0:
            feature.append(-1)
            threshold.append(0.0)
            right.append(-1)
            value.append(_mean_within(yy))
            continue
        feature.append(int(f))
        threshold.append(float(thr))
        right.append(-1)
        value.append(math.nan)
        go_left = X[idx, f] <= thr
        stack.append((idx[~go_left], depth + 1, node_id))
        stack.append((idx[go_left], depth + 1, None))
    return Tree(feature, threshold, right, value)


@dataclass
class RandomForestModel:
    trees: list
    n_features: int
    params: ForestParams
    seed: int
    feature_layout_version: str = "generic"

    def check_layout(self, version, n_features=None):
        if version != self.feature_layout_version:
            raise LayoutMismatchError(
                f"model expects layout {self.feature_layout_version!r}, got {version!r}"
            )
        if n_features is not None and n_features != self.n_features:
            raise LayoutMismatchError(f"model expects {self.n_features} features, got {n_features}")

    def predict(self, X):
        """Mean tree output for each row of ``X`` (or for a single vector)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise LayoutMismatchError(f"model expects {self.n_features} features, got {X.shape[1]}")
        total = np.zeros(len(X))
        lo = np.full(len(X), np.inf)
        hi = np.full(len(X), -np.inf)
        for tree in self.trees:
            p = tree.predict(X)
            total += p
            np.minimum(lo, p, out=lo)
            np.maximum(hi, p, out=hi)
        # clipping keeps unanimous trees exact and the mean inside the leaf range
        out = np.clip(total / len(self.trees), lo, hi)
        return float(out[0]) if single else out

    def to_json(self):
        doc = {
            "format": "rfqa-forest",
            "format_version": FORMAT_VERSION,
            "feature_layout_version": self.feature_layout_version,
            "n_features": self.n_features,
            "seed": self.seed,
            "params": asdict(self.params),
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != "rfqa-forest" or doc.get("format_version") != FORMAT_VERSION:
            raise ValueError("not an rfqa forest file (or unsupported version)")
        return cls(
            [Tree.from_dict(t) for t in doc["trees"]],
            doc["n_features"],
            ForestParams(**doc["params"]),
            doc["seed"],
            doc["feature_layout_version"],
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def predict(model: RandomForestModel, x):
    return model.predict(x)


def _train_one(t, X, y, params, mtry, seed):
    n = len(y)
    if params.bootstrap:
        rows = rng_stream(seed, t).integers(0, n, size=n)
        Xb, yb = X[rows], y[rows]
    else:
        Xb, yb = X, y
    return train_tree(Xb, yb, mtry, params.min_leaf, params.max_depth, seed, key=(t,))


def train_forest(X, y, params: ForestParams | None = None, seed: int = 0,
                 layout_version: str = "generic", threads: int = 1) -> RandomForestModel:
    """Bagged ensemble of ``params.n_trees`` trees.

    Tree ``t`` resamples from ``rng_stream(seed, t)``; the result does not
    depend on ``threads``.
    """
    params = params or ForestParams()
    params.validate()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("cannot train on an empty sample")
    mtry = params.resolved_mtry(X.shape[1])

    def job(t):
        return _train_one(t, X, y, params, mtry, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            trees = list(ex.map(job, range(params.n_trees)))
    else:
        trees = [job(t) for t in range(params.n_trees)]
    return RandomForestModel(trees, X.shape[1], params, int(seed), layout_version)


def quality_class(quality):
    """Quality class 0..4: [0, .2), [.2, .4), ..., [.8, 1.0]."""
    return np.searchsorted(CLASS_EDGES, np.asarray(quality, dtype=float), side="right")


@dataclass
class BalancedSample:
    indices: np.ndarray
    per_class_counts: tuple
    diagnostics: list = field(default_factory=list)


def balanced_sample(quality, per_class: int = 10000, seed: int = 0) -> BalancedSample:
    """Draw up to ``per_class`` samples per quality class without replacement.

    Returns indices into the input. Classes short of ``per_class`` contribute
    all their members and produce a diagnostic.
    """
    cls = quality_class(quality)
    rng = rng_stream(seed, 0xBA1A)
    chosen, counts, diags = [], [], []
    for c in range(N_CLASSES):
        members = np.flatnonzero(cls == c)
        if len(members) < per_class:
            diags.append(f"class {c} has {len(members)} samples (< {per_class}); all used")
            take = rng.permutation(members)
        else:
            take = rng.choice(members, size=per_class, replace=False)
        chosen.append(take)
        counts.append(len(take))
    for d in diags:
        log.info(d)
    return BalancedSample(np.concatenate(chosen).astype(int), tuple(counts), diags)


def fold_partition(n, k, rng):
    """Shuffled split of range(n) into k folds whose sizes differ by at most one."""
    perm = rng.permutation(n)
    sizes = [n // k + (1 if f < n % k else 0) for f in range(k)]
    bounds = np.cumsum([0] + sizes)
    return [np.sort(perm[bounds[f]:bounds[f + 1]]) for f in range(k)]


@dataclass
class CvReport:
    fold_mae: np.ndarray  # (repeats, k)
    fold_mse: np.ndarray

    @property
    def mean_mae(self):
        return float(self.fold_mae.mean())

    @property
    def mean_mse(self):
        return float(self.fold_mse.mean())

    @property
    def repeat_mae(self):
        return self.fold_mae.mean(axis=1)

    @property
    def repeat_mse(self):
        return self.fold_mse.mean(axis=1)

    def rows(self):
        for r in range(self.fold_mae.shape[0]):
            for f in range(self.fold_mae.shape[1]):
                yield r, f, float(self.fold_mae[r, f]), float(self.fold_mse[r, f])


def k_fold_cv(X, y, k=10, params=None, seed=0, repeats=10, threads=1) -> CvReport:
    """Repeated k-fold cross-validation; repeat ``r`` shuffles with ``rng_stream(seed, 0xCF, r)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < k:
        raise ValueError(f"{len(y)} samples cannot be split into {k} folds")
    mae = np.zeros((repeats, k))
    mse = np.zeros((repeats, k))
    for r in range(repeats):
        folds = fold_partition(len(y), k, rng_stream(seed, 0xCF, r))
        for f, test in enumerate(folds):
            train = np.ones(len(y), dtype=bool)
            train[test] = False
            fold_seed = int(rng_stream(seed, 0xCF, r, f).integers(2**63))
            model = train_forest(X[train], y[train], params, seed=fold_seed, threads=threads)
            err = model.predict(X[test]) - y[test]
            mae[r, f] = np.mean(np.abs(err))
            mse[r, f] = np.mean(err * err)
    return CvReport(mae, mse)
