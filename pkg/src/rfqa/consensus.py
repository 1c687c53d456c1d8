"""Pairwise consensus: a model's score is its mean GDT-TS against the rest of the pool."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .geometry import InsufficientOverlapError, gdt_ts


class NotApplicableError(ValueError):
    """Raised for pools too small for pairwise scoring."""


@dataclass
class ConsensusScores:
    scores: dict
    pool_max: float
    matrix: np.ndarray | None = None


def pairwise_matrix(pool, threads: int = 1) -> np.ndarray:
    """Symmetric GDT-TS matrix of a pool, normalised by target length.

    Pairs without enough common residues score 0.
    """
    models = pool.models
    n = len(models)
    length = len(pool.target_sequence)
    pairs = list(combinations(range(n), 2))

    def one(pair):
        i, j = pair
        try:
            return gdt_ts(models[i], models[j], length=length).gdt_ts
        except InsufficientOverlapError:
            return 0.0

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            values = list(ex.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    mat = np.eye(n)
    for (i, j), v in zip(pairs, values):
        mat[i, j] = mat[j, i] = v
    return mat


def pairwise_scores(pool, threads: int = 1) -> ConsensusScores:
    n = len(pool.models)
    if n < 2:
        raise NotApplicableError(f"{pool.target_id}: pairwise scoring needs at least 2 models")
    mat = pairwise_matrix(pool, threads=threads)
    # fsum is exactly rounded, so a model's score does not depend on pool order
    means = np.array([math.fsum(np.delete(mat[i], i)) / (n - 1) for i in range(n)])
    scores = {m.model_id: float(s) for m, s in zip(pool.models, means)}
    return ConsensusScores(scores, float(means.max()), mat)
