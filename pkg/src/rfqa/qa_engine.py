"""Hybrid global scoring and per-residue distance prediction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .consensus import pairwise_scores
from .constants import D0, DISTANCE_CAP, GATE_THRESHOLD
from .features import LAYOUT_VERSION, N_FEATURES, feature_matrix
from .structure_io import write_qa_output

log = logging.getLogger(__name__)

PAIRWISE = "pairwise"
SINGLE = "single"
MIN_EMITTED_DISTANCE = 0.1


def s_to_distance(s, d0=D0, cap=DISTANCE_CAP):
    """Invert the S-score, ``d = d0 * sqrt(1/s - 1)``, saturating at ``cap``."""
    s = float(s)
    if not s > 0.0:
        return cap
    if s >= 1.0:
        return 0.0
    return min(d0 * math.sqrt(1.0 / s - 1.0), cap)


def read_score_overrides(text: str) -> dict:
    """Parse ``<model_id> <score>`` lines into a dict."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected '<model_id> <score>'")
        score = float(parts[1])
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"line {lineno}: score {score} outside [0, 1]")
        out[parts[0]] = score
    return out


def _check_forest(forest):
    forest.check_layout(LAYOUT_VERSION, N_FEATURES)


def local_quality(model, ann, forest) -> np.ndarray:
    """Forest S-score for every residue of ``model``, in residue order."""
    _check_forest(forest)
    x = feature_matrix(model, ann)
    if len(x) == 0:
        return np.zeros(0)
    return forest.predict(x)


def local_predict(model, ann, forest, d0=D0, cap=DISTANCE_CAP) -> list:
    """(seq_index, predicted distance) for every residue of ``model``."""
    s = local_quality(model, ann, forest)
    return [(r.seq_index, s_to_distance(v, d0, cap)) for r, v in zip(model.residues, s)]


def single_model_global(model, ann, forest, overrides=None, quality=None) -> float:
    """Mean predicted S-score over residues, unless ``overrides`` supplies a score.

    ``quality`` may carry already computed per-residue S-scores.
    """
    if overrides and model.model_id in overrides:
        return float(overrides[model.model_id])
    s = local_quality(model, ann, forest) if quality is None else quality
    return float(np.clip(s.mean(), 0.0, 1.0)) if len(s) else 0.0


@dataclass
class ModelPrediction:
    model_id: str
    global_score: float
    method_used: str
    distances: list = field(default_factory=list)  # (seq_index, distance)


@dataclass
class QaPrediction:
    target_id: str
    method_used: str
    pool_max: float | None
    models: list

    def records(self, length, floor=MIN_EMITTED_DISTANCE):
        """QA records over target positions 1..length; unresolved positions are None."""
        out = []
        for m in self.models:
            by_pos = dict(m.distances)
            row = []
            for pos in range(1, length + 1):
                d = by_pos.get(pos)
                row.append(None if d is None else max(d, floor))
            out.append((m.model_id, m.global_score, row))
        return out

    def to_text(self, length):
        return write_qa_output(self.target_id, self.records(length))


def hybrid_global(pool, ann, forest, gate=GATE_THRESHOLD, overrides=None, threads=1, quality=None):
    """Global scores for a pool: consensus if its maximum exceeds ``gate``, else single-model.

    Returns (scores by model id, method used, pool maximum or None).
    """
    quality = quality or {}
    if len(pool.models) > 1:
        cons = pairwise_scores(pool, threads=threads)
        if cons.pool_max > gate:
            return dict(cons.scores), PAIRWISE, cons.pool_max
        pool_max = cons.pool_max
    else:
        pool_max = None
    scores = {
        m.model_id: single_model_global(m, ann, forest, overrides, quality.get(m.model_id))
        for m in pool.models
    }
    return scores, SINGLE, pool_max


def score_pool(pool, ann, forest, gate=GATE_THRESHOLD, d0=D0, cap=DISTANCE_CAP,
               overrides=None, threads=1) -> QaPrediction:
    """Global and local predictions for every model in ``pool``."""
    quality = {m.model_id: local_quality(m, ann, forest) for m in pool.models}
    scores, method, pool_max = hybrid_global(pool, ann, forest, gate, overrides, threads, quality)
    log.info("%s: method=%s pool_max=%s", pool.target_id, method,
             "n/a" if pool_max is None else f"{pool_max:.4f}")
    models = []
    for m in pool.models:
        dist = [(r.seq_index, s_to_distance(v, d0, cap))
                for r, v in zip(m.residues, quality[m.model_id])]
        models.append(ModelPrediction(m.model_id, float(np.clip(scores[m.model_id], 0.0, 1.0)),
                                      method, dist))
    return QaPrediction(pool.target_id, method, pool_max, models)
