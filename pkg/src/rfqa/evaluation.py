"""Evaluation: correlation, GDT-TS loss, binned local error and the gate-threshold sweep."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

N_BINS = 20


def pearson(xs, ys):
    """Sample Pearson correlation, or None when either side has zero variance."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def top_model(scores: dict) -> str:
    """Highest-scoring model id; ties go to the lexicographically smallest id."""
    return min(scores, key=lambda m: (-scores[m], m))


def gdt_loss(true_scores: dict, predicted_scores: dict) -> float:
    """True GDT-TS of the best model minus that of the model ranked first by the predictor."""
    if not true_scores:
        raise ValueError("no models to evaluate")
    if set(true_scores) != set(predicted_scores):
        raise ValueError("predicted and true scores cover different models")
    return max(true_scores.values()) - true_scores[top_model(predicted_scores)]


@dataclass
class TargetResult:
    target_id: str
    n_models: int
    pearson: float | None
    loss: float


@dataclass
class EvalReport:
    per_target: list
    ave_corr: float | None
    over_corr: float | None
    ave_loss: float | None
    n_undefined: int = 0
    local_bins: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


def evaluate_global(predictions: dict, truths: dict) -> EvalReport:
    """Per-target and pooled statistics.

    ``predictions`` and ``truths`` map target id to ``{model_id: score}``.
    Only models present in both are evaluated. Targets without overlap are
    skipped; single-model targets count towards the loss only.
    """
    per_target, diags = [], []
    pooled_p, pooled_t = [], []
    for target in sorted(set(predictions) | set(truths)):
        pred = predictions.get(target, {})
        true = truths.get(target, {})
        common = sorted(set(pred) & set(true))
        if not common:
            diags.append(f"{target}: no models shared by predictions and truths, skipped")
            continue
        p = [pred[m] for m in common]
        t = [true[m] for m in common]
        r = pearson(p, t) if len(common) >= 2 else None
        if len(common) < 2:
            diags.append(f"{target}: single model, excluded from correlation")
        elif r is None:
            diags.append(f"{target}: correlation undefined (zero variance), excluded")
        loss = gdt_loss({m: true[m] for m in common}, {m: pred[m] for m in common})
        per_target.append(TargetResult(target, len(common), r, loss))
        pooled_p.extend(p)
        pooled_t.extend(t)
    for d in diags:
        log.warning(d)
    defined = [t.pearson for t in per_target if t.pearson is not None]
    return EvalReport(
        per_target,
        float(np.mean(defined)) if defined else None,
        pearson(pooled_p, pooled_t) if len(pooled_p) >= 2 else None,
        float(np.mean([t.loss for t in per_target])) if per_target else None,
        n_undefined=sum(1 for t in per_target if t.pearson is None),
        diagnostics=diags,
    )


@dataclass
class BinRow:
    lower: float
    upper: float  # math.inf for the last bin
    count: int
    mean_abs_error: float | None


def local_binned_error(real, predicted, n_bins=N_BINS):
    """Mean |real - predicted| in 1 A bins of the real distance; the last bin is open-ended."""
    real = np.asarray(real, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    if real.shape != pred.shape:
        raise ValueError(f"length mismatch: {len(real)} vs {len(pred)}")
    which = np.minimum(np.floor(real).astype(int), n_bins - 1)
    err = np.abs(real - pred)
    rows = []
    for b in range(n_bins):
        sel = which == b
        n = int(sel.sum())
        rows.append(BinRow(float(b), math.inf if b == n_bins - 1 else float(b + 1), n,
                           float(err[sel].mean()) if n else None))
    return rows


@dataclass
class SweepRow:
    threshold: float
    n_targets: int
    avg_corr: float | None


def threshold_sweep(entries, thresholds):
    """Average consensus correlation over targets whose pool maximum is at most each threshold.

    ``entries``: iterable of ``(pool_max, consensus_scores, true_scores)``
    with score dicts keyed by model id.
    """
    per = []
    for pool_max, cons, true in entries:
        common = sorted(set(cons) & set(true))
        r = pearson([cons[m] for m in common], [true[m] for m in common]) if len(common) >= 2 else None
        per.append((pool_max, r))
    rows = []
    for t in thresholds:
        admitted = [r for pm, r in per if pm <= t]
        defined = [r for r in admitted if r is not None]
        rows.append(SweepRow(float(t), len(admitted), float(np.mean(defined)) if defined else None))
    return rows


def read_truths(text: str) -> dict:
    """Parse ``<target_id> <model_id> <gdt_ts>`` lines."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected '<target_id> <model_id> <gdt_ts>'")
        out.setdefault(parts[0], {})[parts[1]] = float(parts[2])
    return out


def write_truths(truths: dict) -> str:
    lines = []
    for target in sorted(truths):
        for model in sorted(truths[target]):
            lines.append(f"{target} {model} {truths[target][model]!r}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return str(v)


def _table(header, rows):
    lines = ["\t".join(header)]
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def summary_table(report: EvalReport) -> str:
    return _table(
        ["n_targets", "ave_corr", "over_corr", "ave_loss", "n_undefined_corr"],
        [[len(report.per_target), report.ave_corr, report.over_corr, report.ave_loss, report.n_undefined]],
    )


def per_target_table(report: EvalReport) -> str:
    return _table(
        ["target", "n_models", "pearson", "loss"],
        [[t.target_id, t.n_models, t.pearson, t.loss] for t in report.per_target],
    )


def bins_table(rows) -> str:
    return _table(
        ["bin_lower", "bin_upper", "count", "mean_abs_error"],
        [[r.lower, r.upper, r.count, r.mean_abs_error] for r in rows],
    )


def sweep_table(rows) -> str:
    return _table(
        ["threshold", "n_targets", "avg_corr"],
        [[r.threshold, r.n_targets, r.avg_corr] for r in rows],
    )
