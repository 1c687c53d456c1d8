"""Figures for evaluation reports.

Uses the non-interactive Agg backend and strips PNG metadata so reruns
produce identical files.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_local_bins(rows, path, label="prediction"):
    """Mean absolute error against real distance bin (one line per method)."""
    series = rows if isinstance(rows, dict) else {label: rows}
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, rs in series.items():
            xs = [r.lower + 0.5 for r in rs if r.mean_abs_error is not None]
            ys = [r.mean_abs_error for r in rs if r.mean_abs_error is not None]
            ax.plot(xs, ys, marker="o", ms=3, label=name)
        ax.set_xlabel("real distance (A)")
        ax.set_ylabel("mean |real - predicted| (A)")
        ax.set_xlim(0, 20)
        if len(series) > 1:
            ax.legend(frameon=False)
        _save(fig, path)


def plot_sweep(rows, path):
    """Average consensus correlation against the pool-maximum threshold."""
    pts = [(r.threshold, r.avg_corr) for r in rows if r.avg_corr is not None]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", ms=3)
        ax.set_xlabel("maximum pairwise score threshold")
        ax.set_ylabel("average correlation")
        _save(fig, path)


def plot_global_scatter(predictions, truths, path):
    """Predicted against true global score, all targets pooled."""
    xs, ys = [], []
    for target, pred in sorted(predictions.items()):
        true = truths.get(target, {})
        for m in sorted(set(pred) & set(true)):
            xs.append(true[m])
            ys.append(pred[m])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.scatter(xs, ys, s=6)
        ax.plot([0, 1], [0, 1], lw=0.8, color="grey")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel("true GDT-TS")
        ax.set_ylabel("predicted global score")
        _save(fig, path)
