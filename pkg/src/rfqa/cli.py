"""Command-line entry point.

Directory conventions::

    pools/<target_id>/*.pdb          candidate models, one directory per target
    natives/<target_id>.pdb          experimental structures
    annotations/<target_id>.ann      sequence / predicted SS / predicted SA

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, plots
from .config import ConfigError, RunConfig, build_config
from .consensus import pairwise_scores
from .evaluation import (
    bins_table,
    evaluate_global,
    local_binned_error,
    per_target_table,
    read_truths,
    summary_table,
    sweep_table,
    threshold_sweep,
)
from .features import (
    LAYOUT_VERSION,
    build_dataset,
    read_feature_table,
    write_feature_table,
)
from .forest import (
    ForestParams,
    LayoutMismatchError,
    RandomForestModel,
    balanced_sample,
    k_fold_cv,
    quality_class,
    train_forest,
)
from .geometry import InsufficientOverlapError, gdt_ts, per_residue_distances
from .qa_engine import read_score_overrides, score_pool
from .structure_io import (
    AnnotationError,
    EmptyModelError,
    EmptyPoolError,
    PdbParseError,
    QaFormatError,
    load_pool,
    parse_pdb,
    read_annotations,
    read_qa_output,
)

log = logging.getLogger("rfqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextmanager
def _staged_outputs(out_dir):
    """Collect outputs in a temp directory and move them into ``out_dir`` only on success."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out_dir, prefix=".rfqa-") as tmp:
        staged = {}

        def path_for(name):
            staged[name] = Path(tmp) / name
            return staged[name]

        yield path_for
        for name, p in staged.items():
            if p.exists():
                os.replace(p, out_dir / name)


def _require(cfg, *names):
    missing = [n for n in names if not getattr(cfg, n)]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join(missing))


def _target_dirs(pools_dir):
    root = Path(pools_dir)
    if not root.is_dir():
        raise DataError(f"pool directory {root} does not exist")
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    if not dirs:
        raise DataError(f"no target directories under {root}")
    return dirs


def _model_files(target_dir):
    return sorted(p for p in Path(target_dir).iterdir()
                  if p.is_file() and p.suffix.lower() in (".pdb", ".ent", ""))


def _annotation(cfg, target):
    if not cfg.annotations:
        return None
    path = Path(cfg.annotations) / f"{target}.ann"
    if not path.exists():
        return None
    return read_annotations(path.read_text())


def _native(cfg, target):
    if not cfg.natives:
        return None
    path = Path(cfg.natives) / f"{target}.pdb"
    if not path.exists():
        return None
    return parse_pdb(path.read_text(), model_id=f"{target}_native", target_id=target)


def _sequence_from_native(native):
    idx = native.seq_indices()
    if idx[0] != 1 or np.any(np.diff(idx) != 1):
        raise DataError(f"{native.target_id}: native numbering has gaps; provide an annotation file")
    return native.sequence


def _load_target(cfg, target_dir, need_annotation=True):
    target = target_dir.name
    ann = _annotation(cfg, target)
    native = _native(cfg, target)
    if ann is None and need_annotation:
        return target, None, None, native
    sequence = ann.sequence if ann is not None else (_sequence_from_native(native) if native else None)
    if sequence is None:
        return target, None, ann, native
    pool = load_pool(_model_files(target_dir), target, sequence)
    return target, pool, ann, native


def _params(cfg):
    return ForestParams(n_trees=cfg.n_trees, mtry=cfg.mtry, min_leaf=cfg.min_leaf, max_depth=cfg.max_depth)


def cmd_extract_features(cfg: RunConfig):
    _require(cfg, "pools", "natives", "annotations")
    if not Path(cfg.natives).is_dir() or not any(Path(cfg.natives).glob("*.pdb")):
        raise DataError(f"no native structures found in {cfg.natives}")
    entries, annotations = [], {}
    for tdir in _target_dirs(cfg.pools):
        target, pool, ann, native = _load_target(cfg, tdir)
        if pool is None:
            log.warning("%s: no annotation file, skipped", target)
            continue
        if native is None:
            log.warning("%s: no native structure, skipped", target)
            continue
        entries.append((pool, native))
        annotations[target] = ann
    samples = build_dataset(entries, annotations, threads=cfg.threads)
    if len(samples) == 0:
        raise DataError("no samples extracted")
    hist = np.bincount(quality_class(samples.quality), minlength=5)
    log.info("extracted %d samples; per-class counts %s", len(samples), hist.tolist())
    with _staged_outputs(cfg.out) as path_for:
        with open(path_for("features.tsv"), "w") as fh:
            write_feature_table(samples, fh)
    return EXIT_OK


def cmd_train(cfg: RunConfig):
    _require(cfg, "features")
    try:
        with open(cfg.features) as fh:
            samples = read_feature_table(fh)
    except OSError as exc:
        raise DataError(f"cannot read feature file: {exc}") from None
    if len(samples) == 0:
        raise DataError("feature file has no rows")
    bal = balanced_sample(samples.quality, cfg.per_class, cfg.seed)
    for d in bal.diagnostics:
        log.warning("balanced sampling: %s", d)
    log.info("training on %d samples, per-class counts %s", len(bal.indices), list(bal.per_class_counts))
    chosen = samples.subset(bal.indices)
    params = _params(cfg)
    forest = train_forest(chosen.features, chosen.quality, params, cfg.seed,
                          layout_version=LAYOUT_VERSION, threads=cfg.threads)
    with _staged_outputs(cfg.out) as path_for:
        forest.save(path_for("model.json"))
        if cfg.cv_repeats > 0:
            if len(chosen) < cfg.cv_folds:
                raise DataError(f"{len(chosen)} samples are too few for {cfg.cv_folds}-fold CV")
            cv = k_fold_cv(chosen.features, chosen.quality, cfg.cv_folds, params, cfg.seed,
                           repeats=cfg.cv_repeats, threads=cfg.threads)
            lines = ["repeat\tfold\tmae\tmse"]
            lines += [f"{r}\t{f}\t{mae:.6f}\t{mse:.6f}" for r, f, mae, mse in cv.rows()]
            lines.append(f"mean\t\t{cv.mean_mae:.6f}\t{cv.mean_mse:.6f}")
            lines.append(f"sd_over_repeats\t\t{float(np.std(cv.repeat_mae)):.6f}\t"
                         f"{float(np.std(cv.repeat_mse)):.6f}")
            Path(path_for("cv.tsv")).write_text("\n".join(lines) + "\n")
            log.info("cross-validation MAE %.4f, MSE %.4f", cv.mean_mae, cv.mean_mse)
    return EXIT_OK


def cmd_score(cfg: RunConfig):
    _require(cfg, "pools", "annotations", "model")
    try:
        forest = RandomForestModel.load(cfg.model)
        forest.check_layout(LAYOUT_VERSION)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot use model file {cfg.model}: {exc}") from None
    overrides = None
    if cfg.overrides:
        overrides = read_score_overrides(Path(cfg.overrides).read_text())
    results = []
    for tdir in _target_dirs(cfg.pools):
        target, pool, ann, _ = _load_target(cfg, tdir)
        if pool is None:
            log.warning("%s: no annotation file, skipped", target)
            continue
        pred = score_pool(pool, ann, forest, cfg.gate, cfg.d0, cfg.cap, overrides, cfg.threads)
        results.append((target, pred, len(pool.target_sequence)))
    if not results:
        raise DataError("no targets scored")
    with _staged_outputs(cfg.out) as path_for:
        log_lines = ["target\tmethod\tpool_max"]
        for target, pred, length in results:
            path_for(f"{target}.qa").write_text(pred.to_text(length))
            pm = "" if pred.pool_max is None else f"{pred.pool_max:.6f}"
            log_lines.append(f"{target}\t{pred.method_used}\t{pm}")
        path_for("methods.tsv").write_text("\n".join(log_lines) + "\n")
    return EXIT_OK


def _prediction_files(paths):
    files = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("*.qa")) if p.is_dir() else [p])
    return files


def _truths_and_pools(cfg, need_pools):
    """Truth scores per target and, when pools are configured, consensus inputs and real distances."""
    truths = read_truths(Path(cfg.truths).read_text()) if cfg.truths else {}
    pools, real = {}, {}
    if cfg.pools and (need_pools or not truths or cfg.natives):
        for tdir in _target_dirs(cfg.pools):
            target, pool, _, native = _load_target(cfg, tdir, need_annotation=False)
            if pool is None:
                log.warning("%s: no sequence source (annotation or native), skipped", target)
                continue
            pools[target] = pool
            if native is None:
                continue
            real[target] = {}
            computed = {}
            for m in pool.models:
                try:
                    computed[m.model_id] = gdt_ts(m, native, length=len(pool.target_sequence)).gdt_ts
                    real[target][m.model_id] = dict(per_residue_distances(m, native))
                except InsufficientOverlapError as exc:
                    log.warning("%s: %s", target, exc)
            truths.setdefault(target, computed)
    return truths, pools, real


def _sweep_rows(cfg, pools, truths):
    entries = []
    for target, pool in sorted(pools.items()):
        if len(pool.models) < 2 or target not in truths:
            continue
        cons = pairwise_scores(pool, threads=cfg.threads)
        entries.append((cons.pool_max, cons.scores, truths[target]))
    return threshold_sweep(entries, cfg.thresholds), len(entries)


def cmd_evaluate(cfg: RunConfig):
    if not cfg.predictions:
        raise ConfigError("missing required setting(s): predictions")
    if not cfg.truths and not (cfg.pools and cfg.natives):
        raise ConfigError("need truths, or pools together with natives")
    predictions, local_pred = {}, {}
    for f in _prediction_files(cfg.predictions):
        try:
            target, records = read_qa_output(f.read_text())
        except (OSError, QaFormatError) as exc:
            raise DataError(f"{f}: {exc}") from None
        predictions[target] = {m: s for m, s, _ in records}
        local_pred[target] = {m: d for m, _, d in records}
    truths, pools, real = _truths_and_pools(cfg, need_pools=True)
    if not set(predictions) & set(truths):
        raise DataError("predictions and truths share no targets")
    report = evaluate_global(predictions, truths)
    pairs_real, pairs_pred = [], []
    for target in sorted(real):
        for model_id, dist in sorted(real[target].items()):
            pred = local_pred.get(target, {}).get(model_id)
            if pred is None:
                continue
            for pos, d in sorted(dist.items()):
                if pos - 1 < len(pred) and pred[pos - 1] is not None:
                    pairs_real.append(d)
                    pairs_pred.append(pred[pos - 1])
    bins = local_binned_error(pairs_real, pairs_pred)
    sweep, n_sweep = _sweep_rows(cfg, pools, truths)
    if n_sweep == 0:
        log.warning("no multi-model pools available; sweep table is empty")
    with _staged_outputs(cfg.out) as path_for:
        path_for("summary.tsv").write_text(summary_table(report))
        path_for("per_target.tsv").write_text(per_target_table(report))
        path_for("local_bins.tsv").write_text(bins_table(bins))
        path_for("sweep.tsv").write_text(sweep_table(sweep))
        plots.plot_local_bins(bins, path_for("local_bins.png"))
        plots.plot_sweep(sweep, path_for("sweep.png"))
        plots.plot_global_scatter(predictions, truths, path_for("global_scatter.png"))
    log.info("ave_corr=%s over_corr=%s ave_loss=%s", report.ave_corr, report.over_corr, report.ave_loss)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig):
    _require(cfg, "pools")
    if not cfg.truths and not cfg.natives:
        raise ConfigError("need truths or natives")
    truths, pools, _ = _truths_and_pools(cfg, need_pools=True)
    rows, n = _sweep_rows(cfg, pools, truths)
    if n == 0:
        raise DataError("no multi-model pool with truths")
    with _staged_outputs(cfg.out) as path_for:
        path_for("sweep.tsv").write_text(sweep_table(rows))
        plots.plot_sweep(rows, path_for("sweep.png"))
    return EXIT_OK


COMMANDS = {
    "extract-features": cmd_extract_features,
    "train": cmd_train,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "sweep-threshold": cmd_sweep,
}


def build_parser():
    parser = _Parser(prog="rfqa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rfqa {__version__}")
    shared = _Parser(add_help=False)
    shared.add_argument("--config", help="key = value configuration file")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--threads", type=int)
    shared.add_argument("--out", help="output directory")
    shared.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, *opts):
        p = sub.add_parser(name, help=help_, parents=[shared])
        for flag, kw in opts:
            p.add_argument(flag, **kw)
        return p

    pools = ("--pools", {"help": "directory with one sub-directory of models per target"})
    natives = ("--natives", {"help": "directory of <target>.pdb native structures"})
    anns = ("--annotations", {"help": "directory of <target>.ann prediction files"})
    truths = ("--truths", {"help": "truth file: <target> <model> <gdt_ts> per line"})
    thresholds = ("--thresholds", {"help": "comma-separated gate thresholds"})
    forest_opts = [
        ("--n-trees", {"type": int, "dest": "n_trees"}),
        ("--mtry", {"type": int}),
        ("--min-leaf", {"type": int, "dest": "min_leaf"}),
        ("--max-depth", {"type": int, "dest": "max_depth"}),
        ("--per-class", {"type": int, "dest": "per_class"}),
        ("--cv-folds", {"type": int, "dest": "cv_folds"}),
        ("--cv-repeats", {"type": int, "dest": "cv_repeats"}),
    ]
    add("extract-features", "build the labelled feature matrix", pools, natives, anns)
    add("train", "train the local-quality forest",
        ("--features", {"help": "feature matrix written by extract-features"}), *forest_opts)
    add("score", "score model pools and write QA files", pools, anns,
        ("--model", {"help": "trained forest (model.json)"}),
        ("--overrides", {"help": "file of '<model_id> <score>' single-model scores"}),
        ("--gate", {"type": float}), ("--cap", {"type": float}), ("--d0", {"type": float}))
    add("evaluate", "evaluate QA files against truths", pools, natives, anns, truths, thresholds,
        ("--predictions", {"nargs": "+", "help": "QA files or directories of *.qa"}))
    add("sweep-threshold", "average consensus correlation against pool-maximum threshold",
        pools, natives, anns, truths, thresholds)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = build_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, EmptyPoolError, EmptyModelError, PdbParseError, AnnotationError,
            LayoutMismatchError, QaFormatError, InsufficientOverlapError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
