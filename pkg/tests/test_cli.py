import logging
import subprocess
import sys

import numpy as np
import pytest

from rfqa import synthetic as syn
from rfqa.cli import main
from rfqa.features import read_feature_table
from rfqa.geometry import gdt_ts
from rfqa.structure_io import StructureModel, read_qa_output, write_qa_output

from conftest import annotations_from, write_target

SIGMAS = [0.5, 1.0, 2.0, 3.0, 5.0, 8.0]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    native = syn.self_avoiding_chain(50, seed=8, target_id="T1")
    decoys = [syn.perturb(native, s, seed=k, model_id=f"d{k}") for k, s in enumerate(SIGMAS)]
    write_target(root, "T1", native, decoys, annotations_from(native))
    return root


@pytest.fixture(scope="module")
def features_file(workspace, tmp_path_factory):
    out = tmp_path_factory.mktemp("feat")
    assert main(["extract-features", *_inputs(workspace), "--out", str(out), "--threads", "1"]) == 0
    return out / "features.tsv"


@pytest.fixture(scope="module")
def model_file(features_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("model")
    assert main(["train", "--features", str(features_file), "--out", str(out), *TRAIN_FLAGS]) == 0
    return out / "model.json"


TRAIN_FLAGS = ["--n-trees", "20", "--per-class", "60", "--cv-folds", "5", "--cv-repeats", "1", "--seed", "4"]


def _inputs(root, natives=True):
    args = ["--pools", str(root / "pools"), "--annotations", str(root / "annotations")]
    if natives:
        args += ["--natives", str(root / "natives")]
    return args


def test_help_runs():
    res = subprocess.run([sys.executable, "-m", "rfqa.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "extract-features" in res.stdout


def test_extract_two_models_of_fifty(tmp_path):
    native = syn.self_avoiding_chain(50, seed=9, target_id="T2")
    write_target(tmp_path, "T2", native, [syn.perturb(native, s, seed=s, model_id=f"m{s}") for s in (1, 2)],
                 annotations_from(native))
    out = tmp_path / "out"
    assert main(["extract-features", *_inputs(tmp_path), "--out", str(out)]) == 0
    with open(out / "features.tsv") as fh:
        samples = read_feature_table(fh)
    assert len(samples) == 100
    lines = (out / "features.tsv").read_text().splitlines()
    assert len(lines) == 102 and lines[0].startswith("# feature_layout=")


def test_extract_without_natives_is_a_data_error(tmp_path, caplog):
    native = syn.self_avoiding_chain(20, seed=1, target_id="T3")
    write_target(tmp_path, "T3", None, [native], annotations_from(native))
    (tmp_path / "natives").mkdir()
    rc = main(["extract-features", *_inputs(tmp_path), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert str(tmp_path / "natives") in caplog.text
    assert not (tmp_path / "out" / "features.tsv").exists()


def test_extract_is_deterministic_across_threads(workspace, features_file, tmp_path):
    assert main(["extract-features", *_inputs(workspace), "--out", str(tmp_path), "--threads", "8"]) == 0
    assert (tmp_path / "features.tsv").read_bytes() == features_file.read_bytes()


def test_train_beats_constant_baseline(features_file, model_file):
    cv = (model_file.parent / "cv.tsv").read_text().splitlines()
    cv_mae = float(cv[-2].split("\t")[2])
    with open(features_file) as fh:
        q = read_feature_table(fh).quality
    baseline = float(np.mean(np.abs(q - q.mean())))
    assert cv_mae < baseline


def test_train_is_deterministic_across_threads(features_file, model_file, tmp_path):
    assert main(["train", "--features", str(features_file), "--out", str(tmp_path),
                 *TRAIN_FLAGS, "--threads", "8"]) == 0
    assert (tmp_path / "model.json").read_bytes() == model_file.read_bytes()
    assert (tmp_path / "cv.tsv").read_bytes() == (model_file.parent / "cv.tsv").read_bytes()


def test_train_with_short_classes(tmp_path, features_file, caplog):
    lines = features_file.read_text().splitlines()
    small = tmp_path / "small.tsv"
    small.write_text("\n".join(lines[:7]) + "\n")
    rc = main(["train", "--features", str(small), "--out", str(tmp_path / "o"), "--n-trees", "3",
               "--per-class", "10", "--cv-repeats", "0"])
    assert rc == 0
    assert "balanced sampling" in caplog.text
    assert (tmp_path / "o" / "model.json").exists()


def test_score_paths_and_round_trip(tmp_path, model_file, caplog):
    caplog.set_level(logging.INFO, logger="rfqa")
    native = syn.self_avoiding_chain(40, seed=12, target_id="NEAR")
    ann = annotations_from(native)
    write_target(tmp_path, "NEAR", None, [syn.perturb(native, 0.1, seed=k, model_id=f"n{k}") for k in range(3)], ann)
    lone = StructureModel("solo", "LONE", native.residues)
    write_target(tmp_path, "LONE", None, [lone], ann)
    out = tmp_path / "out"
    rc = main(["score", *_inputs(tmp_path, natives=False), "--model", str(model_file), "--out", str(out)])
    assert rc == 0
    methods = dict(line.split("\t")[:2] for line in (out / "methods.tsv").read_text().splitlines()[1:])
    assert methods == {"LONE": "single", "NEAR": "pairwise"}
    assert "NEAR: method=pairwise" in caplog.text and "LONE: method=single" in caplog.text
    text = (out / "NEAR.qa").read_text()
    target, records = read_qa_output(text)
    assert target == "NEAR" and len(records) == 3
    assert write_qa_output(target, records) == text
    for _, score, dist in records:
        assert 0 <= score <= 1 and all(0 < d <= 15 for d in dist)


def test_score_rejects_foreign_model_file(tmp_path, workspace):
    bad = tmp_path / "model.json"
    bad.write_text('{"format": "something-else"}')
    rc = main(["score", *_inputs(workspace, natives=False), "--model", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_evaluate_self(tmp_path, workspace):
    from rfqa.structure_io import load_pool, parse_pdb

    native = parse_pdb((workspace / "natives" / "T1.pdb").read_text())
    pool = load_pool(sorted((workspace / "pools" / "T1").glob("*.pdb")), "T1", native.sequence)
    truths = {m.model_id: gdt_ts(m, native, length=50).gdt_ts for m in pool.models}
    preds = tmp_path / "preds"
    preds.mkdir()
    # the QA file rounds to 2 decimals, so compare against the rounded truths
    (preds / "T1.qa").write_text(write_qa_output("T1", [(m, s, []) for m, s in truths.items()]))
    truth_file = tmp_path / "truths.txt"
    truth_file.write_text("".join(f"T1 {m} {round(s, 2)!r}\n" for m, s in truths.items()))
    out = tmp_path / "out"
    rc = main(["evaluate", "--predictions", str(preds), "--truths", str(truth_file), "--out", str(out)])
    assert rc == 0
    header, row = (out / "summary.tsv").read_text().splitlines()
    summary = dict(zip(header.split("\t"), row.split("\t")))
    assert float(summary["ave_corr"]) == 1.0 and float(summary["ave_loss"]) == 0.0
    for name in ("per_target.tsv", "local_bins.tsv", "sweep.tsv", "local_bins.png", "sweep.png",
                 "global_scatter.png"):
        assert (out / name).exists()


def test_evaluate_with_natives_and_local_bins(tmp_path, workspace, model_file):
    scored = tmp_path / "scored"
    assert main(["score", *_inputs(workspace, natives=False), "--model", str(model_file),
                 "--out", str(scored)]) == 0
    out = tmp_path / "out"
    assert main(["evaluate", "--predictions", str(scored / "T1.qa"), *_inputs(workspace),
                 "--out", str(out)]) == 0
    bins = (out / "local_bins.tsv").read_text().splitlines()
    assert len(bins) == 21
    assert sum(int(line.split("\t")[2]) for line in bins[1:]) == 50 * len(SIGMAS)
    again = tmp_path / "again"
    assert main(["evaluate", "--predictions", str(scored / "T1.qa"), *_inputs(workspace),
                 "--out", str(again)]) == 0
    for name in ("summary.tsv", "local_bins.tsv", "sweep.tsv", "local_bins.png"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_sweep_threshold_counts(tmp_path):
    # identical models covering k of 20 residues give pool_max = k / 20
    native = syn.self_avoiding_chain(20, seed=14)
    for name, k in (("A", 3), ("B", 5), ("C", 10), ("D", 18)):
        part = [r for r in native.residues if r.seq_index <= k]
        models = [StructureModel(f"{name}{i}", name, part) for i in range(2)]
        full = StructureModel(f"{name}_native", name, native.residues)
        write_target(tmp_path, name, full, models)
    out = tmp_path / "out"
    rc = main(["sweep-threshold", "--pools", str(tmp_path / "pools"), "--natives", str(tmp_path / "natives"),
               "--thresholds", "0.2,0.3,0.6,1.0", "--out", str(out)])
    assert rc == 0
    rows = [line.split("\t") for line in (out / "sweep.tsv").read_text().splitlines()[1:]]
    assert [int(r[1]) for r in rows] == [1, 2, 3, 4]


def test_config_file_and_flag_override(tmp_path, features_file):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"features = {features_file}\nn_trees = 2\ncv_repeats = 0\nper_class = 5\nseed = 1\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["train", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path / "b")]) == 0
    assert '"seed":1' in (tmp_path / "a" / "model.json").read_text()
    assert '"seed":2' in (tmp_path / "b" / "model.json").read_text()


@pytest.mark.parametrize("content", ["n_trees = many\n", "bogus_key = 3\n", "gate = 1.5\n", "just words\n"])
def test_bad_config_exits_1_without_outputs(tmp_path, features_file, content):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(f"features = {features_file}\n" + content)
    out = tmp_path / "out"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 1
    assert not out.exists() or not any(out.iterdir())


def test_missing_required_setting_exits_1(tmp_path):
    assert main(["train", "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def test_unknown_flag_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["train", "--no-such-flag"])
    assert exc.value.code == 1


def test_logs_go_to_stderr(tmp_path, features_file):
    res = subprocess.run(
        [sys.executable, "-m", "rfqa.cli", "train", "--features", str(features_file), "--out", str(tmp_path),
         "--n-trees", "2", "--cv-repeats", "0", "--per-class", "5"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0
    assert res.stdout == "" and "training on" in res.stderr
