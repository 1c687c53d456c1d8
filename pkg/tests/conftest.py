import numpy as np
import pytest

from rfqa import synthetic as syn
from rfqa.features import LAYOUT_VERSION, N_FEATURES, annotate_model
from rfqa.forest import ForestParams, RandomForestModel, Tree
from rfqa.structure_io import ModelPool, PredictedAnnotations, Residue, StructureModel, to_pdb


def ca_model(coords, sequence=None, model_id="m", target_id="T", start=1):
    coords = np.asarray(coords, dtype=float)
    sequence = sequence or "A" * len(coords)
    residues = [Residue(start + k, sequence[k], c) for k, c in enumerate(coords)]
    return StructureModel(model_id, target_id, residues)


def ca_pdb(coords, resnames=None):
    lines = []
    for k, (x, y, z) in enumerate(coords):
        name = resnames[k] if resnames else "ALA"
        lines.append(f"ATOM  {k + 1:5d}  CA  {name} A{k + 1:4d}    {x:8.3f}{y:8.3f}{z:8.3f}  1.00  0.00           C")
    return "\n".join(lines) + "\nEND\n"


def annotations_from(native):
    """Annotations that agree exactly with the native's own SS and accessibility."""
    ma = annotate_model(native)
    return PredictedAnnotations(ma.ss_model, ma.rsa, native.sequence)


def constant_forest(*values, n_features=N_FEATURES, layout=LAYOUT_VERSION):
    trees = [Tree.leaf(v) for v in values]
    return RandomForestModel(trees, n_features, ForestParams(n_trees=len(trees)), 0, layout)


def decoy_pool(native, sigmas, target_id=None, prefix="d"):
    target_id = target_id or native.target_id
    models = [syn.perturb(native, s, seed=k, model_id=f"{prefix}{k:02d}") for k, s in enumerate(sigmas)]
    for m in models:
        m.target_id = target_id
    return ModelPool(target_id, models, native.sequence)


def write_target(root, target, native, models, ann=None):
    """Lay out pools/<target>/, natives/<target>.pdb and annotations/<target>.ann under root."""
    from rfqa.structure_io import write_annotations

    pool_dir = root / "pools" / target
    pool_dir.mkdir(parents=True, exist_ok=True)
    for m in models:
        (pool_dir / f"{m.model_id}.pdb").write_text(to_pdb(m))
    if native is not None:
        (root / "natives").mkdir(exist_ok=True)
        (root / "natives" / f"{target}.pdb").write_text(to_pdb(native))
    if ann is not None:
        (root / "annotations").mkdir(exist_ok=True)
        (root / "annotations" / f"{target}.ann").write_text(write_annotations(ann))


@pytest.fixture(scope="session")
def native60():
    return syn.self_avoiding_chain(60, seed=3, target_id="T1")


@pytest.fixture(scope="session")
def ann60(native60):
    return annotations_from(native60)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda l: int(l.split()[1])):
        terminalreporter.write_line(line)
