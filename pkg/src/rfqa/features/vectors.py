"""Global and sliding-window feature vectors, labels and the feature-matrix file."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..constants import (
    AA_INDEX,
    D0,
    EXPOSED_RSA,
    HYDROPHOBIC_WEIGHT,
    MAX_AREA,
    NONPOLAR,
)
from ..forest import LayoutMismatchError
from ..geometry import InsufficientOverlapError, per_residue_distances
from .dssp import assign_ss
from .sasa import residue_sasa

log = logging.getLogger(__name__)

LAYOUT_VERSION = "rfqa-window15-v1"
WINDOW = 15
HALF = WINDOW // 2
N_ONEHOT = WINDOW * 20

GLOBAL_NAMES = (
    "ss_diff", "sa_diff", "euclid_score", "ss_penalty",
    "surface_polar", "weighted_exposed", "total_surface",
)
FRAGMENT_NAMES = tuple(n for n in GLOBAL_NAMES if n != "sa_diff")
N_FEATURES = N_ONEHOT + len(FRAGMENT_NAMES) + len(GLOBAL_NAMES)

# columns holding fractions that must stay in [0, 1]
FRACTIONAL_COLUMNS = np.array(
    [N_ONEHOT + k for k, n in enumerate(FRAGMENT_NAMES) if n != "euclid_score"]
    + [N_ONEHOT + len(FRAGMENT_NAMES) + k for k, n in enumerate(GLOBAL_NAMES) if n != "euclid_score"]
)


def feature_names():
    """Human-readable meaning of each of the 313 columns, in order."""
    names = [f"win{p - HALF:+d}_{aa}" for p in range(WINDOW) for aa in sorted(AA_INDEX, key=AA_INDEX.get)]
    names += [f"frag_{n}" for n in FRAGMENT_NAMES]
    names += [f"global_{n}" for n in GLOBAL_NAMES]
    return names


def s_score(distance, d0=D0):
    distance = np.asarray(distance, dtype=float)
    return 1.0 / (1.0 + (distance / d0) ** 2)


@dataclass
class ModelAnnotations:
    """Per-residue annotations of one model, aligned with ``model.residues``."""

    ss_model: str
    sasa: np.ndarray
    rsa: np.ndarray


def annotate_model(model) -> ModelAnnotations:
    ss = assign_ss(model)
    area = residue_sasa(model)
    max_area = np.array([MAX_AREA[r.aa] for r in model.residues])
    rsa = np.clip(area / max_area, 0.0, 1.0)
    return ModelAnnotations(ss, area, rsa)


class _Context:
    """Per-residue arrays for one (model, prediction) pair used by every score."""

    def __init__(self, model, ann, model_ann=None):
        seq = model.seq_indices()
        if len(seq) and seq.max() > len(ann):
            raise ValueError(
                f"{model.model_id}: residue {seq.max()} beyond annotation length {len(ann)}"
            )
        if ann.sequence:
            for r in model.residues:
                if ann.sequence[r.seq_index - 1] != r.aa:
                    raise ValueError(
                        f"{model.model_id}: residue {r.seq_index} is {r.aa}, "
                        f"annotation sequence has {ann.sequence[r.seq_index - 1]}"
                    )
        model_ann = model_ann or annotate_model(model)
        self.seq = seq
        self.aa = [r.aa for r in model.residues]
        self.ss_model = np.array(list(model_ann.ss_model))
        self.ss_pred = np.array([ann.ss_pred[s - 1] for s in seq])
        self.sa_pred = ann.sa_pred[seq - 1]
        self.sasa = model_ann.sasa
        self.rsa = model_ann.rsa
        self.max_area = np.array([MAX_AREA[a] for a in self.aa])
        self.weight = np.array([HYDROPHOBIC_WEIGHT[a] for a in self.aa])
        self.nonpolar = np.array([a in NONPOLAR for a in self.aa])
        ca = model.ca_coords()
        self.dist = np.linalg.norm(ca[:, None] - ca[None], axis=2)
        self.pos = {s: k for k, s in enumerate(seq)}

    def scores(self, idx):
        """The seven quality scores over residue positions ``idx``."""
        idx = np.asarray(idx, dtype=int)
        if len(idx) == 0:
            return dict.fromkeys(GLOBAL_NAMES, 0.0)
        ss_m, ss_p = self.ss_model[idx], self.ss_pred[idx]
        out = {
            "ss_diff": float(np.mean(ss_m != ss_p)),
            "sa_diff": float(np.mean(np.abs(self.rsa[idx] - self.sa_pred[idx]))),
        }
        if len(idx) > 1:
            d = self.dist[np.ix_(idx, idx)]
            s = self.seq[idx].astype(float)
            ext = D0 * np.abs(s[:, None] - s[None])
            iu = np.triu_indices(len(idx), 1)
            out["euclid_score"] = float(d[iu].mean() / ext[iu].mean())
        else:
            out["euclid_score"] = 0.0
        helix_or_strand = (ss_p == "H") | (ss_p == "E")
        n_pred = int(helix_or_strand.sum())
        miss = ((ss_p == "H") & (ss_m != "H")) | ((ss_p == "E") & (ss_m != "E"))
        out["ss_penalty"] = float(miss.sum() / n_pred) if n_pred else 0.0
        area = self.sasa[idx]
        exposed = self.rsa[idx] > EXPOSED_RSA
        exposed_area = float(area[exposed].sum())
        total_area = float(area.sum())
        out["surface_polar"] = (
            float(area[exposed & self.nonpolar[idx]].sum()) / exposed_area if exposed_area > 0 else 0.0
        )
        out["weighted_exposed"] = (
            float((area[exposed] * self.weight[idx][exposed]).sum()) / total_area if total_area > 0 else 0.0
        )
        capped = np.minimum(area, self.max_area[idx])
        out["total_surface"] = float(capped.sum() / self.max_area[idx].sum())
        return out

    def window(self, center):
        """One-hot block and in-window residue positions for a window centred on ``center``."""
        onehot = np.zeros(N_ONEHOT)
        idx = []
        for p in range(WINDOW):
            k = self.pos.get(center - HALF + p)
            if k is not None:
                onehot[p * 20 + AA_INDEX[self.aa[k]]] = 1.0
                idx.append(k)
        return onehot, idx


@dataclass
class GlobalFeatures:
    ss_diff: float
    sa_diff: float
    euclid_score: float
    ss_penalty: float
    surface_polar: float
    weighted_exposed: float
    total_surface: float

    def as_array(self):
        return np.array([getattr(self, n) for n in GLOBAL_NAMES])


def global_features(model, ann, model_ann=None) -> GlobalFeatures:
    ctx = _Context(model, ann, model_ann)
    return GlobalFeatures(**ctx.scores(np.arange(len(ctx.seq))))


def _vector(ctx, center, global_row):
    onehot, idx = ctx.window(center)
    frag = ctx.scores(idx)
    return np.concatenate([onehot, [frag[n] for n in FRAGMENT_NAMES], global_row])


def window_features(model, ann, center: int, model_ann=None) -> np.ndarray:
    """313-long feature vector for residue number ``center``."""
    ctx = _Context(model, ann, model_ann)
    if center not in ctx.pos:
        raise KeyError(f"{model.model_id}: residue {center} not in model")
    g = ctx.scores(np.arange(len(ctx.seq)))
    return _vector(ctx, center, [g[n] for n in GLOBAL_NAMES])


def feature_matrix(model, ann, model_ann=None) -> np.ndarray:
    """Feature vectors for every residue of ``model``, in residue order."""
    ctx = _Context(model, ann, model_ann)
    g = ctx.scores(np.arange(len(ctx.seq)))
    grow = [g[n] for n in GLOBAL_NAMES]
    if len(ctx.seq) == 0:
        return np.zeros((0, N_FEATURES))
    return np.array([_vector(ctx, s, grow) for s in ctx.seq])


@dataclass
class SampleSet:
    """Labelled per-residue samples stored column-wise."""

    target: np.ndarray
    model: np.ndarray
    residue: np.ndarray
    features: np.ndarray
    distance: np.ndarray
    quality: np.ndarray = field(default=None)

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=object)
        self.model = np.asarray(self.model, dtype=object)
        self.residue = np.asarray(self.residue, dtype=int)
        self.features = np.asarray(self.features, dtype=float).reshape(len(self.residue), N_FEATURES)
        self.distance = np.asarray(self.distance, dtype=float)
        if self.quality is None:
            self.quality = s_score(self.distance)
        self.quality = np.asarray(self.quality, dtype=float)

    def __len__(self):
        return len(self.residue)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return SampleSet(self.target[idx], self.model[idx], self.residue[idx],
                         self.features[idx], self.distance[idx], self.quality[idx])

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            return cls([], [], [], np.zeros((0, N_FEATURES)), [], [])
        return cls(
            np.concatenate([p.target for p in parts]),
            np.concatenate([p.model for p in parts]),
            np.concatenate([p.residue for p in parts]),
            np.vstack([p.features for p in parts]),
            np.concatenate([p.distance for p in parts]),
            np.concatenate([p.quality for p in parts]),
        )


def model_samples(model, native, ann) -> SampleSet:
    """Samples for every residue of ``model`` that is also resolved in ``native``."""
    dist = dict(per_residue_distances(model, native))
    x = feature_matrix(model, ann)
    keep = [k for k, r in enumerate(model.residues) if r.seq_index in dist]
    residues = [model.residues[k].seq_index for k in keep]
    n = len(keep)
    return SampleSet(
        [model.target_id] * n, [model.model_id] * n, residues,
        x[keep], [dist[s] for s in residues],
    )


def build_dataset(entries, annotations, threads: int = 1) -> SampleSet:
    """Labelled samples from ``(pool, native)`` entries.

    ``annotations`` maps target id to PredictedAnnotations. Entries whose
    native is None or whose annotations are missing are skipped with a
    warning. Output order: target, then model, then residue.
    """
    jobs = []
    for pool, native in entries:
        if native is None:
            log.warning("%s: no native structure, skipped", pool.target_id)
            continue
        ann = annotations.get(pool.target_id)
        if ann is None:
            log.warning("%s: no annotations, skipped", pool.target_id)
            continue
        jobs.extend((m, native, ann) for m in pool.models)

    def run(job):
        m, native, ann = job
        try:
            return model_samples(m, native, ann)
        except InsufficientOverlapError as exc:
            log.warning("%s: %s", m.model_id, exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return SampleSet.concat(p for p in parts if p is not None)


def write_feature_table(samples: SampleSet, fh) -> None:
    """Tab-separated export; floats are written with ``repr`` so they read back exactly."""
    fh.write(f"# feature_layout={LAYOUT_VERSION}\n")
    header = ["target", "model", "residue_index"] + [f"f{k + 1}" for k in range(N_FEATURES)]
    fh.write("\t".join(header + ["true_distance", "true_quality"]) + "\n")
    for k in range(len(samples)):
        row = [str(samples.target[k]), str(samples.model[k]), str(samples.residue[k])]
        row += [repr(float(v)) for v in samples.features[k]]
        row += [repr(float(samples.distance[k])), repr(float(samples.quality[k]))]
        fh.write("\t".join(row) + "\n")


def read_feature_table(fh) -> SampleSet:
    first = fh.readline().strip()
    if first != f"# feature_layout={LAYOUT_VERSION}":
        raise LayoutMismatchError(f"expected layout {LAYOUT_VERSION!r}, found {first!r}")
    header = fh.readline().rstrip("\n").split("\t")
    if len(header) != N_FEATURES + 5:
        raise LayoutMismatchError(f"expected {N_FEATURES + 5} columns, found {len(header)}")
    target, model, residue, rows, dist, qual = [], [], [], [], [], []
    for line in fh:
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != len(header):
            raise LayoutMismatchError(f"row for {parts[:3]} has {len(parts)} columns")
        target.append(parts[0])
        model.append(parts[1])
        residue.append(int(parts[2]))
        rows.append([float(v) for v in parts[3:3 + N_FEATURES]])
        dist.append(float(parts[-2]))
        qual.append(float(parts[-1]))
    features = np.array(rows) if rows else np.zeros((0, N_FEATURES))
    return SampleSet(target, model, residue, features, dist, qual)
