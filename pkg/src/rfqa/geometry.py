"""Rigid-body superposition and GDT-TS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import GDT_CUTOFFS

SEED_LENGTHS = (3, 5, 7)
SEED_STEP = 4
MAX_ITERATIONS = 20


class InsufficientOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class Superposition:
    rotation: np.ndarray
    translation: np.ndarray
    rmsd: float

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class GdtResult:
    p1: float
    p2: float
    p4: float
    p8: float
    gdt_ts: float


def kabsch(points_a, points_b) -> Superposition:
    """Least-squares rotation and translation taking ``points_a`` onto ``points_b``."""
    a = np.asarray(points_a, dtype=float)
    b = np.asarray(points_b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise ValueError("point sets must both have shape (n, 3)")
    if len(a) < 3:
        raise InsufficientOverlapError("superposition needs at least 3 points")
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    trans = cb - rot @ ca
    diff = a @ rot.T + trans - b
    rmsd = float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
    return Superposition(rot, trans, rmsd)


def _batched_kabsch(a, b, weights):
    """Kabsch for many point subsets at once.

    a, b: (n, 3); weights: (s, n) of 0/1. Returns rotations (s, 3, 3) and
    translations (s, 3).
    """
    w = weights / weights.sum(axis=1, keepdims=True)
    ca = w @ a
    cb = w @ b
    h = np.einsum("sn,sni,snj->sij", w, a[None] - ca[:, None], b[None] - cb[:, None])
    u, _, vt = np.linalg.svd(h)
    v = np.swapaxes(vt, 1, 2)
    ut = np.swapaxes(u, 1, 2)
    d = np.sign(np.linalg.det(v @ ut))
    d[d == 0] = 1.0
    v[:, :, 2] *= d[:, None]
    rot = v @ ut
    trans = cb - np.einsum("sij,sj->si", rot, ca)
    return rot, trans


def _distances(a, b, rot, trans):
    moved = np.einsum("sij,nj->sni", rot, a) + trans[:, None, :]
    return np.linalg.norm(moved - b[None], axis=2)


def common_ca(model, reference):
    """CA coordinates of residues present in both structures, by sequence number."""
    ref = {r.seq_index: r for r in reference.residues}
    pairs = [(r.ca, ref[r.seq_index].ca) for r in model.residues if r.seq_index in ref]
    if len(pairs) < 3:
        raise InsufficientOverlapError(
            f"{model.model_id} vs {reference.model_id}: {len(pairs)} common residues (need 3)"
        )
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    return a, b


def seed_masks(n):
    """Initial residue subsets for the GDT search: fragments of 3, 5, 7 stepped by 4, plus all."""
    masks = []
    for length in SEED_LENGTHS:
        if length >= n:
            continue
        for start in range(0, n - length + 1, SEED_STEP):
            m = np.zeros(n, dtype=bool)
            m[start:start + length] = True
            masks.append(m)
    masks.append(np.ones(n, dtype=bool))
    return np.array(masks)


def gdt_counts(a, b, cutoffs=GDT_CUTOFFS):
    """Largest number of residues within each cutoff over the seed-and-extend search.

    Every superposition visited while refining for any cutoff is scored at
    all cutoffs, so the returned counts are non-decreasing in the cutoff.
    """
    seeds = seed_masks(len(a)).astype(float)
    best = np.zeros(len(cutoffs), dtype=int)
    cut = np.asarray(cutoffs, dtype=float)

    def score(dist):
        counts = (dist[:, :, None] <= cut[None, None, :]).sum(axis=1)
        np.maximum(best, counts.max(axis=0), out=best)

    rot, trans = _batched_kabsch(a, b, seeds)
    dist0 = _distances(a, b, rot, trans)
    score(dist0)
    for d in cutoffs:
        r, t, dist = rot.copy(), trans.copy(), dist0
        members = seeds.astype(bool)
        active = np.ones(len(seeds), dtype=bool)
        for _ in range(MAX_ITERATIONS):
            within = dist <= d
            changed = np.any(within != members, axis=1)
            active &= changed & (within.sum(axis=1) >= 3)
            if not active.any():
                break
            members = np.where(active[:, None], within, members)
            r_new, t_new = _batched_kabsch(a, b, within[active].astype(float))
            r[active], t[active] = r_new, t_new
            dist = _distances(a, b, r, t)
            score(dist[active])
    return best


def gdt_ts(model, reference, length: int | None = None) -> GdtResult:
    """GDT-TS of ``model`` against ``reference``.

    Fractions are normalised by ``length`` (default: the reference's residue
    count), not by the number of commonly resolved residues.
    """
    a, b = common_ca(model, reference)
    n = len(reference.residues) if length is None else int(length)
    counts = gdt_counts(a, b)
    p1, p2, p4, p8 = (min(int(c) / n, 1.0) for c in counts)
    return GdtResult(p1, p2, p4, p8, (p1 + p2 + p4 + p8) / 4)


def single_superposition_fractions(model, reference, length=None):
    """Fraction of residues within each cutoff after one full-length superposition."""
    a, b = common_ca(model, reference)
    n = len(reference.residues) if length is None else int(length)
    sup = kabsch(a, b)
    dist = np.linalg.norm(sup.apply(a) - b, axis=1)
    return [float(np.sum(dist <= d)) / n for d in GDT_CUTOFFS]


def per_residue_distances(model, native):
    """(seq_index, CA distance) after superposing the whole model onto the native."""
    ref = {r.seq_index: r for r in native.residues}
    shared = [r for r in model.residues if r.seq_index in ref]
    a, b = common_ca(model, native)
    sup = kabsch(a, b)
    dist = np.linalg.norm(sup.apply(a) - b, axis=1)
    return [(r.seq_index, float(x)) for r, x in zip(shared, dist)]
