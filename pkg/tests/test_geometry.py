import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfqa import synthetic as syn
from rfqa.geometry import (
    InsufficientOverlapError,
    gdt_ts,
    kabsch,
    per_residue_distances,
    single_superposition_fractions,
)

from conftest import ca_model


def rot_z(deg):
    t = np.radians(deg)
    return np.array([[np.cos(t), -np.sin(t), 0], [np.sin(t), np.cos(t), 0], [0, 0, 1]])


def zyz(alpha, beta, gamma):
    """Rotation matrices for arrays of ZYZ Euler angles (radians), shape (..., 3, 3)."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    return np.stack([
        np.stack([ca * cb * cg - sa * sg, -ca * cb * sg - sa * cg, ca * sb], -1),
        np.stack([sa * cb * cg + ca * sg, -sa * cb * sg + ca * cg, sa * sb], -1),
        np.stack([-sb * cg, sb * sg, cb], -1),
    ], -2)


def grid_rmsd(a, b, step_deg=2.0):
    """Smallest RMSD over a ZYZ Euler grid; centring is optimal for any fixed rotation."""
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    step = np.radians(step_deg)
    alphas = np.arange(0, 2 * np.pi, step)
    betas = np.arange(0, np.pi + 1e-9, step)
    gammas = np.arange(0, 2 * np.pi, step)
    best = np.inf
    bb, gg = np.meshgrid(betas, gammas, indexing="ij")
    for alpha in alphas:
        rots = zyz(np.full(bb.shape, alpha), bb, gg).reshape(-1, 3, 3)
        moved = np.einsum("rij,nj->rni", rots, a)
        rmsd = np.sqrt(((moved - b) ** 2).sum(axis=2).mean(axis=1))
        best = min(best, rmsd.min())
    return best


def test_kabsch_identity():
    pts = np.random.default_rng(0).normal(size=(8, 3))
    sup = kabsch(pts, pts)
    assert sup.rmsd < 1e-12
    np.testing.assert_allclose(sup.rotation, np.eye(3), atol=1e-10)


def test_kabsch_known_transform():
    pts = np.random.default_rng(1).normal(size=(12, 3)) * 5
    target = pts @ rot_z(90).T + [1, 2, 3]
    sup = kabsch(pts, target)
    assert sup.rmsd < 1e-8
    np.testing.assert_allclose(sup.rotation, rot_z(90), atol=1e-10)
    np.testing.assert_allclose(sup.translation, [1, 2, 3], atol=1e-10)


def test_kabsch_matches_rotation_grid_search():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(10, 3)) * 2
    b = a @ syn.random_rotation(rng).T + rng.normal(size=3) + rng.normal(scale=0.5, size=(10, 3))
    exact = kabsch(a, b).rmsd
    grid = grid_rmsd(a, b)
    assert exact <= grid + 1e-12
    assert grid - exact < 0.2


def test_kabsch_never_reflects():
    pts = np.random.default_rng(2).normal(size=(10, 3))
    mirrored = pts * [1, 1, -1]
    sup = kabsch(pts, mirrored)
    assert np.linalg.det(sup.rotation) == pytest.approx(1.0)


def test_kabsch_needs_three_points():
    with pytest.raises(InsufficientOverlapError):
        kabsch(np.zeros((2, 3)), np.zeros((2, 3)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kabsch_beats_other_rigid_transforms(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(10, 3)) * 3
    b = rng.normal(size=(10, 3)) * 3
    sup = kabsch(a, b)
    rot, t = syn.random_rotation(rng), rng.normal(size=3)
    other = np.sqrt(np.mean(np.sum((a @ rot.T + t - b) ** 2, axis=1)))
    assert sup.rmsd <= other + 1e-12


def test_gdt_self_is_one(native60):
    r = gdt_ts(native60, native60)
    assert (r.p1, r.p2, r.p4, r.p8, r.gdt_ts) == (1.0, 1.0, 1.0, 1.0, 1.0)


def test_gdt_rigid_shift(native60):
    shifted = native60.transformed(np.eye(3), (1.5, 0, 0))
    assert gdt_ts(shifted, native60).gdt_ts == 1.0


def _core_pair(seed=0):
    """30-residue pair sharing a rigid 10-residue core (residues 11-20); the rest moved 6-10 A."""
    rng = np.random.default_rng(seed)
    ref = syn.self_avoiding_chain(30, seed=seed).ca_coords()
    model = ref.copy()
    for k in itertools.chain(range(10), range(20, 30)):
        v = rng.normal(size=3)
        model[k] += v / np.linalg.norm(v) * rng.uniform(6, 10)
    rot = syn.random_rotation(rng)
    return ca_model(model @ rot.T + rng.normal(size=3) * 10), ca_model(ref)


def _fragment_oracle(a, b, cutoff):
    """Best count within ``cutoff`` over superpositions on every contiguous fragment of >= 3 residues."""
    n = len(a)
    best = 0
    for i in range(n):
        for j in range(i + 3, n + 1):
            sup = kabsch(a[i:j], b[i:j])
            d = np.linalg.norm(sup.apply(a) - b, axis=1)
            best = max(best, int(np.sum(d <= cutoff)))
    return best


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gdt_rigid_core_against_fragment_oracle(seed):
    model, ref = _core_pair(seed)
    res = gdt_ts(model, ref)
    a, b = model.ca_coords(), ref.ca_coords()
    oracle = _fragment_oracle(a, b, 1.0)
    assert oracle == 10
    assert res.p1 == oracle / 30


def test_gdt_fractions_monotone(native60):
    decoy = syn.perturb(native60, 3.0, seed=4)
    r = gdt_ts(decoy, native60)
    assert r.p1 <= r.p2 <= r.p4 <= r.p8
    assert r.gdt_ts == pytest.approx((r.p1 + r.p2 + r.p4 + r.p8) / 4)


def test_gdt_denominator_is_reference_length(native60):
    half = ca_model(native60.ca_coords()[:30])
    full = ca_model(native60.ca_coords())
    assert gdt_ts(half, full).gdt_ts == 0.5
    assert gdt_ts(half, full, length=120).gdt_ts == 0.25


def test_gdt_insufficient_overlap():
    a = ca_model([(0, 0, 0), (3.8, 0, 0)])
    b = ca_model([(0, 0, 0), (3.8, 0, 0), (7.6, 0, 0)], start=5)
    with pytest.raises(InsufficientOverlapError):
        gdt_ts(a, b)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 6.0))
def test_gdt_symmetric_and_rigid_invariant(seed, sigma):
    rng = np.random.default_rng(seed)
    native = syn.self_avoiding_chain(25, seed=seed % 1000)
    decoy = syn.perturb(native, sigma, seed=seed)
    base = gdt_ts(decoy, native).gdt_ts
    assert gdt_ts(native, decoy).gdt_ts == pytest.approx(base, abs=1e-12)
    moved = decoy.transformed(syn.random_rotation(rng), rng.normal(size=3) * 20)
    assert abs(gdt_ts(moved, native).gdt_ts - base) <= 1e-6
    assert abs(gdt_ts(decoy, native.transformed(syn.random_rotation(rng))).gdt_ts - base) <= 1e-6
    lower = single_superposition_fractions(decoy, native)
    assert base >= sum(lower) / 4 - 1e-12


def test_per_residue_identity_and_shift(native60):
    assert all(d < 1e-6 for _, d in per_residue_distances(native60, native60))
    shifted = native60.transformed(np.eye(3), (5.0, 0, 0))
    assert all(d < 1e-6 for _, d in per_residue_distances(shifted, native60))


def test_per_residue_single_displacement():
    native = syn.self_avoiding_chain(50, seed=11)
    ca = native.ca_coords()
    moved = ca.copy()
    k = 25
    chord = ca[k + 1] - ca[k - 1]
    perp = np.cross(chord, [0.0, 0.0, 1.0])
    moved[k] += 3.0 * perp / np.linalg.norm(perp)
    dist = dict(per_residue_distances(ca_model(moved), ca_model(ca)))
    assert abs(dist[k + 1] - 3.0) < 0.2
    assert max(d for s, d in dist.items() if s != k + 1) < 0.2
