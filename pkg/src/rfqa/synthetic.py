"""Synthetic backbones and decoys for tests, demos and sanity checks."""

from __future__ import annotations

import numpy as np

from .constants import AMINO_ACIDS
from .structure_io import Residue, StructureModel

# ideal backbone geometry (A, degrees)
N_CA, CA_C, C_N, C_O, CA_CB = 1.458, 1.525, 1.329, 1.231, 1.530
ANG_N_CA_C, ANG_CA_C_N, ANG_C_N_CA, ANG_CA_C_O = 111.2, 116.2, 121.7, 120.5
ANG_N_CA_CB, TORSION_CB = 110.5, -122.6

HELIX = (-57.0, -47.0)
STRAND = (-120.0, 130.0)


def place(a, b, c, bond, angle, torsion):
    """Position of atom d given a-b-c, |cd| = bond, angle b-c-d and torsion a-b-c-d (degrees)."""
    angle, torsion = np.radians(angle), np.radians(torsion)
    bc = c - b
    bc /= np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    d2 = np.array([-bond * np.cos(angle),
                   bond * np.sin(angle) * np.cos(torsion),
                   bond * np.sin(angle) * np.sin(torsion)])
    return c + d2[0] * bc + d2[1] * m + d2[2] * n


def build_backbone(phi, psi, sequence=None, model_id="synthetic", target_id="synthetic",
                   omega=180.0):
    """Backbone (N, CA, C, O and CB for non-glycine) from torsion angles."""
    n_res = len(phi)
    sequence = sequence or "A" * n_res
    N = np.array([0.0, 0.0, 0.0])
    CA = np.array([N_CA, 0.0, 0.0])
    ang = np.radians(180.0 - ANG_N_CA_C)
    C = CA + CA_C * np.array([np.cos(ang), np.sin(ang), 0.0])
    frames = [(N, CA, C)]
    for i in range(1, n_res):
        pN, pCA, pC = frames[-1]
        n = place(pN, pCA, pC, C_N, ANG_CA_C_N, psi[i - 1])
        ca = place(pCA, pC, n, N_CA, ANG_C_N_CA, omega)
        c = place(pC, n, ca, CA_C, ANG_N_CA_C, phi[i])
        frames.append((n, ca, c))
    residues = []
    for i, (n, ca, c) in enumerate(frames):
        o = place(n, ca, c, C_O, ANG_CA_C_O, psi[i] + 180.0)
        atoms = {"N": n, "CA": ca, "C": c, "O": o}
        elements = {"N": "N", "CA": "C", "C": "C", "O": "O"}
        if sequence[i] != "G":
            atoms["CB"] = place(c, n, ca, CA_CB, ANG_N_CA_CB, TORSION_CB)
            elements["CB"] = "C"
        residues.append(Residue(i + 1, sequence[i], ca, atoms, elements))
    return StructureModel(model_id, target_id, residues)


def ideal_helix(n_res, sequence=None, **kw):
    return build_backbone([HELIX[0]] * n_res, [HELIX[1]] * n_res, sequence, **kw)


def extended_ca_chain(n_res, sequence=None, spacing=3.8, model_id="extended", target_id="synthetic"):
    """CA-only chain along x with residue i at (spacing * i, 0, 0)."""
    sequence = sequence or "A" * n_res
    residues = [Residue(i + 1, sequence[i], np.array([spacing * (i + 1), 0.0, 0.0]))
                for i in range(n_res)]
    return StructureModel(model_id, target_id, residues)


def _torsions(n_res, rng):
    phi, psi = np.empty(n_res), np.empty(n_res)
    i = 0
    while i < n_res:
        kind = rng.choice(3, p=[0.4, 0.3, 0.3])
        length = int(rng.integers(4, 12)) if kind < 2 else int(rng.integers(2, 6))
        for k in range(i, min(i + length, n_res)):
            if kind == 0:
                phi[k], psi[k] = HELIX
            elif kind == 1:
                phi[k], psi[k] = STRAND
            else:
                phi[k] = rng.uniform(-160, -60)
                psi[k] = rng.uniform(-60, 160)
            phi[k] += rng.normal(0, 4)
            psi[k] += rng.normal(0, 4)
        i += length
    return phi, psi


def random_sequence(n_res, rng):
    return "".join(rng.choice(list(AMINO_ACIDS), size=n_res))


def self_avoiding_chain(n_res, seed=0, min_ca_distance=4.0, model_id="native",
                        target_id="synthetic", max_tries=1000):
    """Random backbone of helix, strand and loop segments with no CA-CA clash.

    Non-adjacent CA atoms (|i - j| >= 3) stay at least ``min_ca_distance`` apart.
    """
    rng = np.random.default_rng(seed)
    sequence = random_sequence(n_res, rng)
    for _ in range(max_tries):
        phi, psi = _torsions(n_res, rng)
        model = build_backbone(phi, psi, sequence, model_id, target_id)
        ca = model.ca_coords()
        d = np.linalg.norm(ca[:, None] - ca[None], axis=2)
        far = np.abs(np.subtract.outer(np.arange(n_res), np.arange(n_res))) >= 3
        if np.all(d[far] >= min_ca_distance):
            return model
    raise RuntimeError("could not build a clash-free chain")


def perturb(model, sigma, seed=0, model_id=None):
    """Decoy: every residue shifted rigidly by an isotropic Gaussian of width ``sigma``."""
    rng = np.random.default_rng(seed)
    residues = []
    for r in model.residues:
        shift = rng.normal(0.0, sigma, size=3)
        atoms = {k: v + shift for k, v in r.atoms.items()}
        residues.append(Residue(r.seq_index, r.aa, atoms["CA"], atoms, dict(r.elements)))
    return StructureModel(model_id or f"{model.model_id}_s{sigma:g}", model.target_id, residues)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    a, b, c, d = q
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
    ])
