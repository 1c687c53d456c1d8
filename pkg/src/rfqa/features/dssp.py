"""Three-state secondary structure from backbone hydrogen bonds (Kabsch-Sander)."""

import numpy as np

# q1 * q2 * f, kcal/mol
HBOND_FACTOR = 0.084 * 332.0
HBOND_CUTOFF = -0.5
MIN_ENERGY = -9.9
MIN_DISTANCE = 0.5
MAX_CA_DISTANCE = 9.0
PEPTIDE_BOND_MAX = 2.5


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _backbone_arrays(model):
    """Backbone coordinates for residues that have N, C and O, plus amide H positions.

    H is placed 1 A from N opposite the previous residue's carbonyl, as DSSP
    does. Residues with no bonded predecessor, and prolines, have no H.
    """
    res = model.residues
    ok = np.array([r.has_backbone for r in res], dtype=bool)
    n = np.full((len(res), 3), np.nan)
    c = np.full((len(res), 3), np.nan)
    o = np.full((len(res), 3), np.nan)
    for k, r in enumerate(res):
        if ok[k]:
            n[k], c[k], o[k] = r.atoms["N"], r.atoms["C"], r.atoms["O"]
    ca = model.ca_coords()
    h = np.full((len(res), 3), np.nan)
    for k in range(1, len(res)):
        prev, cur = res[k - 1], res[k]
        if not (ok[k] and ok[k - 1]) or cur.seq_index != prev.seq_index + 1 or cur.aa == "P":
            continue
        if np.linalg.norm(c[k - 1] - n[k]) > PEPTIDE_BOND_MAX:
            continue
        h[k] = n[k] + _unit(c[k - 1] - o[k - 1])
    return ok, ca, n, c, o, h


def hbond_energy_matrix(model):
    """E[i, j]: energy of the bond C=O(i) ... H-N(j) in kcal/mol (0 where absent)."""
    ok, ca, n, c, o, h = _backbone_arrays(model)
    L = len(model.residues)
    seq = model.seq_indices()
    donor = ~np.isnan(h[:, 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        r_on = np.linalg.norm(o[:, None] - n[None], axis=2)
        r_ch = np.linalg.norm(c[:, None] - h[None], axis=2)
        r_oh = np.linalg.norm(o[:, None] - h[None], axis=2)
        r_cn = np.linalg.norm(c[:, None] - n[None], axis=2)
        e = HBOND_FACTOR * (1 / r_on + 1 / r_ch - 1 / r_oh - 1 / r_cn)
    close = np.minimum.reduce([r_on, r_ch, r_oh, r_cn]) < MIN_DISTANCE
    e = np.where(close, MIN_ENERGY, np.maximum(e, MIN_ENERGY))
    ca_d = np.linalg.norm(ca[:, None] - ca[None], axis=2)
    valid = (
        ok[:, None] & donor[None, :]
        & (np.abs(seq[:, None] - seq[None, :]) >= 2)
        & (ca_d < MAX_CA_DISTANCE)
    )
    e = np.where(valid, e, 0.0)
    return e if L else np.zeros((0, 0))


def _shift(m, di, dj):
    """out[i, j] = m[i + di, j + dj], False outside the matrix."""
    out = np.zeros_like(m)
    n0, n1 = m.shape
    if abs(di) >= n0 or abs(dj) >= n1:
        return out
    src = m[max(di, 0):n0 + min(di, 0), max(dj, 0):n1 + min(dj, 0)]
    out[max(-di, 0):n0 + min(-di, 0), max(-dj, 0):n1 + min(-dj, 0)] = src
    return out


def assign_ss(model) -> str:
    """H/E/C per residue.

    H: residues i..i+3 when 4-turns start at both i-1 and i.
    E: residues in ladders of at least two consecutive bridges.
    Residues lacking backbone atoms are coil.
    """
    L = len(model.residues)
    if L == 0:
        return ""
    seq = model.seq_indices()
    # bond[i, j]: C=O of residue number i+1 bonded to N-H of residue number j+1
    S = int(seq.max())
    bond = np.zeros((S, S), dtype=bool)
    bond[np.ix_(seq - 1, seq - 1)] = hbond_energy_matrix(model) < HBOND_CUTOFF

    def b(di, dj):
        return _shift(bond, di, dj)

    turn = np.diagonal(b(0, 4)).copy()
    start = turn & np.concatenate([[False], turn[:-1]])
    helix = np.zeros(S, dtype=bool)
    for k in np.flatnonzero(start):
        helix[k:k + 4] = True

    ii, jj = np.indices((S, S))
    apart = (jj - ii) >= 3
    parallel = apart & ((b(-1, 0) & b(0, 1).T) | (b(-1, 0).T & b(0, 1)))
    anti = apart & ((b(0, 0) & b(0, 0).T) | (b(-1, 1) & b(-1, 1).T))
    ladder = (parallel & (_shift(parallel, 1, 1) | _shift(parallel, -1, -1))) | (
        anti & (_shift(anti, 1, -1) | _shift(anti, -1, 1))
    )
    strand = ladder.any(axis=1) | ladder.any(axis=0)

    out = np.where(helix, "H", np.where(strand, "E", "C"))
    return "".join(out[seq - 1])
