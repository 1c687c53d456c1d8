"""Shrake-Rupley solvent accessible surface area."""

import numpy as np
from scipy.spatial import cKDTree

from ..constants import ATOMIC_RADII, PROBE_RADIUS, SPHERE_POINTS


def sphere_points(n=SPHERE_POINTS):
    """Quasi-uniform unit-sphere points on a golden-section spiral."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def model_frame(ca):
    """Orthonormal axes (as rows) that rotate with the structure.

    Sphere points are laid out in this frame so areas do not depend on how
    the model happens to be oriented. Collinear inputs fall back to a frame
    built from the lab axes.
    """
    ca = np.asarray(ca, dtype=float)
    if len(ca) < 2:
        return np.eye(3)
    axis = ca[-1] - ca[0]
    norm = np.linalg.norm(axis)
    if norm < 1e-6:
        return np.eye(3)
    e1 = axis / norm
    e2 = None
    order = [len(ca) // 2] + list(range(1, len(ca) - 1))
    for k in order:
        v = ca[k] - ca[0]
        perp = v - (v @ e1) * e1
        pn = np.linalg.norm(perp)
        if pn > 1e-3 * norm:
            e2 = perp / pn
            break
    if e2 is None:
        lab = np.eye(3)[np.argmin(np.abs(e1))]
        e2 = lab - (lab @ e1) * e1
        e2 /= np.linalg.norm(e2)
    return np.array([e1, e2, np.cross(e1, e2)])


def atom_sasa(coords, radii, frame=None, probe=PROBE_RADIUS, n_points=SPHERE_POINTS):
    """Accessible area of each atom (A^2)."""
    coords = np.asarray(coords, dtype=float)
    if len(coords) == 0:
        return np.zeros(0)
    ext = np.asarray(radii, dtype=float) + probe
    pts = sphere_points(n_points)
    if frame is not None:
        pts = pts @ frame
    tree = cKDTree(coords)
    neighbours = tree.query_ball_point(coords, ext + ext.max())
    area = np.empty(len(coords))
    for i, nb in enumerate(neighbours):
        nb = [j for j in nb if j != i and np.linalg.norm(coords[j] - coords[i]) < ext[i] + ext[j]]
        surf = coords[i] + ext[i] * pts
        if nb:
            nb = np.array(nb)
            d2 = ((surf[:, None, :] - coords[nb][None]) ** 2).sum(axis=2)
            exposed = np.all(d2 >= ext[nb][None] ** 2, axis=1).sum()
        else:
            exposed = n_points
        area[i] = 4.0 * np.pi * ext[i] ** 2 * exposed / n_points
    return area


def residue_sasa(model, probe=PROBE_RADIUS, n_points=SPHERE_POINTS):
    """Per-residue accessible area: the sum over each residue's heavy atoms."""
    coords, radii, owner = [], [], []
    for k, r in enumerate(model.residues):
        for name, xyz in r.atoms.items():
            coords.append(xyz)
            radii.append(ATOMIC_RADII.get(r.elements.get(name, "C"), ATOMIC_RADII["C"]))
            owner.append(k)
    if not coords:
        return np.zeros(len(model.residues))
    areas = atom_sasa(np.array(coords), radii, model_frame(model.ca_coords()), probe, n_points)
    return np.bincount(np.array(owner), weights=areas, minlength=len(model.residues))
