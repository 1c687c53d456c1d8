"""Protein model quality assessment: hybrid consensus/single-model global
scores and random-forest per-residue distance prediction."""

__version__ = "0.1.0"
