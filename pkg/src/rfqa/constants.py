"""Amino-acid tables and physical constants shared across modules."""

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
AA_INDEX = {aa: i for i, aa in enumerate(AMINO_ACIDS)}

THREE_TO_ONE = {
    "ALA": "A", "CYS": "C", "ASP": "D", "GLU": "E", "PHE": "F",
    "GLY": "G", "HIS": "H", "ILE": "I", "LYS": "K", "LEU": "L",
    "MET": "M", "ASN": "N", "PRO": "P", "GLN": "Q", "ARG": "R",
    "SER": "S", "THR": "T", "VAL": "V", "TRP": "W", "TYR": "Y",
    # modified residues folded onto their parent amino acid
    "MSE": "M", "SEC": "C",
}
ONE_TO_THREE = {v: k for k, v in THREE_TO_ONE.items() if k not in ("MSE", "SEC")}

# Distance scale of the S-score, 1 / (1 + (d / D0)^2).
D0 = 3.8
# Upper bound on any emitted per-residue distance (Angstrom).
DISTANCE_CAP = 15.0
# Pool-level gate on the maximum consensus score.
GATE_THRESHOLD = 0.2

GDT_CUTOFFS = (1.0, 2.0, 4.0, 8.0)

# Theoretical maximum accessible areas (A^2), Tien et al. 2013.
MAX_AREA = {
    "A": 129.0, "R": 274.0, "N": 195.0, "D": 193.0, "C": 167.0,
    "Q": 225.0, "E": 223.0, "G": 104.0, "H": 224.0, "I": 197.0,
    "L": 201.0, "K": 236.0, "M": 224.0, "F": 240.0, "P": 159.0,
    "S": 155.0, "T": 172.0, "W": 285.0, "Y": 263.0, "V": 174.0,
}

# Kyte-Doolittle hydropathy.
KYTE_DOOLITTLE = {
    "A": 1.8, "R": -4.5, "N": -3.5, "D": -3.5, "C": 2.5,
    "Q": -3.5, "E": -3.5, "G": -0.4, "H": -3.2, "I": 4.5,
    "L": 3.8, "K": -3.9, "M": 1.9, "F": 2.8, "P": -1.6,
    "S": -0.8, "T": -0.7, "W": -0.9, "Y": -1.3, "V": 4.2,
}
_kd_lo = min(KYTE_DOOLITTLE.values())
_kd_hi = max(KYTE_DOOLITTLE.values())
HYDROPHOBIC_WEIGHT = {
    aa: (v - _kd_lo) / (_kd_hi - _kd_lo) for aa, v in KYTE_DOOLITTLE.items()
}

NONPOLAR = frozenset("AVLIPFMWGC")

# Shrake-Rupley atomic radii (A); anything unlisted is treated as carbon.
ATOMIC_RADII = {"N": 1.55, "C": 1.70, "O": 1.52, "S": 1.80}
PROBE_RADIUS = 1.4
SPHERE_POINTS = 92

EXPOSED_RSA = 0.25
