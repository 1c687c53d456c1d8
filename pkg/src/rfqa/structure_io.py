"""Reading and writing structural models, prediction inputs and QA tables.

Models are aligned to their target by residue sequence number: residue
``seq_index`` of a model corresponds to position ``seq_index`` (1-based) of
the target sequence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .constants import AA_INDEX, DISTANCE_CAP, ONE_TO_THREE, THREE_TO_ONE

log = logging.getLogger(__name__)

BACKBONE = ("N", "CA", "C", "O")


class PdbParseError(ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class EmptyModelError(ValueError):
    pass


class EmptyPoolError(ValueError):
    pass


class AnnotationError(ValueError):
    pass


class QaFormatError(ValueError):
    pass


@dataclass(frozen=True)
class AtomRecord:
    atom_name: str
    residue_seq: int
    chain_id: str
    x: float
    y: float
    z: float
    element: str

    @property
    def coord(self):
        return np.array([self.x, self.y, self.z])


@dataclass
class Residue:
    """One amino acid of a model.

    ``atoms`` maps heavy-atom names (CA included) to coordinates and
    ``elements`` maps the same names to element symbols.
    """

    seq_index: int
    aa: str
    ca: np.ndarray
    atoms: dict = field(default_factory=dict)
    elements: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ca = np.asarray(self.ca, dtype=float)
        if "CA" not in self.atoms:
            self.atoms["CA"] = self.ca
            self.elements.setdefault("CA", "C")

    @property
    def backbone(self):
        """N, C and O coordinates, or None where the atom is missing."""
        return {name: self.atoms.get(name) for name in ("N", "C", "O")}

    @property
    def has_backbone(self):
        return all(self.atoms.get(name) is not None for name in ("N", "C", "O"))


@dataclass
class StructureModel:
    model_id: str
    target_id: str
    residues: list

    def __post_init__(self):
        idx = [r.seq_index for r in self.residues]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"{self.model_id}: residue numbers must be strictly increasing")

    def __len__(self):
        return len(self.residues)

    @property
    def sequence(self):
        return "".join(r.aa for r in self.residues)

    def seq_indices(self):
        return np.array([r.seq_index for r in self.residues], dtype=int)

    def ca_coords(self):
        if not self.residues:
            return np.zeros((0, 3))
        return np.array([r.ca for r in self.residues])

    def residue_map(self):
        return {r.seq_index: r for r in self.residues}

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0)):
        """Copy with every atom mapped to ``rotation @ x + translation``."""
        rotation = np.asarray(rotation, dtype=float)
        translation = np.asarray(translation, dtype=float)
        residues = []
        for r in self.residues:
            atoms = {k: rotation @ v + translation for k, v in r.atoms.items()}
            residues.append(Residue(r.seq_index, r.aa, atoms["CA"], atoms, dict(r.elements)))
        return StructureModel(self.model_id, self.target_id, residues)


@dataclass
class ModelPool:
    target_id: str
    models: list
    target_sequence: str
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.models)


@dataclass
class PredictedAnnotations:
    """Sequence-based predictions: 3-state SS and relative accessibility per target position."""

    ss_pred: str
    sa_pred: np.ndarray
    sequence: str | None = None

    def __post_init__(self):
        self.sa_pred = np.asarray(self.sa_pred, dtype=float)
        if len(self.ss_pred) != len(self.sa_pred):
            raise AnnotationError(
                f"SS length {len(self.ss_pred)} != SA length {len(self.sa_pred)}"
            )
        if np.any((self.sa_pred < 0) | (self.sa_pred > 1)) or not np.all(np.isfinite(self.sa_pred)):
            raise AnnotationError("SA values must lie in [0, 1]")
        if set(self.ss_pred) - set("HEC"):
            raise AnnotationError("SS codes must be H, E or C")

    def __len__(self):
        return len(self.ss_pred)


def _element_for(atom_name, field_value):
    element = field_value.strip().upper()
    if element:
        return element
    letters = [ch for ch in atom_name if ch.isalpha()]
    return letters[0].upper() if letters else "C"


def parse_pdb(text: str, model_id: str = "model", target_id: str = "") -> StructureModel:
    """Parse PDB text into a StructureModel.

    Reads the first MODEL block and the first chain encountered. Residues
    without a CA atom are dropped. Hydrogens, alternate locations other than
    blank/'A', insertion-code residues and hetero groups other than MSE/SEC
    are skipped.
    """
    residues: dict[int, dict] = {}
    order: list[int] = []
    chain = None
    seen_model = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        record = line[:6]
        if record.startswith("MODEL"):
            if seen_model:
                break
            seen_model = True
            continue
        if record.startswith("ENDMDL"):
            break
        if record not in ("ATOM  ", "HETATM"):
            continue
        if len(line) < 54:
            raise PdbParseError("truncated coordinate record", lineno)
        resname = line[17:20].strip()
        if record == "HETATM" and resname not in ("MSE", "SEC"):
            continue
        if line[16] not in (" ", "A"):
            continue
        if line[26] not in (" ", ""):
            continue
        atom_name = line[12:16].strip()
        if not atom_name:
            raise PdbParseError("empty atom name", lineno)
        element = _element_for(atom_name, line[76:78] if len(line) >= 78 else "")
        if element in ("H", "D"):
            continue
        chain_id = line[21]
        if chain is None:
            chain = chain_id
        elif chain_id != chain:
            continue
        try:
            seq = int(line[22:26])
            xyz = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
        except ValueError:
            raise PdbParseError(f"malformed numeric field: {line.rstrip()!r}", lineno) from None
        if not all(math.isfinite(v) for v in xyz):
            raise PdbParseError("non-finite coordinate", lineno)
        if resname not in THREE_TO_ONE:
            raise PdbParseError(f"unsupported residue {resname!r}", lineno)
        aa = THREE_TO_ONE[resname]
        entry = residues.get(seq)
        if entry is None:
            if order and seq < order[-1]:
                raise PdbParseError(f"residue {seq} out of order", lineno)
            entry = residues[seq] = {"aa": aa, "atoms": {}, "elements": {}}
            order.append(seq)
        elif order[-1] != seq:
            raise PdbParseError(f"residue {seq} is not contiguous in the file", lineno)
        if atom_name == "SE" and resname == "MSE":
            atom_name, element = "SD", "S"
        entry["atoms"].setdefault(atom_name, np.array(xyz))
        entry["elements"].setdefault(atom_name, element)

    out = []
    for seq in order:
        entry = residues[seq]
        if "CA" not in entry["atoms"]:
            log.debug("%s: residue %d has no CA, skipped", model_id, seq)
            continue
        out.append(Residue(seq, entry["aa"], entry["atoms"]["CA"], entry["atoms"], entry["elements"]))
    if not out:
        raise EmptyModelError(f"{model_id}: no residues with a CA atom")
    return StructureModel(model_id, target_id, out)


def to_pdb(model: StructureModel) -> str:
    """Serialize a model as PDB ATOM records (chain A, 3-decimal coordinates)."""
    lines = []
    serial = 1
    for r in model.residues:
        resname = ONE_TO_THREE[r.aa]
        names = [n for n in BACKBONE if n in r.atoms] + [n for n in r.atoms if n not in BACKBONE]
        for name in names:
            x, y, z = r.atoms[name]
            element = r.elements.get(name, name[0])
            padded = f" {name:<3s}" if len(name) < 4 else name
            lines.append(
                f"ATOM  {serial:5d} {padded:4s} {resname:3s} A{r.seq_index:4d}    "
                f"{x:8.3f}{y:8.3f}{z:8.3f}  1.00  0.00          {element:>2s}"
            )
            serial += 1
    lines.append("TER")
    lines.append("END")
    return "\n".join(lines) + "\n"


def sequence_mismatch(model: StructureModel, sequence: str):
    """First position where ``model`` contradicts ``sequence``, or None."""
    for r in model.residues:
        if r.seq_index < 1 or r.seq_index > len(sequence):
            return r.seq_index, r.aa, None
        if sequence[r.seq_index - 1] != r.aa:
            return r.seq_index, r.aa, sequence[r.seq_index - 1]
    return None


def load_pool(paths: Iterable, target_id: str, sequence: str) -> ModelPool:
    """Parse model files into a pool, rejecting files that contradict ``sequence``."""
    if not sequence:
        raise ValueError("target sequence is empty")
    models = []
    diagnostics = []
    for path in paths:
        path = Path(path)
        try:
            model = parse_pdb(path.read_text(), model_id=path.stem, target_id=target_id)
        except (PdbParseError, EmptyModelError, ValueError) as exc:
            diagnostics.append(f"{path.name}: {exc}")
            continue
        bad = sequence_mismatch(model, sequence)
        if bad is not None:
            pos, got, want = bad
            if want is None:
                diagnostics.append(f"{path.name}: residue {pos} lies outside the target sequence")
            else:
                diagnostics.append(f"{path.name}: mismatch at position {pos}: model {got}, target {want}")
            continue
        models.append(model)
    for msg in diagnostics:
        log.warning("%s: %s", target_id, msg)
    if not models:
        raise EmptyPoolError(f"{target_id}: no valid models")
    return ModelPool(target_id, models, sequence, diagnostics)


def _format_distance(d):
    if d is None or (isinstance(d, float) and math.isnan(d)):
        return "X"
    if not (0.0 < d <= DISTANCE_CAP):
        raise QaFormatError(f"distance {d} outside (0, {DISTANCE_CAP}]")
    return f"{max(d, 0.1):.1f}"


def write_qa_output(target_id: str, predictions: Sequence) -> str:
    """Render ``(model_id, global_score, distances)`` records as a QA table.

    A distance of None (or NaN) is written as ``X``.
    """
    lines = [f"TARGET {target_id}", "MODE 2"]
    for model_id, score, distances in predictions:
        if not (0.0 <= score <= 1.0) or math.isnan(score):
            raise QaFormatError(f"{model_id}: global score {score} outside [0, 1]")
        tokens = [model_id, f"{score:.2f}"] + [_format_distance(d) for d in distances]
        lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"


def read_qa_output(text: str):
    """Parse a QA table into ``(target_id, [(model_id, score, distances)])``.

    ``X`` tokens come back as None.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("TARGET ") or lines[1] != "MODE 2":
        raise QaFormatError("missing TARGET/MODE header")
    target_id = lines[0].split(None, 1)[1].strip()
    records = []
    for ln in lines[2:]:
        if ln == "END":
            break
        tokens = ln.split()
        if len(tokens) < 2:
            raise QaFormatError(f"bad record {ln!r}")
        try:
            score = float(tokens[1])
            distances = [None if t == "X" else float(t) for t in tokens[2:]]
        except ValueError:
            raise QaFormatError(f"bad record {ln!r}") from None
        records.append((tokens[0], score, distances))
    return target_id, records


_SS8_TO_3 = {"H": "H", "G": "H", "I": "H", "E": "E", "B": "E",
             "T": "C", "S": "C", "C": "C", "-": "C", "L": "C", "P": "C"}


def reduce_ss(ss: str) -> str:
    """Map 8-state DSSP codes onto H/E/C."""
    try:
        return "".join(_SS8_TO_3[ch] for ch in ss)
    except KeyError as exc:
        raise AnnotationError(f"unknown SS code {exc.args[0]!r}") from None


def parse_annotations(ss_text: str, sa_text: str, sequence: str | None = None) -> PredictedAnnotations:
    ss = reduce_ss("".join(ss_text.split()))
    try:
        sa = [float(tok) for tok in sa_text.split()]
    except ValueError:
        raise AnnotationError("SA values must be numeric") from None
    if sequence is not None:
        for name, n in (("SS", len(ss)), ("SA", len(sa))):
            if n != len(sequence):
                raise AnnotationError(
                    f"{name} length {n} does not match sequence length {len(sequence)}"
                )
    elif len(ss) != len(sa):
        raise AnnotationError(f"SS length {len(ss)} does not match SA length {len(sa)}")
    return PredictedAnnotations(ss, np.array(sa), sequence)


def read_annotations(text: str) -> PredictedAnnotations:
    """Parse the three-line annotation file: sequence, SS string, SA values."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise AnnotationError("annotation file needs sequence, SS and SA lines")
    sequence = lines[0]
    if set(sequence) - set(AA_INDEX):
        raise AnnotationError("sequence contains non-standard amino acids")
    return parse_annotations(lines[1], " ".join(lines[2:]), sequence)


def write_annotations(ann: PredictedAnnotations) -> str:
    sa = " ".join(f"{v:.3f}" for v in ann.sa_pred)
    return f"{ann.sequence or ''}\n{ann.ss_pred}\n{sa}\n"
