from .dssp import assign_ss, hbond_energy_matrix
from .sasa import residue_sasa
from .vectors import (
    GLOBAL_NAMES,
    LAYOUT_VERSION,
    N_FEATURES,
    GlobalFeatures,
    LayoutMismatchError,
    ModelAnnotations,
    SampleSet,
    annotate_model,
    build_dataset,
    feature_matrix,
    feature_names,
    global_features,
    read_feature_table,
    s_score,
    window_features,
    write_feature_table,
)

__all__ = [
    "GLOBAL_NAMES", "LAYOUT_VERSION", "N_FEATURES", "GlobalFeatures", "LayoutMismatchError",
    "ModelAnnotations", "SampleSet", "annotate_model", "assign_ss", "build_dataset", "feature_matrix",
    "feature_names", "global_features", "hbond_energy_matrix", "read_feature_table", "residue_sasa",
    "s_score", "window_features", "write_feature_table",
]
