"""Local coordinate coding: anchor-point learning, locality-weighted
sparse encoding, constructive manifold codes, and linear learning on
codes."""

from .coding import (
    Code,
    Codebook,
    CodingConfig,
    EncodingError,
    RIDGE_MODE,
    UNIT_NORM_MODE,
    coding_norm,
    encode_dataset,
    encode_lcc,
    encode_matrix,
    encode_sparse,
    reconstruct,
)
from .cover import (
    ConstructedCode,
    ManifoldCover,
    build_cover,
    construct_code,
    greedy_cover,
    tangent_frame,
    verify_bounds,
)
from .data import Dataset, SwissRollSpec, gen_swiss_roll, read_idx, split
from .diagnostics import (
    LocalityReport,
    SmoothnessSpec,
    linearization_gap,
    locality_report,
    localization_measure,
)
from .dictionary import (
    DictLearnConfig,
    init_codebook,
    learn,
    learning_objective,
    rectify_signs,
    update_codebook,
)
from .supervised import (
    LinearModel,
    SmootherConfig,
    TrainingError,
    error_rate,
    kernel_smooth,
    predict,
    rmse,
    train_classifier,
    train_ridge,
)

__version__ = "0.1.0"
