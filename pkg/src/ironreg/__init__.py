"""Robust similarity-transform registration from 3D point correspondences.

Pipeline: invariant-gated random sampling estimates the scale and a seed
set of inliers; a certifiably optimal quaternion eigensolver handles each
weighted rotation solve; a trimmed graduated-non-convexity loop rejects
the remaining outliers.
"""

from .baseline import ransac_baseline, ransac_iteration_cap
from .errors import (
    AllTrimmedError,
    CorrespondenceParseError,
    DegenerateTriadError,
    DegenerateWeightsError,
    GapError,
    NoConsensusError,
    NormalizationError,
    NumericError,
    ParameterError,
    PlyParseError,
    RegistrationError,
    ShapeError,
)
from .geometry import (
    CorrespondenceSet,
    SimilarityTransform,
    apply_transform,
    exp_map_so3,
    geodesic_error,
    pi_matrices,
    quat_to_rot,
    rot_to_quat,
    triad_rotation,
    weighted_centroid_demean,
)
from .gnc import (
    GncOutcome,
    GncParams,
    GncVariant,
    gnc_lc,
    leclerc_weight,
    outlier_process_psi,
    residuals,
    rt_gnc,
    trim_bound_update,
)
from .io import (
    load_correspondences,
    load_point_cloud,
    save_correspondences,
    save_point_cloud,
)
from .pipeline import (
    IronConfig,
    RegistrationResult,
    default_config,
    iron,
    load_config,
    parse_config_text,
)
from .ransic import (
    KnownScale,
    RansicParams,
    RansicResult,
    ThreePointSet,
    complete_compatibility,
    default_ransic_params,
    first_compatibility,
    ransic,
)
from .rotation import (
    QuadraticForm,
    SolveReport,
    build_quadratic_form,
    certify_optimality,
    objective_value,
    recover_translation,
    solve_rotation,
    solve_weighted,
)
from .synthetic import (
    GeneratedProblem,
    Metrics,
    ProblemSpec,
    evaluate,
    make_problem,
    transform_errors,
)

__version__ = "0.1.0"
