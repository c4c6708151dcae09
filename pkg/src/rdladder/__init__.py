"""Parametric rate-distortion model for video transcoding decisions.

Measured per-GOP (bitrate, PSNR) curves are clustered per resolution
tier; each cluster centroid gets a cubic quality-vs-bitrate fit. From
those fits the package derives knee points and resolution ladders,
visually-lossless bitrate thresholds and near-zero-slope intervals, and
turns them into per-GOP trans-sizing/trans-rating recommendations with
quantified bitrate savings.
"""

from .clustering import (
    BitrateGrid,
    ClusterModelSet,
    GopAssignment,
    KMeansResult,
    RDVector,
    assign_cluster,
    assign_cluster_multi,
    kmeans,
    resample_to_grid,
    train,
    train_details,
)
from .decision import (
    CurveIntersection,
    DecisionConfig,
    GopObservation,
    Modes,
    NzsInterval,
    Recommendation,
    ResolutionLadder,
    SavingsReport,
    VlThreshold,
    build_ladder,
    build_ladders,
    curve_intersections,
    nzs_interval,
    nzs_intervals,
    recommend,
    recommend_bitrate_nzs,
    recommend_bitrate_vl,
    recommend_resolution,
    savings_report,
    vl_threshold,
    vl_thresholds,
)
from .errors import (
    ConditioningError,
    ConflictError,
    CoverageError,
    IdenticalCurvesError,
    InsufficientDataError,
    ParseError,
    RDLadderError,
    SchemaVersionError,
    ValidationError,
)
from .ingest import (
    MeasurementSet,
    RDSample,
    builtin_model,
    format_measurements,
    load_model,
    parse_measurements,
    save_model,
)
from .rd_model import (
    CubicRD,
    FitReport,
    LogFit,
    compare_fits,
    eval_cubic,
    eval_derivative,
    fit_log,
    fit_polynomial,
)
from .tiers import STANDARD_TIERS, ResolutionTier, tier_from_name

__version__ = "0.1.0"
