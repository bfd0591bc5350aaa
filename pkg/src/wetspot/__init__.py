"""wetspot: locate potential stagnant-water sites from elevation data.

A numpy/scipy toolkit that takes raw DEM tiles through hydrological
conditioning and terrain derivatives to survey-driven dataset construction,
feature screening, classifier training, and probability risk-map rasters.
"""

__version__ = "0.1.0"

from .raster import (
    GeoPoint,
    GeoTransform,
    GridParseError,
    MalformedTileError,
    MissingGeoreferenceError,
    OutOfExtentError,
    Raster,
    cell_center,
    locate,
    mosaic,
    read_ascii_grid,
    read_hgt,
    write_ascii_grid,
)
from .hydrology import (
    EmptyMaskError,
    FlowCycleError,
    altitude_above_channel,
    altitude_below_ridge,
    closed_depressions,
    d8_flow_direction,
    distance_to_mask,
    extract_channels,
    extract_ridges,
    fill_sinks,
    flow_accumulation,
    relative_slope_position,
)
from .terrain import (
    SurfaceFit,
    aspect,
    convergence_index,
    plan_curvature,
    profile_curvature,
    slope,
    surface_fit,
    tpi,
    twi,
)
from .sampling import (
    ChunkRecord,
    FeatureTable,
    LabeledPoint,
    SurveyParseError,
    SurveyRecord,
    extract_features,
    generate_negatives,
    load_survey,
    select_positives,
    split_by_longitude,
)
from .analysis import (
    ScreeningReport,
    mutual_information,
    pearson_matrix,
    redundancy_filter,
    screen_features,
    univariate_logistic,
)
from .learn import (
    ClassWeights,
    ConvergenceError,
    ModelFormatError,
    TrainedModel,
    balanced_weights,
    fit_extra_trees,
    fit_gradient_boosting,
    fit_linear_svm,
    fit_logistic,
    fit_random_forest,
    fit_tree,
    load_model,
    predict_label,
    predict_proba,
    save_model,
)
from .evaluate import (
    EvalReport,
    confusion_metrics,
    evaluate_scores,
    roc_auc,
    roc_curve_points,
    undersample_negatives,
)
from .pipeline import (
    ConfigError,
    PipelineConfig,
    PipelineResult,
    PipelineStageError,
    TerrainFeatures,
    predict_grid,
    run_pipeline,
    write_probability_png,
)
