"""End-to-end orchestration: DEM to risk map.

TerrainFeatures derives the named feature grids from one DEM with shared
intermediates (fill, flow routing, channel geometry). PipelineConfig +
run_pipeline execute the whole chain - ingest, fill, features, sampling,
screening, split, training, undersampled evaluation, grid prediction - and
write every artifact plus a manifest under one output directory, so a rerun
with the same config reproduces the same bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import ScreeningReport, screen_features
from .evaluate import EvalReport, evaluate_scores, roc_curve_points, undersample_negatives
from .hydrology import (
    DEFAULT_CHANNEL_THRESHOLD_CELLS,
    DEFAULT_MIN_SLOPE,
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
from .learn import FIT_FUNCTIONS, TrainedModel, predict_proba, save_model
from .raster import (
    GeoTransform,
    Raster,
    geographic_transform,
    mosaic,
    read_ascii_grid,
    read_hgt,
    write_ascii_grid,
)
from .sampling import (
    DEFAULT_MIN_NEG_DIST_M,
    DEFAULT_MIN_POS_DIST_M,
    FeatureTable,
    LabeledPoint,
    extract_features,
    generate_negatives,
    load_survey,
    select_positives,
    split_by_longitude,
)
from .terrain import (
    DEFAULT_TPI_RADIUS_M,
    aspect,
    convergence_index,
    plan_curvature,
    profile_curvature,
    slope,
    tpi,
    twi,
)

FEATURE_NAMES = (
    "slope",
    "aspect",
    "plan_curvature",
    "profile_curvature",
    "convergence_index",
    "tpi",
    "twi",
    "cnd",
    "rps",
    "aacl",
    "abrl",
    "closed_depressions",
    "flow_direction",
)

# The 500 m TPI is commonly referred to by its radius.
FEATURE_ALIASES = {"tpi500": "tpi"}


class ConfigError(ValueError):
    """Pipeline configuration is unusable (missing file, unknown name...)."""


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage


def canonical_feature(name: str) -> str:
    key = name.strip().lower()
    key = FEATURE_ALIASES.get(key, key)
    if key not in FEATURE_NAMES:
        raise ConfigError(f"unknown feature {name!r}; known: {', '.join(FEATURE_NAMES)}")
    return key


class TerrainFeatures:
    """Caches the feature grids derived from one DEM.

    Flow routing and everything downstream of it (accumulation, channels,
    ridges, AACL/ABRL/RPS) use the conditioned, sink-filled surface; the
    closed depressions grid is the fill depth relative to the raw DEM.
    Windowed derivatives (slope, aspect, curvatures, TPI, CI) describe the
    raw surface - filling flattens depressions into epsilon ramps, which
    would turn their slope into a fill detector. The one exception is TWI,
    whose slope comes from the same filled surface that produced the
    contributing areas, keeping the wetness model internally consistent.
    """

    def __init__(
        self,
        dem: Raster,
        min_slope: float = DEFAULT_MIN_SLOPE,
        channel_threshold_cells: float = DEFAULT_CHANNEL_THRESHOLD_CELLS,
        tpi_radius_m: float = DEFAULT_TPI_RADIUS_M,
    ):
        self.dem = dem
        self.min_slope = min_slope
        self.channel_threshold_cells = channel_threshold_cells
        self.tpi_radius_m = tpi_radius_m
        self._cache: dict[str, Raster] = {}

    def _get(self, key: str, maker) -> Raster:
        if key not in self._cache:
            self._cache[key] = maker()
        return self._cache[key]

    @property
    def filled(self) -> Raster:
        return self._get("filled", lambda: fill_sinks(self.dem, self.min_slope))

    @property
    def flow_direction(self) -> Raster:
        return self._get("flow_direction", lambda: d8_flow_direction(self.filled))

    @property
    def accumulation(self) -> Raster:
        return self._get("accumulation", lambda: flow_accumulation(self.flow_direction))

    @property
    def channels(self) -> Raster:
        return self._get(
            "channels", lambda: extract_channels(self.accumulation, self.channel_threshold_cells)
        )

    @property
    def ridges(self) -> Raster:
        return self._get("ridges", lambda: extract_ridges(self.accumulation))

    def grid(self, name: str) -> Raster:
        """Feature raster by canonical name."""
        name = canonical_feature(name)
        makers = {
            "slope": lambda: slope(self.dem),
            "aspect": lambda: aspect(self.dem),
            "plan_curvature": lambda: plan_curvature(self.dem),
            "profile_curvature": lambda: profile_curvature(self.dem),
            "convergence_index": lambda: convergence_index(self.grid("aspect")),
            "tpi": lambda: tpi(self.dem, self.tpi_radius_m),
            "twi": lambda: twi(self.accumulation, self._slope_filled),
            "cnd": lambda: distance_to_mask(self.channels),
            "aacl": lambda: altitude_above_channel(self.filled, self.channels),
            "abrl": lambda: altitude_below_ridge(self.filled, self.ridges),
            "rps": lambda: relative_slope_position(self.grid("aacl"), self.grid("abrl")),
            "closed_depressions": lambda: closed_depressions(self.dem, self.filled),
            "flow_direction": lambda: self.flow_direction,
        }
        return self._get(name, makers[name])

    @property
    def _slope_filled(self) -> Raster:
        return self._get("slope_filled", lambda: slope(self.filled))

    def grids(self, names: list[str]) -> dict[str, Raster]:
        return {canonical_feature(n): self.grid(n) for n in names}


def predict_grid(model: TrainedModel, named_rasters: dict[str, Raster]) -> Raster:
    """Per-cell positive-class probability raster.

    Cells where any feature is nodata are nodata in the output.

    Raises:
        ConfigError: a feature the model expects has no raster.
    """
    missing = [n for n in model.feature_names if n not in named_rasters]
    if missing:
        raise ConfigError(f"missing feature rasters for prediction: {missing}")
    rasters = [named_rasters[n] for n in model.feature_names]
    ref = rasters[0]
    stack = np.stack([r.values.ravel() for r in rasters], axis=1)
    ok = np.all(np.isfinite(stack), axis=1)
    out = np.full(stack.shape[0], np.nan)
    if ok.any():
        out[ok] = predict_proba(model, stack[ok])
    return ref.with_values(out.reshape(ref.values.shape))


def write_probability_png(raster: Raster, path: str | Path) -> None:
    """Grayscale rendering of a probability raster: 0 black, 1 white.

    Nodata cells are black.
    """
    from PIL import Image

    vals = np.nan_to_num(raster.values, nan=0.0)
    img = np.clip(np.rint(vals * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(img, mode="L").save(Path(path), format="PNG")


@dataclass
class PipelineConfig:
    """Everything one pipeline run needs; see configs in the demos."""

    dem_paths: list[str]
    positives_path: str
    chunks_path: str
    output_dir: str
    dem_format: str = "ascii"  # "ascii" or "hgt"
    hgt_arc_seconds: int = 1
    geographic: bool = False  # attach metres/degree factors to ASCII DEMs
    variant: str = "A"
    features: list[str] | None = None  # None -> screening selects
    p_threshold: float = 0.05
    r_threshold: float = 0.85
    model_family: str = "gradient_boosting"
    model_params: dict = field(default_factory=dict)
    split_percentile: float = 80.0
    decision_threshold: float = 0.5
    min_slope: float = DEFAULT_MIN_SLOPE
    channel_threshold_cells: float = DEFAULT_CHANNEL_THRESHOLD_CELLS
    tpi_radius_m: float = DEFAULT_TPI_RADIUS_M
    min_pos_dist_m: float = DEFAULT_MIN_POS_DIST_M
    min_neg_dist_m: float = DEFAULT_MIN_NEG_DIST_M
    seed_negatives: int = 0
    seed_model: int = 0
    seed_undersample: int = 0
    write_grids: bool = True
    write_png: bool = True

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        required = ("dem_paths", "positives_path", "chunks_path", "output_dir")
        missing = [k for k in required if k not in doc]
        if missing:
            raise ConfigError(f"missing config keys: {missing}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def validate(self) -> None:
        for p in [*self.dem_paths, self.positives_path, self.chunks_path]:
            if not Path(p).exists():
                raise ConfigError(f"configured file does not exist: {p}")
        if self.dem_format not in ("ascii", "hgt"):
            raise ConfigError(f"dem_format must be 'ascii' or 'hgt', got {self.dem_format!r}")
        if self.model_family not in FIT_FUNCTIONS:
            raise ConfigError(f"unknown model family {self.model_family!r}")
        if self.variant.upper() not in ("A", "B"):
            raise ConfigError(f"variant must be 'A' or 'B', got {self.variant!r}")
        if self.features is not None:
            for name in self.features:
                canonical_feature(name)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class PipelineResult:
    report: EvalReport
    risk: Raster
    screening: ScreeningReport
    model: TrainedModel
    manifest: dict


def load_dem(
    dem_paths: list[str],
    dem_format: str = "ascii",
    arc_seconds: int = 1,
    geographic: bool = False,
) -> Raster:
    """Read and (if several tiles) mosaic a DEM.

    With ``geographic`` set, an ASCII grid is reinterpreted as degree units
    and given metres/degree factors at its centre latitude (HGT tiles carry
    theirs already).
    """
    tiles = []
    for p in dem_paths:
        if dem_format == "hgt":
            tiles.append(read_hgt(p, arc_seconds))
        else:
            tiles.append(read_ascii_grid(p))
    dem = mosaic(tiles)
    if geographic and dem_format == "ascii":
        t = dem.transform
        center_lat = t.origin_y - dem.rows * t.cell_size_y / 2.0
        geo = geographic_transform(
            t.origin_x, t.origin_y, t.cell_size_x, t.cell_size_y, center_lat
        )
        dem = Raster(dem.values, geo, dem.nodata)
    return dem


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute the full chain and write all artifacts to the output directory.

    Any stage failure is re-raised as PipelineStageError naming the stage.
    """

    def stage(name, fn):
        try:
            return fn()
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc

    stage("config", config.validate)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    dem = stage(
        "ingest",
        lambda: load_dem(
            config.dem_paths, config.dem_format, config.hgt_arc_seconds, config.geographic
        ),
    )
    records, chunks = stage(
        "ingest", lambda: load_survey(config.positives_path, config.chunks_path)
    )

    tf = TerrainFeatures(
        dem,
        min_slope=config.min_slope,
        channel_threshold_cells=config.channel_threshold_cells,
        tpi_radius_m=config.tpi_radius_m,
    )
    stage("fill", lambda: tf.filled)

    if config.features is not None:
        computed_names = [canonical_feature(n) for n in config.features]
    else:
        computed_names = list(FEATURE_NAMES)
    grids = stage("features", lambda: tf.grids(computed_names))

    def _sample() -> FeatureTable:
        positives = select_positives(records, config.variant)
        negatives = generate_negatives(
            chunks,
            positives,
            dem,
            min_pos_dist=config.min_pos_dist_m,
            min_neg_dist=config.min_neg_dist_m,
            seed=config.seed_negatives,
        )
        labeled = [LabeledPoint(p, 1) for p in positives] + [
            LabeledPoint(p, 0) for p in negatives
        ]
        return extract_features(labeled, grids)

    table = stage("sample", _sample)

    screening = stage(
        "screen",
        lambda: screen_features(
            table,
            p_threshold=config.p_threshold,
            r_threshold=config.r_threshold,
            forced_features=(
                [canonical_feature(n) for n in config.features]
                if config.features is not None
                else None
            ),
        ),
    )
    selected = screening.selected
    if not selected:
        raise PipelineStageError("screen", ValueError("no feature passed screening"))

    train_table, test_table = stage(
        "split", lambda: split_by_longitude(table, config.split_percentile)
    )
    sel_idx = [table.feature_names.index(n) for n in selected]
    train_sel = FeatureTable(selected, train_table.xy, train_table.labels, train_table.features[:, sel_idx])
    test_sel = FeatureTable(selected, test_table.xy, test_table.labels, test_table.features[:, sel_idx])

    def _train() -> TrainedModel:
        fit = FIT_FUNCTIONS[config.model_family]
        params = dict(config.model_params)
        if config.model_family in ("random_forest", "extra_trees", "gradient_boosting", "linear_svm"):
            params.setdefault("seed", config.seed_model)
        return fit(train_sel, **params)

    model = stage("train", _train)

    balanced_test = stage(
        "undersample", lambda: undersample_negatives(test_sel, config.seed_undersample)
    )

    def _evaluate() -> EvalReport:
        scores = predict_proba(model, balanced_test.features)
        report = evaluate_scores(
            scores, balanced_test.labels, config.decision_threshold, seed=config.seed_undersample
        )
        return report

    report = stage("evaluate", _evaluate)

    risk = stage("predict", lambda: predict_grid(model, {n: grids[n] for n in selected}))

    def _write() -> dict:
        write_ascii_grid(tf.filled, outdir / "filled.asc")
        if config.write_grids:
            feature_dir = outdir / "features"
            feature_dir.mkdir(exist_ok=True)
            for name, g in grids.items():
                write_ascii_grid(g, feature_dir / f"{name}.asc")
        table.save(outdir / "feature_table.csv")
        (outdir / "screening.txt").write_text(screening.format())
        save_model(model, outdir / "model.json")
        (outdir / "eval.txt").write_text(report.format())
        scores = predict_proba(model, balanced_test.features)
        with (outdir / "roc.csv").open("w") as fh:
            fh.write("threshold,fpr,tpr\n")
            for thr, fpr, tpr in roc_curve_points(scores, balanced_test.labels):
                fh.write(f"{thr!r},{fpr!r},{tpr!r}\n")
        write_ascii_grid(risk, outdir / "risk.asc")
        if config.write_png:
            write_probability_png(risk, outdir / "risk.png")

        manifest = {
            "tool": "wetspot",
            "version": __version__,
            "config": config.to_dict(),
            "selected_features": selected,
            "counts": {
                "survey_records": len(records),
                "negative_chunks": len(chunks),
                "table_rows": len(table),
                "table_pos": table.n_pos,
                "table_neg": table.n_neg,
                "dropped_nodata": table.dropped_nodata,
                "dropped_outside": table.dropped_outside,
                "train_rows": len(train_sel),
                "test_rows": len(test_sel),
                "test_pos_after_undersample": balanced_test.n_pos,
                "test_neg_after_undersample": balanced_test.n_neg,
            },
            "metrics": {
                "roc_auc": report.roc_auc,
                "recall": report.recall,
                "precision": report.precision,
                "specificity": report.specificity,
                "f1": report.f1,
                "tp": report.tp,
                "fp": report.fp,
                "tn": report.tn,
                "fn": report.fn,
            },
        }
        (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return manifest

    manifest = stage("write", _write)
    return PipelineResult(report=report, risk=risk, screening=screening, model=model, manifest=manifest)
