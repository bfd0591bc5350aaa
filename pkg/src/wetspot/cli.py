"""Command-line interface.

Subcommands mirror the pipeline stages so each artifact can be produced and
inspected on its own: fill, features, sample, screen, train, evaluate,
predict, and the one-shot pipeline runner. Grids move between stages as
ESRI ASCII files; models and configs are JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import screen_features
from .evaluate import evaluate_scores, undersample_negatives
from .learn import FIT_FUNCTIONS, load_model, predict_proba, save_model
from .pipeline import (
    FEATURE_NAMES,
    PipelineConfig,
    TerrainFeatures,
    canonical_feature,
    load_dem,
    predict_grid,
    run_pipeline,
    write_probability_png,
)
from .raster import Raster, geographic_transform, read_ascii_grid, write_ascii_grid
from .sampling import (
    FeatureTable,
    LabeledPoint,
    extract_features,
    generate_negatives,
    load_survey,
    select_positives,
    split_by_longitude,
)


def _add_dem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dem", required=True, nargs="+", help="DEM tile path(s)")
    p.add_argument("--format", choices=("ascii", "hgt"), default="ascii", dest="dem_format")
    p.add_argument("--arc-seconds", type=int, choices=(1, 3), default=1)
    p.add_argument(
        "--geographic",
        action="store_true",
        help="treat ASCII grid units as degrees and attach metres/degree factors",
    )


def _load_dem(args) -> Raster:
    return load_dem(list(args.dem), args.dem_format, args.arc_seconds, args.geographic)


def _read_grid(path: Path, geographic: bool) -> Raster:
    grid = read_ascii_grid(path)
    if geographic:
        t = grid.transform
        center_lat = t.origin_y - grid.rows * t.cell_size_y / 2.0
        geo = geographic_transform(t.origin_x, t.origin_y, t.cell_size_x, t.cell_size_y, center_lat)
        grid = Raster(grid.values, geo, grid.nodata)
    return grid


def _load_feature_grids(directory: Path, names: list[str], geographic: bool) -> dict[str, Raster]:
    grids = {}
    for name in names:
        name = canonical_feature(name)
        path = directory / f"{name}.asc"
        if not path.exists():
            raise FileNotFoundError(f"feature grid not found: {path}")
        grids[name] = _read_grid(path, geographic)
    return grids


def _cmd_fill(args) -> int:
    dem = _load_dem(args)
    from .hydrology import fill_sinks

    filled = fill_sinks(dem, args.min_slope)
    write_ascii_grid(filled, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_features(args) -> int:
    dem = _load_dem(args)
    tf = TerrainFeatures(
        dem,
        min_slope=args.min_slope,
        channel_threshold_cells=args.channel_threshold,
        tpi_radius_m=args.tpi_radius,
    )
    names = args.features or list(FEATURE_NAMES)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, grid in tf.grids(names).items():
        path = outdir / f"{name}.asc"
        write_ascii_grid(grid, path)
        print(f"wrote {path}")
    return 0


def _cmd_sample(args) -> int:
    dem = _load_dem(args)
    records, chunks = load_survey(args.positives, args.chunks)
    positives = select_positives(records, args.variant)
    negatives = generate_negatives(
        chunks,
        positives,
        dem,
        min_pos_dist=args.min_pos_dist,
        min_neg_dist=args.min_neg_dist,
        seed=args.seed,
    )
    grids = _load_feature_grids(Path(args.features_dir), args.features, args.geographic)
    labeled = [LabeledPoint(p, 1) for p in positives] + [LabeledPoint(p, 0) for p in negatives]
    table = extract_features(labeled, grids)
    table.save(args.out)
    print(
        f"wrote {args.out}: {table.n_pos} positives, {table.n_neg} negatives "
        f"({table.dropped_outside} outside extent, {table.dropped_nodata} on nodata)"
    )
    return 0


def _cmd_screen(args) -> int:
    table = FeatureTable.load(args.table)
    forced = args.force_features if args.force_features else None
    report = screen_features(
        table, p_threshold=args.p_threshold, r_threshold=args.r_threshold, forced_features=forced
    )
    Path(args.out).write_text(report.format())
    print(f"wrote {args.out}")
    print(f"selected: {','.join(report.selected)}")
    return 0


def _cmd_train(args) -> int:
    table = FeatureTable.load(args.table)
    if args.features:
        idx = [table.feature_names.index(canonical_feature(n)) for n in args.features]
        table = FeatureTable(
            [table.feature_names[i] for i in idx], table.xy, table.labels, table.features[:, idx]
        )
    if args.split_percentile is not None:
        table, test = split_by_longitude(table, args.split_percentile)
        if args.test_out:
            test.save(args.test_out)
            print(f"wrote {args.test_out} ({len(test)} test rows)")

    fit = FIT_FUNCTIONS[args.family]
    kwargs: dict = {}
    if args.family in ("random_forest", "extra_trees", "gradient_boosting"):
        kwargs["n_trees"] = args.n_trees
        kwargs["seed"] = args.seed
    if args.family == "gradient_boosting":
        kwargs["depth"] = args.depth
        kwargs["learning_rate"] = args.learning_rate
    if args.family == "linear_svm":
        kwargs["seed"] = args.seed
        kwargs["l2"] = args.l2
    if args.family == "logistic":
        kwargs["l2"] = args.l2
    model = fit(table, **kwargs)
    save_model(model, args.out)
    print(f"wrote {args.out} ({args.family} on {len(table)} rows)")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    table = FeatureTable.load(args.table)
    idx = [table.feature_names.index(n) for n in model.feature_names]
    table = FeatureTable(list(model.feature_names), table.xy, table.labels, table.features[:, idx])
    if not args.no_undersample:
        table = undersample_negatives(table, args.seed)
    scores = predict_proba(model, table.features)
    report = evaluate_scores(scores, table.labels, args.threshold, seed=args.seed)
    Path(args.out).write_text(report.format())
    print(f"wrote {args.out}")
    print(report.format(), end="")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    grids = _load_feature_grids(Path(args.features_dir), list(model.feature_names), args.geographic)
    risk = predict_grid(model, grids)
    write_ascii_grid(risk, args.out)
    print(f"wrote {args.out}")
    if args.png:
        write_probability_png(risk, args.png)
        print(f"wrote {args.png}")
    return 0


def _cmd_pipeline(args) -> int:
    config = PipelineConfig.from_file(args.config)
    overrides = {
        "output_dir": args.output_dir,
        "variant": args.variant,
        "model_family": args.model_family,
        "seed_negatives": args.seed_negatives,
        "seed_model": args.seed_model,
        "seed_undersample": args.seed_undersample,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.features:
        config.features = args.features
    result = run_pipeline(config)
    print(result.report.format(), end="")
    print(f"artifacts in {config.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wetspot", description="Terrain-based stagnant-water site mapping"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fill", help="fill DEM depressions")
    _add_dem_args(p)
    p.add_argument("--min-slope", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fill)

    p = sub.add_parser("features", help="compute feature grids")
    _add_dem_args(p)
    p.add_argument("--features", nargs="*", help=f"subset of: {', '.join(FEATURE_NAMES)}")
    p.add_argument("--min-slope", type=float, default=0.01)
    p.add_argument("--channel-threshold", type=float, default=1112.0, help="cells")
    p.add_argument("--tpi-radius", type=float, default=500.0, help="metres")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("sample", help="build the labeled feature table")
    _add_dem_args(p)
    p.add_argument("--positives", required=True)
    p.add_argument("--chunks", required=True)
    p.add_argument("--variant", choices=("A", "B"), default="A")
    p.add_argument("--features-dir", required=True)
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--min-pos-dist", type=float, default=100.0, help="metres")
    p.add_argument("--min-neg-dist", type=float, default=30.0, help="metres")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("screen", help="feature screening report")
    p.add_argument("--table", required=True)
    p.add_argument("--p-threshold", type=float, default=0.05)
    p.add_argument("--r-threshold", type=float, default=0.85)
    p.add_argument("--force-features", nargs="*", help="skip thresholds, select exactly these")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_screen)

    p = sub.add_parser("train", help="fit a classifier")
    p.add_argument("--table", required=True)
    p.add_argument("--family", choices=sorted(FIT_FUNCTIONS), default="gradient_boosting")
    p.add_argument("--features", nargs="*", help="subset of table columns")
    p.add_argument("--split-percentile", type=float, help="train west of this longitude percentile")
    p.add_argument("--test-out", help="where to write the held-out rows")
    p.add_argument("--n-trees", type=int, default=200)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a table")
    p.add_argument("--model", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0, help="negative undersampling seed")
    p.add_argument("--no-undersample", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="probability risk map from feature grids")
    p.add_argument("--model", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--geographic", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--png", help="optional grayscale rendering")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("pipeline", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--variant", choices=("A", "B"))
    p.add_argument("--model-family", choices=sorted(FIT_FUNCTIONS))
    p.add_argument("--features", nargs="*")
    p.add_argument("--seed-negatives", type=int)
    p.add_argument("--seed-model", type=int)
    p.add_argument("--seed-undersample", type=int)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface clean errors, not tracebacks
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
