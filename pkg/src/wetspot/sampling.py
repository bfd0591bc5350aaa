"""Survey ingestion, dataset construction, and feature extraction at points.

Positive water-site points come from a delimited survey file; negatives are
generated from surveyed-negative chunk rectangles under metric distance
constraints (defaults: 100 m from any positive, 30 m between negatives).
Feature vectors are sampled from co-registered rasters, and the train/test
split cuts on a longitude percentile.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .raster import GeoPoint, OutOfExtentError, Raster, locate, require_same_grid

CATEGORIES = frozenset(
    {
        "tracks",
        "swamp",
        "puddle",
        "pool",
        "pond",
        "fringe",
        "footprint",
        "construction",
        "drainage_canal",
        "other",
    }
)

# Category subsets backing the two dataset variants: A keeps natural water
# formations, B adds the man-made sources that still track topography.
NATURAL_CATEGORIES = frozenset({"swamp", "puddle", "pool", "pond", "fringe"})
VARIANT_B_EXTRAS = frozenset({"drainage_canal", "tracks", "footprint"})

DEFAULT_MIN_POS_DIST_M = 100.0
DEFAULT_MIN_NEG_DIST_M = 30.0


class SurveyParseError(ValueError):
    """A survey file row could not be parsed."""


@dataclass(frozen=True)
class SurveyRecord:
    """One surveyed water site with its field category."""

    point: GeoPoint
    category: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown survey category {self.category!r}")


@dataclass(frozen=True)
class ChunkRecord:
    """A surveyed-negative rectangle in raster coordinates (nominally 100 m square)."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise ValueError("chunk rectangle must have positive extent")


@dataclass(frozen=True)
class LabeledPoint:
    point: GeoPoint
    label: int  # 1 = positive (water found), 0 = negative

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass
class FeatureTable:
    """Points with labels and feature vectors aligned to feature_names."""

    feature_names: list[str]
    xy: np.ndarray  # (n, 2) point coordinates
    labels: np.ndarray  # (n,) int, 1 = positive
    features: np.ndarray  # (n, len(feature_names))
    dropped_nodata: int = 0
    dropped_outside: int = 0

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=np.float64).reshape(-1, 2)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.features = np.asarray(self.features, dtype=np.float64).reshape(
            len(self.labels), len(self.feature_names)
        )
        if len(self.xy) != len(self.labels):
            raise ValueError("coordinate and label counts differ")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_pos(self) -> int:
        return int((self.labels == 1).sum())

    @property
    def n_neg(self) -> int:
        return int((self.labels == 0).sum())

    def subset(self, idx: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            list(self.feature_names), self.xy[idx], self.labels[idx], self.features[idx]
        )

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.feature_names.index(name)]

    def save(self, path: str | Path) -> None:
        """Write as delimited text with header x,y,label,<features...>."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "label", *self.feature_names])
            for (x, y), lab, row in zip(self.xy, self.labels, self.features):
                writer.writerow([repr(float(x)), repr(float(y)), int(lab), *(repr(float(v)) for v in row)])

    @classmethod
    def load(cls, path: str | Path) -> "FeatureTable":
        path = Path(path)
        with path.open("r", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:3] != ["x", "y", "label"]:
                raise SurveyParseError(f"{path.name}: expected header x,y,label,<features>")
            names = header[3:]
            xy, labels, feats = [], [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3 + len(names):
                    raise SurveyParseError(f"{path.name}: wrong column count on line {lineno}")
                try:
                    xy.append((float(row[0]), float(row[1])))
                    labels.append(int(row[2]))
                    feats.append([float(v) for v in row[3:]])
                except ValueError as exc:
                    raise SurveyParseError(f"{path.name}: bad value on line {lineno}") from exc
        return cls(names, np.array(xy, dtype=np.float64).reshape(-1, 2),
                   np.array(labels, dtype=np.int64),
                   np.array(feats, dtype=np.float64).reshape(len(labels), len(names)))


def load_survey(
    positives_path: str | Path, chunks_path: str | Path
) -> tuple[list[SurveyRecord], list[ChunkRecord]]:
    """Read the positive-sites file (x,y,category) and negative-chunk file.

    Raises:
        SurveyParseError: malformed row or unknown category, with the
            offending line number.
    """
    records: list[SurveyRecord] = []
    positives_path = Path(positives_path)
    with positives_path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["x", "y", "category"]:
            raise SurveyParseError(f"{positives_path.name}: expected header x,y,category")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SurveyParseError(f"{positives_path.name}: wrong column count on line {lineno}")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError as exc:
                raise SurveyParseError(
                    f"{positives_path.name}: bad coordinate on line {lineno}"
                ) from exc
            category = row[2].strip()
            if category not in CATEGORIES:
                raise SurveyParseError(
                    f"{positives_path.name}: unknown category {category!r} on line {lineno}"
                )
            records.append(SurveyRecord(GeoPoint(x, y), category))

    chunks: list[ChunkRecord] = []
    chunks_path = Path(chunks_path)
    with chunks_path.open("r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["min_x", "min_y", "max_x", "max_y"]
        if header is None or [h.strip().lower() for h in header] != expected:
            raise SurveyParseError(f"{chunks_path.name}: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise SurveyParseError(f"{chunks_path.name}: wrong column count on line {lineno}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise SurveyParseError(f"{chunks_path.name}: bad value on line {lineno}") from exc
            try:
                chunks.append(ChunkRecord(*vals))
            except ValueError as exc:
                raise SurveyParseError(f"{chunks_path.name}: line {lineno}: {exc}") from exc
    return records, chunks


def select_positives(records: list[SurveyRecord], variant: str) -> list[GeoPoint]:
    """Positive points for dataset variant A (natural) or B (A plus
    drainage canals, tracks and footprints). Construction and other sites
    are never kept."""
    variant = variant.upper()
    if variant == "A":
        keep = NATURAL_CATEGORIES
    elif variant == "B":
        keep = NATURAL_CATEGORIES | VARIANT_B_EXTRAS
    else:
        raise ValueError(f"variant must be 'A' or 'B', got {variant!r}")
    return [rec.point for rec in records if rec.category in keep]


def _metric_xy(points: np.ndarray, mpux: float, mpuy: float) -> np.ndarray:
    scaled = np.array(points, dtype=np.float64).reshape(-1, 2)
    scaled[:, 0] *= mpux
    scaled[:, 1] *= mpuy
    return scaled


def generate_negatives(
    chunks: list[ChunkRecord],
    positive_points: list[GeoPoint],
    dem: Raster,
    min_pos_dist: float = DEFAULT_MIN_POS_DIST_M,
    min_neg_dist: float = DEFAULT_MIN_NEG_DIST_M,
    seed: int = 0,
) -> list[GeoPoint]:
    """Negative sample points from surveyed-negative chunks.

    Candidates are the DEM cell centres falling inside any chunk rectangle.
    They are visited in a seeded-shuffle order and accepted greedily when at
    least ``min_pos_dist`` metres from every positive point and
    ``min_neg_dist`` metres from every already accepted negative.

    Args:
        chunks: nonempty list of negative chunk rectangles.
        positive_points: surveyed positives to keep distance from.
        dem: grid supplying the candidate cell centres and metric factors.
        min_pos_dist: metres; minimum distance to any positive.
        min_neg_dist: metres; minimum spacing between accepted negatives.
        seed: shuffle seed; the same seed reproduces the same set.
    """
    if not chunks:
        raise ValueError("no negative chunks given")
    t = dem.transform

    candidate_cells: set[tuple[int, int]] = set()
    for chunk in chunks:
        # Smallest/largest rows and cols whose centres fall inside the box.
        c_lo = math.ceil((chunk.min_x - t.origin_x) / t.cell_size_x - 0.5)
        c_hi = math.floor((chunk.max_x - t.origin_x) / t.cell_size_x - 0.5)
        r_lo = math.ceil((t.origin_y - chunk.max_y) / t.cell_size_y - 0.5)
        r_hi = math.floor((t.origin_y - chunk.min_y) / t.cell_size_y - 0.5)
        for r in range(max(r_lo, 0), min(r_hi, dem.rows - 1) + 1):
            for c in range(max(c_lo, 0), min(c_hi, dem.cols - 1) + 1):
                candidate_cells.add((r, c))

    cells = sorted(candidate_cells)
    if not cells:
        return []
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(cells))

    centers = np.array(
        [
            (t.origin_x + (c + 0.5) * t.cell_size_x, t.origin_y - (r + 0.5) * t.cell_size_y)
            for r, c in cells
        ]
    )
    metric = _metric_xy(centers, t.meters_per_unit_x, t.meters_per_unit_y)

    pos_tree = None
    if positive_points:
        pos_metric = _metric_xy(np.array(positive_points), t.meters_per_unit_x, t.meters_per_unit_y)
        pos_tree = cKDTree(pos_metric)

    # Accepted negatives live in a coarse spatial hash so each candidate only
    # checks nearby bins.
    bin_size = min_neg_dist
    bins: dict[tuple[int, int], list[int]] = {}
    accepted: list[int] = []

    for k in order:
        mx, my = metric[k]
        if pos_tree is not None:
            d, _ = pos_tree.query((mx, my), k=1)
            if d < min_pos_dist:
                continue
        bx, by = int(mx // bin_size), int(my // bin_size)
        ok = True
        for nx in range(bx - 1, bx + 2):
            for ny in range(by - 1, by + 2):
                for j in bins.get((nx, ny), ()):
                    if math.hypot(mx - metric[j, 0], my - metric[j, 1]) < min_neg_dist:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            accepted.append(k)
            bins.setdefault((bx, by), []).append(k)

    return [GeoPoint(centers[k, 0], centers[k, 1]) for k in accepted]


def extract_features(
    points: list[LabeledPoint], named_rasters: dict[str, Raster]
) -> FeatureTable:
    """Sample each named raster at each point's cell.

    Points outside the extent, and points whose cell is nodata in any
    feature raster, are dropped (counted on the returned table).

    Raises:
        ValueError: rasters disagree on shape/transform, or no row survives.
    """
    if not named_rasters:
        raise ValueError("no feature rasters given")
    names = list(named_rasters)
    rasters = [named_rasters[n] for n in names]
    for other in rasters[1:]:
        require_same_grid(rasters[0], other, "feature rasters")

    xy, labels, rows = [], [], []
    dropped_outside = 0
    dropped_nodata = 0
    for lp in points:
        try:
            r, c = locate(rasters[0], lp.point)
        except OutOfExtentError:
            dropped_outside += 1
            continue
        vec = [ras.values[r, c] for ras in rasters]
        if not all(math.isfinite(v) for v in vec):
            dropped_nodata += 1
            continue
        xy.append((lp.point.x, lp.point.y))
        labels.append(lp.label)
        rows.append(vec)

    if not rows:
        raise ValueError(
            f"no usable rows: {dropped_outside} outside extent, {dropped_nodata} on nodata"
        )
    return FeatureTable(
        names,
        np.array(xy, dtype=np.float64),
        np.array(labels, dtype=np.int64),
        np.array(rows, dtype=np.float64),
        dropped_nodata=dropped_nodata,
        dropped_outside=dropped_outside,
    )


def split_by_longitude(table: FeatureTable, percentile: float = 80.0) -> tuple[FeatureTable, FeatureTable]:
    """Spatial train/test split at a longitude percentile.

    The threshold is the nearest-rank percentile of the x coordinates; rows
    west of it (x < threshold) train, the rest test.

    Raises:
        ValueError: empty table, or a degenerate split (e.g. all x equal).
    """
    if len(table) == 0:
        raise ValueError("cannot split an empty table")
    if not (0.0 < percentile < 100.0):
        raise ValueError("percentile must be in (0, 100)")
    xs = np.sort(table.xy[:, 0])
    rank = math.ceil(percentile / 100.0 * len(xs))  # 1-based nearest rank
    threshold = xs[rank - 1]
    west = table.xy[:, 0] < threshold
    if not west.any() or west.all():
        raise ValueError("degenerate longitude split: one side is empty")
    return table.subset(np.nonzero(west)[0]), table.subset(np.nonzero(~west)[0])
