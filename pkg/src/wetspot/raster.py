"""Raster grid model, coordinate mapping, and file I/O for DEM tiles.

The raster model is deliberately small: a north-up, row-major grid of
float64 samples with a linear geotransform. Nodata cells are carried as
NaN in memory and mapped back to a sentinel value on disk. Rasters are
immutable after construction, so they can be shared freely between
threads and derived grids.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

# Metres per degree of latitude on a sphere of mean Earth radius; longitude
# is additionally scaled by cos(latitude) at the tile centre.
METERS_PER_DEGREE = 6371008.8 * math.pi / 180.0

SRTM_VOID = -32768

_ASCII_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")

_HGT_NAME = re.compile(r"([NS])(\d{2})([EW])(\d{3})", re.IGNORECASE)


class MalformedTileError(ValueError):
    """HGT payload size does not match the declared tile layout."""


class MissingGeoreferenceError(ValueError):
    """Tile file name does not encode a usable latitude/longitude origin."""


class GridParseError(ValueError):
    """ASCII grid header or payload cannot be parsed."""


class OutOfExtentError(ValueError):
    """Queried point lies outside the raster extent."""


class GeoPoint(NamedTuple):
    """A location in raster coordinates (longitude/easting, latitude/northing)."""

    x: float
    y: float


@dataclass(frozen=True)
class GeoTransform:
    """Linear map between (row, col) cell indices and world coordinates.

    ``origin_x``/``origin_y`` locate the west/north edge of cell (0, 0);
    cell sizes are positive, with ``cell_size_y`` applied southward. For
    geographic rasters ``meters_per_unit_x``/``_y`` carry the metre length
    of one coordinate unit at the grid centre, so that metric thresholds
    (channel distances, TPI radii, sampling constraints) can be evaluated
    in metres regardless of the underlying units.
    """

    origin_x: float
    origin_y: float
    cell_size_x: float
    cell_size_y: float
    meters_per_unit_x: float = 1.0
    meters_per_unit_y: float = 1.0

    def __post_init__(self):
        if not (self.cell_size_x > 0.0 and self.cell_size_y > 0.0):
            raise ValueError("cell sizes must be positive")
        if not (self.meters_per_unit_x > 0.0 and self.meters_per_unit_y > 0.0):
            raise ValueError("metric conversion factors must be positive")

    @property
    def metric_cell_x(self) -> float:
        """Cell width in metres."""
        return self.cell_size_x * self.meters_per_unit_x

    @property
    def metric_cell_y(self) -> float:
        """Cell height in metres."""
        return self.cell_size_y * self.meters_per_unit_y


class Raster:
    """A north-up, row-major grid of float64 values with a geotransform.

    Nodata cells are NaN in ``values``; ``nodata`` is only the sentinel
    written to (and recognised in) files. The value array is frozen on
    construction.
    """

    __slots__ = ("values", "transform", "nodata")

    def __init__(self, values: np.ndarray, transform: GeoTransform, nodata: float = -9999.0):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"raster values must be 2-D, got shape {values.shape}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "transform", transform)
        object.__setattr__(self, "nodata", float(nodata))

    def __setattr__(self, name, value):
        raise AttributeError("Raster is immutable")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        """Boolean mask of cells holding a real sample."""
        return np.isfinite(self.values)

    def with_values(self, values: np.ndarray) -> "Raster":
        """New raster with the same geometry but different cell values."""
        if np.shape(values) != self.values.shape:
            raise ValueError(
                f"replacement values have shape {np.shape(values)}, expected {self.values.shape}"
            )
        return Raster(values, self.transform, self.nodata)

    def same_grid(self, other: "Raster") -> bool:
        return self.values.shape == other.values.shape and self.transform == other.transform

    def __repr__(self) -> str:
        t = self.transform
        return (
            f"Raster({self.rows}x{self.cols}, origin=({t.origin_x}, {t.origin_y}), "
            f"cell=({t.cell_size_x}, {t.cell_size_y}))"
        )


def require_same_grid(a: Raster, b: Raster, what: str = "rasters") -> None:
    """Raise ValueError unless two rasters share shape and transform."""
    if not a.same_grid(b):
        raise ValueError(
            f"{what} must share shape and transform: "
            f"{a.values.shape} vs {b.values.shape}"
        )


def cell_center(raster: Raster, row: int, col: int) -> GeoPoint:
    """World coordinates of the centre of cell (row, col).

    Raises IndexError for out-of-bounds indices.
    """
    if not (0 <= row < raster.rows and 0 <= col < raster.cols):
        raise IndexError(f"cell ({row}, {col}) outside {raster.rows}x{raster.cols} raster")
    t = raster.transform
    x = t.origin_x + (col + 0.5) * t.cell_size_x
    y = t.origin_y - (row + 0.5) * t.cell_size_y
    return GeoPoint(x, y)


def locate(raster: Raster, point: GeoPoint) -> tuple[int, int]:
    """Cell index containing a point (floor mapping; west/north edges inclusive)."""
    t = raster.transform
    col = math.floor((point.x - t.origin_x) / t.cell_size_x)
    row = math.floor((t.origin_y - point.y) / t.cell_size_y)
    if not (0 <= row < raster.rows and 0 <= col < raster.cols):
        raise OutOfExtentError(f"point ({point.x}, {point.y}) outside raster extent")
    return row, col


def geographic_transform(
    origin_x: float,
    origin_y: float,
    cell_size_x: float,
    cell_size_y: float,
    center_latitude: float | None = None,
) -> GeoTransform:
    """GeoTransform for a degree-unit raster with metre factors at its centre.

    If ``center_latitude`` is omitted it is derived from the origin, assuming
    the grid is small enough that its centre latitude is representative.
    """
    if center_latitude is None:
        center_latitude = origin_y
    mpx = METERS_PER_DEGREE * math.cos(math.radians(center_latitude))
    return GeoTransform(origin_x, origin_y, cell_size_x, cell_size_y, mpx, METERS_PER_DEGREE)


def read_hgt(path: str | Path, arc_seconds: int = 1) -> Raster:
    """Read an SRTM .hgt tile (big-endian int16, row-major from the NW corner).

    The tile name must carry the S/N latitude and W/E longitude of its
    south-west corner (e.g. ``N06W002.hgt``). Samples are node-registered:
    cell (0, 0) is centred on the tile's north-west graticule node, so the
    geotransform origin sits half a cell outside it. Void samples (-32768)
    become nodata.

    Args:
        path: tile location; the stem must match the naming convention.
        arc_seconds: 1 (3601x3601 samples) or 3 (1201x1201 samples).

    Raises:
        MalformedTileError: file size does not match the declared resolution.
        MissingGeoreferenceError: tile name cannot be parsed.
    """
    if arc_seconds == 1:
        n = 3601
    elif arc_seconds == 3:
        n = 1201
    else:
        raise ValueError(f"arc_seconds must be 1 or 3, got {arc_seconds}")
    path = Path(path)

    m = _HGT_NAME.search(path.stem)
    if m is None:
        raise MissingGeoreferenceError(
            f"cannot derive a georeference from tile name {path.name!r}"
        )
    lat = int(m.group(2)) * (1 if m.group(1).upper() == "N" else -1)
    lon = int(m.group(4)) * (1 if m.group(3).upper() == "E" else -1)

    raw = path.read_bytes()
    if len(raw) != 2 * n * n:
        raise MalformedTileError(
            f"{path.name}: expected {2 * n * n} bytes for {n}x{n} tile, got {len(raw)}"
        )
    samples = np.frombuffer(raw, dtype=">i2").reshape(n, n).astype(np.float64)
    samples[samples == SRTM_VOID] = np.nan

    cell = 1.0 / (n - 1)
    transform = geographic_transform(
        origin_x=lon - cell / 2.0,
        origin_y=(lat + 1) + cell / 2.0,
        cell_size_x=cell,
        cell_size_y=cell,
        center_latitude=lat + 0.5,
    )
    return Raster(samples, transform, nodata=float(SRTM_VOID))


def read_ascii_grid(path: str | Path) -> Raster:
    """Read an ESRI ASCII grid.

    The header must declare ncols, nrows, xllcorner, yllcorner, cellsize and
    NODATA_value (any order, case-insensitive); values follow row-major,
    north to south. Sentinel-valued cells become nodata.

    Raises:
        GridParseError: missing header key, malformed number, or a value
            count that does not match the declared dimensions.
    """
    path = Path(path)
    header: dict[str, float] = {}
    data_start = 0
    with path.open("r") as fh:
        lines = fh.readlines()
    for i, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in _ASCII_HEADER_KEYS:
            try:
                header[parts[0].lower()] = float(parts[1])
            except ValueError as exc:
                raise GridParseError(f"{path.name}: bad header value in {line.strip()!r}") from exc
            data_start = i + 1
        else:
            break
    for key in _ASCII_HEADER_KEYS:
        if key not in header:
            raise GridParseError(f"{path.name}: missing header key {key!r}")

    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols <= 0 or nrows <= 0:
        raise GridParseError(f"{path.name}: non-positive grid dimensions")
    tokens = "".join(lines[data_start:]).split()
    if len(tokens) != nrows * ncols:
        raise GridParseError(
            f"{path.name}: expected {nrows * ncols} values, found {len(tokens)}"
        )
    try:
        values = np.array(tokens, dtype=np.float64).reshape(nrows, ncols)
    except ValueError as exc:
        raise GridParseError(f"{path.name}: non-numeric cell value") from exc

    nodata = header["nodata_value"]
    values[values == nodata] = np.nan
    cell = header["cellsize"]
    if cell <= 0:
        raise GridParseError(f"{path.name}: cellsize must be positive")
    transform = GeoTransform(
        origin_x=header["xllcorner"],
        origin_y=header["yllcorner"] + nrows * cell,
        cell_size_x=cell,
        cell_size_y=cell,
    )
    return Raster(values, transform, nodata=nodata)


def write_ascii_grid(raster: Raster, path: str | Path) -> None:
    """Write a raster as an ESRI ASCII grid.

    Values are written with full round-trip precision (``repr``), so
    ``read_ascii_grid`` recovers them exactly; nodata cells are written as
    the raster's sentinel. The format carries a single cellsize, therefore
    square cells are required; the metric conversion factors are not stored.
    """
    if raster.rows == 0 or raster.cols == 0:
        raise ValueError("cannot write an empty raster")
    t = raster.transform
    if not math.isclose(t.cell_size_x, t.cell_size_y, rel_tol=1e-12):
        raise ValueError("ASCII grid requires square cells")
    path = Path(path)
    sentinel = repr(raster.nodata)
    with path.open("w") as fh:
        fh.write(f"ncols {raster.cols}\n")
        fh.write(f"nrows {raster.rows}\n")
        fh.write(f"xllcorner {t.origin_x!r}\n")
        fh.write(f"yllcorner {t.origin_y - raster.rows * t.cell_size_y!r}\n")
        fh.write(f"cellsize {t.cell_size_x!r}\n")
        fh.write(f"NODATA_value {sentinel}\n")
        for row in raster.values:
            fh.write(
                " ".join(sentinel if not math.isfinite(v) else repr(float(v)) for v in row)
            )
            fh.write("\n")


def mosaic(tiles: list[Raster]) -> Raster:
    """Concatenate edge-abutting tiles that share cell size and grid alignment.

    Later tiles overwrite earlier ones where they overlap (SRTM neighbours
    share an edge row/column); uncovered cells are nodata. Anything beyond
    this simple pasting (resampling, reprojection) is out of scope.
    """
    if not tiles:
        raise ValueError("no tiles to mosaic")
    if len(tiles) == 1:
        return tiles[0]
    ref = tiles[0].transform
    for t in tiles[1:]:
        tt = t.transform
        if not (
            math.isclose(tt.cell_size_x, ref.cell_size_x, rel_tol=1e-12)
            and math.isclose(tt.cell_size_y, ref.cell_size_y, rel_tol=1e-12)
        ):
            raise ValueError("mosaic tiles must share cell size")

    def _offset(t: GeoTransform) -> tuple[int, int]:
        dc = (t.origin_x - ref.origin_x) / ref.cell_size_x
        dr = (ref.origin_y - t.origin_y) / ref.cell_size_y
        if abs(dc - round(dc)) > 1e-6 or abs(dr - round(dr)) > 1e-6:
            raise ValueError("mosaic tiles must be aligned to a common grid")
        return int(round(dr)), int(round(dc))

    offsets = [_offset(t.transform) for t in tiles]
    r0 = min(o[0] for o in offsets)
    c0 = min(o[1] for o in offsets)
    r1 = max(o[0] + t.rows for o, t in zip(offsets, tiles))
    c1 = max(o[1] + t.cols for o, t in zip(offsets, tiles))
    canvas = np.full((r1 - r0, c1 - c0), np.nan)
    for (dr, dc), tile in zip(offsets, tiles):
        canvas[dr - r0 : dr - r0 + tile.rows, dc - c0 : dc - c0 + tile.cols] = tile.values
    transform = GeoTransform(
        origin_x=ref.origin_x + c0 * ref.cell_size_x,
        origin_y=ref.origin_y - r0 * ref.cell_size_y,
        cell_size_x=ref.cell_size_x,
        cell_size_y=ref.cell_size_y,
        meters_per_unit_x=ref.meters_per_unit_x,
        meters_per_unit_y=ref.meters_per_unit_y,
    )
    return Raster(canvas, transform, nodata=tiles[0].nodata)
