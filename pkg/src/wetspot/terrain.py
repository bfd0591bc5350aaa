"""Windowed surface derivatives: slope, aspect, curvatures, TPI, CI, TWI.

Derivatives come from central differences on the 3x3 window
(Zevenbergen-Thorne stencil), which are exact for quadratic surfaces. Cells
whose window is incomplete (grid edge or nodata neighbor) are masked.

Sign conventions, pinned by the tests:
  * aspect is the compass bearing of the downslope direction, degrees
    clockwise from north in [0, 360); flat cells have no aspect.
  * plan curvature is positive where contour lines are concave (bowls,
    convergent flow) and negative on domes.
  * profile curvature is negative where the surface is concave upward
    along the slope line (foot slopes) and positive on convex breaks.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .raster import Raster, require_same_grid

# Slope tangent floor used by the wetness index so flat cells stay finite.
TWI_TAN_FLOOR = 1e-3

DEFAULT_TPI_RADIUS_M = 500.0


class SurfaceFit(NamedTuple):
    """First and second partial derivatives of elevation at one cell.

    p, q are d z/d x (east) and d z/d y (north); r, s, t are the second
    derivatives d2z/dx2, d2z/dxdy, d2z/dy2, all per metre.
    """

    p: float
    q: float
    r: float
    s: float
    t: float


def surface_fit(dem: Raster, row: int, col: int) -> SurfaceFit:
    """Central-difference derivatives at one cell.

    Returns all-NaN when the 3x3 window leaves the grid or touches nodata.
    """
    z = dem.values
    if not (1 <= row < dem.rows - 1 and 1 <= col < dem.cols - 1):
        return SurfaceFit(math.nan, math.nan, math.nan, math.nan, math.nan)
    win = z[row - 1 : row + 2, col - 1 : col + 2]
    if not np.all(np.isfinite(win)):
        return SurfaceFit(math.nan, math.nan, math.nan, math.nan, math.nan)
    t = dem.transform
    dx, dy = t.metric_cell_x, t.metric_cell_y
    zc = z[row, col]
    z_n, z_s = z[row - 1, col], z[row + 1, col]
    z_e, z_w = z[row, col + 1], z[row, col - 1]
    z_ne, z_nw = z[row - 1, col + 1], z[row - 1, col - 1]
    z_se, z_sw = z[row + 1, col + 1], z[row + 1, col - 1]
    return SurfaceFit(
        p=(z_e - z_w) / (2.0 * dx),
        q=(z_n - z_s) / (2.0 * dy),
        r=(z_e - 2.0 * zc + z_w) / (dx * dx),
        s=(z_ne - z_nw - z_se + z_sw) / (4.0 * dx * dy),
        t=(z_n - 2.0 * zc + z_s) / (dy * dy),
    )


def _shift(values: np.ndarray, dr: int, dc: int) -> np.ndarray:
    out = np.full_like(values, np.nan)
    rows, cols = values.shape
    rs = slice(max(dr, 0), rows + min(dr, 0))
    cs = slice(max(dc, 0), cols + min(dc, 0))
    rd = slice(max(-dr, 0), rows + min(-dr, 0))
    cd = slice(max(-dc, 0), cols + min(-dc, 0))
    out[rd, cd] = values[rs, cs]
    return out


def _derivative_grids(dem: Raster) -> tuple[np.ndarray, ...]:
    """(p, q, r, s, t) arrays; NaN wherever the 3x3 window is incomplete."""
    z = dem.values
    t = dem.transform
    dx, dy = t.metric_cell_x, t.metric_cell_y
    z_n, z_s = _shift(z, -1, 0), _shift(z, 1, 0)
    z_e, z_w = _shift(z, 0, 1), _shift(z, 0, -1)
    z_ne, z_nw = _shift(z, -1, 1), _shift(z, -1, -1)
    z_se, z_sw = _shift(z, 1, 1), _shift(z, 1, -1)

    p = (z_e - z_w) / (2.0 * dx)
    q = (z_n - z_s) / (2.0 * dy)
    r = (z_e - 2.0 * z + z_w) / (dx * dx)
    s = (z_ne - z_nw - z_se + z_sw) / (4.0 * dx * dy)
    tt = (z_n - 2.0 * z + z_s) / (dy * dy)

    ok = np.isfinite(z)
    for arr in (z_n, z_s, z_e, z_w, z_ne, z_nw, z_se, z_sw):
        ok &= np.isfinite(arr)
    for arr in (p, q, r, s, tt):
        arr[~ok] = np.nan
    return p, q, r, s, tt


def slope(dem: Raster) -> Raster:
    """Slope angle in radians, atan of the gradient magnitude."""
    p, q, *_ = _derivative_grids(dem)
    return dem.with_values(np.arctan(np.hypot(p, q)))


def aspect(dem: Raster) -> Raster:
    """Downslope compass bearing, degrees clockwise from north in [0, 360).

    Flat cells (zero gradient) carry nodata.
    """
    p, q, *_ = _derivative_grids(dem)
    flat = (p == 0.0) & (q == 0.0)
    with np.errstate(invalid="ignore"):
        deg = np.degrees(np.arctan2(-p, -q)) % 360.0
    deg[flat] = np.nan
    return dem.with_values(deg)


def plan_curvature(dem: Raster) -> Raster:
    """Contour-line curvature; positive where contours are concave (bowls)."""
    p, q, r, s, t = _derivative_grids(dem)
    g2 = p * p + q * q
    with np.errstate(invalid="ignore", divide="ignore"):
        k = (q * q * r - 2.0 * p * q * s + p * p * t) / np.power(g2, 1.5)
    k[g2 == 0.0] = 0.0
    return dem.with_values(k)


def profile_curvature(dem: Raster) -> Raster:
    """Surface curvature along the steepest-slope line.

    Negative where the profile is concave upward; zero on flats.
    """
    p, q, r, s, t = _derivative_grids(dem)
    g2 = p * p + q * q
    with np.errstate(invalid="ignore", divide="ignore"):
        k = -(p * p * r + 2.0 * p * q * s + q * q * t) / (g2 * np.power(1.0 + g2, 1.5))
    k[g2 == 0.0] = 0.0
    return dem.with_values(k)


def _disk_offsets(dx: float, dy: float, radius_m: float) -> list[tuple[int, int]]:
    """Offsets whose centre distance is in (0, radius]; canonical d2 form."""
    r2 = radius_m * radius_m
    sx2, sy2 = dx * dx, dy * dy
    max_di = int(radius_m // dy)
    max_dj = int(radius_m // dx)
    out = []
    for di in range(-max_di, max_di + 1):
        for dj in range(-max_dj, max_dj + 1):
            if di == 0 and dj == 0:
                continue
            if (di * di) * sy2 + (dj * dj) * sx2 <= r2:
                out.append((di, dj))
    return out


def tpi(dem: Raster, radius_m: float = DEFAULT_TPI_RADIUS_M) -> Raster:
    """Topographic position index: elevation minus the mean within a radius.

    The neighborhood is the open-centred metric disk of cell centres within
    ``radius_m``. Computed as the mean of (centre - neighbor) differences,
    so constant rasters give exactly zero. Cells with no neighbor in range
    (or nodata centres) are masked.

    Raises:
        ValueError: radius smaller than one cell.
    """
    t = dem.transform
    dx, dy = t.metric_cell_x, t.metric_cell_y
    if radius_m < min(dx, dy):
        raise ValueError(f"TPI radius {radius_m} m is below the cell size")
    z = dem.values
    total = np.zeros_like(z)
    count = np.zeros_like(z)
    for di, dj in _disk_offsets(dx, dy, radius_m):
        zn = _shift(z, di, dj)
        ok = np.isfinite(zn)
        np.add(total, np.where(ok, z - zn, 0.0), out=total)
        count += ok
    with np.errstate(invalid="ignore", divide="ignore"):
        out = total / count
    out[(count == 0) | ~np.isfinite(z)] = np.nan
    return dem.with_values(out)


def convergence_index(aspect_raster: Raster) -> Raster:
    """Angular convergence of the eight neighboring aspects, in [-100, 100].

    For each neighbor with a defined aspect, the deviation between its
    aspect and the bearing from that neighbor toward the centre cell is
    folded into [0, 180]; the index maps a mean deviation of 90 degrees to
    0, full convergence to -100 and full divergence to +100. Cells with
    fewer than two usable neighbors are masked.
    """
    a = aspect_raster.values
    t = aspect_raster.transform
    dx, dy = t.metric_cell_x, t.metric_cell_y
    total = np.zeros_like(a)
    count = np.zeros_like(a)
    for di, dj in ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)):
        # Bearing from the neighbor back to the centre cell.
        east, north = -dj * dx, di * dy
        bearing = math.degrees(math.atan2(east, north)) % 360.0
        an = _shift(a, di, dj)
        ok = np.isfinite(an)
        diff = np.abs(an - bearing) % 360.0
        theta = np.minimum(diff, 360.0 - diff)
        np.add(total, np.where(ok, theta, 0.0), out=total)
        count += ok
    with np.errstate(invalid="ignore", divide="ignore"):
        ci = (total / count - 90.0) * (100.0 / 90.0)
    ci[count < 2] = np.nan
    return aspect_raster.with_values(ci)


def twi(acc: Raster, slope_raster: Raster) -> Raster:
    """Topographic wetness index, ln(specific catchment area / tan slope).

    The specific catchment area is contributing cells times the metric cell
    size (geometric mean for rectangular cells); the slope tangent is
    floored at TWI_TAN_FLOOR so flat cells stay finite.
    """
    require_same_grid(acc, slope_raster, "accumulation and slope rasters")
    t = acc.transform
    cell = math.sqrt(t.metric_cell_x * t.metric_cell_y)
    area = acc.values * cell
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.log(area / np.maximum(np.tan(slope_raster.values), TWI_TAN_FLOOR))
    return acc.with_values(out)
