"""Hydrological conditioning and flow routing.

Depression filling (priority flood with an optional epsilon gradient), D8
flow direction and accumulation, channel/ridge extraction, multi-source
Euclidean distances, and the channel-relative altitude measures AACL, ABRL
and relative slope position.

All functions are pure raster-to-raster maps over immutable inputs. The
distance computations are exact: every candidate squared distance is formed
as ``di*di*sy2 + dj*dj*sx2`` with precomputed squared metric cell sizes, so
results match a brute-force minimisation bit for bit.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

from .raster import Raster, require_same_grid

# D8 codes 1..8 = E, SE, S, SW, W, NW, N, NE, as (row, col) offsets.
D8_CODES = (1, 2, 3, 4, 5, 6, 7, 8)
D8_OFFSETS = {
    1: (0, 1),
    2: (1, 1),
    3: (1, 0),
    4: (1, -1),
    5: (0, -1),
    6: (-1, -1),
    7: (-1, 0),
    8: (-1, 1),
}

DEFAULT_MIN_SLOPE = 0.01
# 1 km^2 of contributing area in 30 m cells.
DEFAULT_CHANNEL_THRESHOLD_CELLS = 1112

_SQRT2 = math.sqrt(2.0)


class EmptyMaskError(ValueError):
    """A mask-consuming operation received a mask with no marked cells."""


class FlowCycleError(RuntimeError):
    """Flow directions contain a cycle, which a filled DEM cannot produce."""


def _neighbors(rows: int, cols: int, r: int, c: int):
    for code, (dr, dc) in D8_OFFSETS.items():
        nr, nc = r + dr, c + dc
        if 0 <= nr < rows and 0 <= nc < cols:
            yield code, nr, nc


def fill_sinks(dem: Raster, min_slope: float = DEFAULT_MIN_SLOPE) -> Raster:
    """Raise interior depressions until every cell drains off the grid.

    Priority-flood filling: cells on the raster boundary or adjacent to
    nodata act as outlets at their own elevation; every other cell is raised
    to the minimal level from which a descending D8 path to an outlet
    exists. With ``min_slope`` > 0 the path must drop by at least
    ``min_slope`` per cardinal step (sqrt(2) times that per diagonal step),
    which leaves no flat cells behind.

    Args:
        dem: elevation raster with at least one data cell.
        min_slope: enforced elevation drop per unit cell step, >= 0.

    Returns:
        Conditioned elevation raster, >= the input everywhere.
    """
    if min_slope < 0:
        raise ValueError("min_slope must be >= 0")
    z = dem.values
    valid = np.isfinite(z)
    if not valid.any():
        raise ValueError("cannot fill a raster with no data cells")
    rows, cols = z.shape

    border = np.zeros_like(valid)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    # A cell next to nodata spills into the void, so it seeds at its own level.
    near_nodata = np.zeros_like(valid)
    inv = ~valid
    near_nodata[:-1, :] |= inv[1:, :]
    near_nodata[1:, :] |= inv[:-1, :]
    near_nodata[:, :-1] |= inv[:, 1:]
    near_nodata[:, 1:] |= inv[:, :-1]
    near_nodata[:-1, :-1] |= inv[1:, 1:]
    near_nodata[:-1, 1:] |= inv[1:, :-1]
    near_nodata[1:, :-1] |= inv[:-1, 1:]
    near_nodata[1:, 1:] |= inv[:-1, :-1]
    seeds = valid & (border | near_nodata)

    filled = np.where(valid, np.inf, np.nan)
    done = np.zeros_like(valid)
    heap: list[tuple[float, int, int]] = []
    for r, c in zip(*np.nonzero(seeds)):
        filled[r, c] = z[r, c]
        heapq.heappush(heap, (z[r, c], int(r), int(c)))

    while heap:
        level, r, c = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        for code, nr, nc in _neighbors(rows, cols, r, c):
            if not valid[nr, nc] or done[nr, nc]:
                continue
            step = _SQRT2 if code % 2 == 0 else 1.0
            cand = max(z[nr, nc], level + min_slope * step)
            if cand < filled[nr, nc]:
                filled[nr, nc] = cand
                heapq.heappush(heap, (cand, nr, nc))

    return dem.with_values(filled)


def closed_depressions(dem: Raster, filled: Raster) -> Raster:
    """Per-cell fill depth (filled minus raw elevation, >= 0)."""
    require_same_grid(dem, filled, "dem and filled rasters")
    return dem.with_values(filled.values - dem.values)


def _shifted(values: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Neighbor values at offset (dr, dc), NaN outside the grid."""
    out = np.full_like(values, np.nan)
    rows, cols = values.shape
    rs = slice(max(dr, 0), rows + min(dr, 0))
    cs = slice(max(dc, 0), cols + min(dc, 0))
    rd = slice(max(-dr, 0), rows + min(-dr, 0))
    cd = slice(max(-dc, 0), cols + min(-dc, 0))
    out[rd, cd] = values[rs, cs]
    return out


OUTLET = 0.0


def d8_flow_direction(filled_dem: Raster) -> Raster:
    """Steepest-descent D8 direction codes for a filled DEM.

    Each data cell points to the neighbor maximising drop over distance
    (metric cell sizes; diagonals are the hypotenuse), ties broken by the
    lowest code. Cells without a strictly lower neighbor are outlets and
    carry the OUTLET code 0, which keeps them distinguishable from nodata
    cells; after an epsilon fill such cells occur only at the grid edge.
    """
    z = filled_dem.values
    t = filled_dem.transform
    dx, dy = t.metric_cell_x, t.metric_cell_y
    best = np.full_like(z, -np.inf)
    code_out = np.full_like(z, OUTLET)
    for code in D8_CODES:
        dr, dc = D8_OFFSETS[code]
        dist = math.hypot(dc * dx, dr * dy)
        drop = z - _shifted(z, dr, dc)
        grad = drop / dist
        take = np.isfinite(grad) & (drop > 0.0) & (grad > best)
        best = np.where(take, grad, best)
        code_out = np.where(take, float(code), code_out)
    code_out[~np.isfinite(z)] = np.nan
    return filled_dem.with_values(code_out)


def flow_accumulation(flowdir: Raster) -> Raster:
    """Upslope contributing area in cell counts, by topological order.

    acc(c) = 1 + sum of acc over cells draining into c. Counts are exact
    integers carried in float64.

    Raises:
        FlowCycleError: directions form a cycle (the fill was broken).
    """
    codes = flowdir.values
    rows, cols = codes.shape
    valid = np.isfinite(codes)
    n = rows * cols

    dr_lut = np.zeros(9, dtype=np.int64)
    dc_lut = np.zeros(9, dtype=np.int64)
    for code, (dr, dc) in D8_OFFSETS.items():
        dr_lut[code], dc_lut[code] = dr, dc

    target = np.full(n, -1, dtype=np.int64)
    flat_valid = valid.ravel()
    rr, cc = np.nonzero(valid & (codes >= 1.0))
    ci = codes[rr, cc].astype(np.int64)
    target[rr * cols + cc] = (rr + dr_lut[ci]) * cols + (cc + dc_lut[ci])

    indeg = np.zeros(n, dtype=np.int64)
    has_target = target >= 0
    np.add.at(indeg, target[has_target], 1)

    acc = np.where(flat_valid, 1.0, np.nan)
    queue = deque(np.nonzero(flat_valid & (indeg == 0))[0].tolist())
    processed = 0
    while queue:
        i = queue.popleft()
        processed += 1
        t = target[i]
        if t >= 0:
            acc[t] += acc[i]
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    if processed != int(flat_valid.sum()):
        raise FlowCycleError("flow directions contain a cycle; refill the DEM")
    return flowdir.with_values(acc.reshape(rows, cols))


def extract_channels(acc: Raster, threshold_cells: float = DEFAULT_CHANNEL_THRESHOLD_CELLS) -> Raster:
    """Binary channel mask: cells whose contributing area meets the threshold."""
    if threshold_cells < 1:
        raise ValueError("threshold_cells must be >= 1")
    a = acc.values
    mask = np.where(np.isfinite(a), (a >= threshold_cells).astype(np.float64), np.nan)
    return acc.with_values(mask)


def extract_ridges(acc: Raster) -> Raster:
    """Binary ridge mask: cells with no upslope contributors (acc == 1)."""
    a = acc.values
    mask = np.where(np.isfinite(a), (a == 1.0).astype(np.float64), np.nan)
    return acc.with_values(mask)


def _nearest_source_scan(
    src: np.ndarray,
    sy2: float,
    sx2: float,
    values: np.ndarray | None = None,
    chunk_bytes: int = 1 << 26,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Exact nearest-source squared distances over a grid of sources.

    Two separable passes (columns, then rows), each a chunked minimisation
    over candidate offsets. Candidate squared distances use the canonical
    expression ``di*di*sy2 + dj*dj*sx2``, so the result is bit-identical to
    brute force over all sources. When ``values`` is given, the second
    output carries, per cell, the minimum value among all equidistant
    nearest sources (lexicographic tie rule).
    """
    rows, cols = src.shape
    want_values = values is not None

    ridx = np.arange(rows, dtype=np.float64)
    drow = ridx[:, None] - ridx[None, :]
    drow2 = (drow * drow) * sy2  # (target row, source row)

    g1 = np.full((rows, cols), np.inf)
    g2 = np.full((rows, cols), np.inf) if want_values else None
    cw = max(1, chunk_bytes // (rows * rows * 8))
    for j0 in range(0, cols, cw):
        j1 = min(cols, j0 + cw)
        m = src[:, j0:j1]
        d = np.where(m[None, :, :], drow2[:, :, None], np.inf)
        g1c = d.min(axis=1)
        g1[:, j0:j1] = g1c
        if want_values:
            v = np.where(m, values[:, j0:j1], np.inf)
            tied = np.where(d == g1c[:, None, :], v[None, :, :], np.inf)
            g2[:, j0:j1] = tied.min(axis=1)

    cidx = np.arange(cols, dtype=np.float64)
    dcol = cidx[:, None] - cidx[None, :]
    dcol2 = (dcol * dcol) * sx2  # (target col, source col)

    d2 = np.empty((rows, cols))
    tie_out = np.empty((rows, cols)) if want_values else None
    rw = max(1, chunk_bytes // (cols * cols * 8))
    for i0 in range(0, rows, rw):
        i1 = min(rows, i0 + rw)
        total = dcol2[None, :, :] + g1[i0:i1, None, :]
        best = total.min(axis=2)
        d2[i0:i1, :] = best
        if want_values:
            tied = np.where(total == best[:, :, None], g2[i0:i1, None, :], np.inf)
            tie_out[i0:i1, :] = tied.min(axis=2)
    return d2, tie_out


def distance_to_mask(mask: Raster) -> Raster:
    """Euclidean distance (metres) from every cell centre to the nearest mask cell.

    Exact multi-source computation; zero on mask cells, nodata wherever the
    mask raster itself is nodata.

    Raises:
        EmptyMaskError: the mask marks no cells.
    """
    src = mask.values == 1.0
    if not src.any():
        raise EmptyMaskError("mask has no marked cells")
    t = mask.transform
    sx, sy = t.metric_cell_x, t.metric_cell_y
    d2, _ = _nearest_source_scan(src, sy * sy, sx * sx)
    dist = np.sqrt(d2)
    dist[~np.isfinite(mask.values)] = np.nan
    return mask.with_values(dist)


def _nearest_mask_elevation(dem: Raster, mask: Raster, what: str) -> np.ndarray:
    require_same_grid(dem, mask, "dem and mask")
    src = mask.values == 1.0
    if not src.any():
        raise EmptyMaskError(f"{what} mask has no marked cells")
    t = dem.transform
    sx, sy = t.metric_cell_x, t.metric_cell_y
    _, elev = _nearest_source_scan(src, sy * sy, sx * sx, values=dem.values)
    return elev


def altitude_above_channel(dem: Raster, channel_mask: Raster) -> Raster:
    """Elevation above the nearest channel cell, clamped at zero.

    Nearest by Euclidean distance; among equidistant channel cells the
    lowest one is used.
    """
    base = _nearest_mask_elevation(dem, channel_mask, "channel")
    out = np.maximum(0.0, dem.values - base)
    out[~np.isfinite(dem.values)] = np.nan
    return dem.with_values(out)


def altitude_below_ridge(dem: Raster, ridge_mask: Raster) -> Raster:
    """Elevation deficit below the nearest ridge cell, clamped at zero."""
    base = _nearest_mask_elevation(dem, ridge_mask, "ridge")
    out = np.maximum(0.0, base - dem.values)
    out[~np.isfinite(dem.values)] = np.nan
    return dem.with_values(out)


def relative_slope_position(aacl: Raster, abrl: Raster) -> Raster:
    """AACL / (AACL + ABRL), in [0, 1]; 0 where both offsets vanish."""
    require_same_grid(aacl, abrl, "AACL and ABRL rasters")
    a, b = aacl.values, abrl.values
    total = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        rps = np.where(total > 0.0, a / total, 0.0)
    rps[~(np.isfinite(a) & np.isfinite(b))] = np.nan
    return aacl.with_values(rps)
