"""Synthetic terrain and survey generation.

The real survey behind this kind of study is rarely publishable, so the
demos and the end-to-end acceptance experiment run on generated data: a
smoothed random elevation field on a southward regional tilt with carved
depressions, and a survey whose positive sites sit in depressions and on
low-lying near-channel cells (with a configurable fraction of label noise).
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .pipeline import TerrainFeatures
from .raster import GeoPoint, GeoTransform, Raster, cell_center
from .sampling import ChunkRecord, NATURAL_CATEGORIES, SurveyRecord


def synthetic_dem(
    rows: int = 512,
    cols: int = 512,
    cell_size: float = 30.0,
    seed: int = 0,
    relief: float = 25.0,
    smooth_sigma: float = 10.0,
    tilt: float = 0.004,
    n_depressions: int = 50,
    depression_depth: tuple[float, float] = (2.0, 8.0),
    depression_radius: tuple[float, float] = (60.0, 240.0),
) -> Raster:
    """Smoothed random elevation field with carved closed depressions.

    The field rides on a constant southward tilt (north high), so drainage
    is well defined and the terrain statistics are stationary east-west,
    which keeps a longitude-percentile split fair.

    Args:
        rows, cols, cell_size: grid geometry (planar metres).
        seed: generator seed; everything is deterministic given it.
        relief: standard deviation of the smoothed random field, metres.
        smooth_sigma: Gaussian smoothing radius in cells.
        tilt: regional gradient, metres of drop per metre southward.
        n_depressions: number of carved dents.
        depression_depth: (min, max) dent depth in metres.
        depression_radius: (min, max) dent radius in metres.
    """
    rng = np.random.default_rng(seed)
    z = gaussian_filter(rng.standard_normal((rows, cols)), sigma=smooth_sigma, mode="reflect")
    z *= relief / z.std()
    rr = np.arange(rows, dtype=np.float64)[:, None]
    z = z + tilt * cell_size * (rows - 1 - rr)

    ci = np.arange(cols, dtype=np.float64)[None, :]
    for _ in range(n_depressions):
        r0 = rng.uniform(0, rows - 1)
        c0 = rng.uniform(0, cols - 1)
        radius = rng.uniform(*depression_radius) / cell_size
        depth = rng.uniform(*depression_depth)
        d2 = (rr - r0) ** 2 + (ci - c0) ** 2
        z = z - depth * np.exp(-d2 / (2.0 * (radius / 2.0) ** 2))

    transform = GeoTransform(0.0, rows * cell_size, cell_size, cell_size)
    return Raster(z, transform)


def water_mask(features: TerrainFeatures, depression_min_depth: float = 0.05,
               channel_dist_m: float = 30.0, tpi_max: float = -0.25) -> np.ndarray:
    """Cells that plausibly hold standing water.

    Union of closed-depression cells and clearly low-lying cells on or
    beside a channel.
    """
    depth = features.grid("closed_depressions").values
    cnd = features.grid("cnd").values
    tpival = features.grid("tpi").values
    mask = depth > depression_min_depth
    mask |= (cnd <= channel_dist_m) & (tpival < tpi_max)
    mask &= np.isfinite(depth) & np.isfinite(cnd) & np.isfinite(tpival)
    return mask


def synthetic_survey(
    dem: Raster,
    features: TerrainFeatures,
    n_positives: int = 1500,
    label_noise: float = 0.10,
    seed: int = 0,
    chunk_size_m: float = 100.0,
    n_chunks: int | None = 900,
) -> tuple[list[SurveyRecord], list[ChunkRecord]]:
    """Survey records over synthetic terrain.

    Positive sites are sampled from the water mask, with ``label_noise`` of
    them swapped for random dry cells (mislabeled finds). Negative chunks
    tile the extent with ``chunk_size_m`` squares, keep only those whose
    cells are entirely dry and that contain no reported positive, and are
    thinned to ``n_chunks`` (a ground survey only covers so many).
    """
    rng = np.random.default_rng(seed)
    wet = water_mask(features)
    wet_cells = np.argwhere(wet)
    dry = ~wet & features.dem.valid
    if len(wet_cells) == 0:
        raise ValueError("synthetic terrain produced no water cells")

    n_pos = min(n_positives, len(wet_cells))
    picks = wet_cells[rng.choice(len(wet_cells), size=n_pos, replace=False)]
    n_noise = int(round(label_noise * n_pos))
    if n_noise > 0:
        # Mislabeled finds happen where finds happen: draw each noise cell
        # from the dry cells near a true pick, so the noise fraction stays
        # uniform across the survey area (and across a longitude split).
        noise_rows = []
        anchors = picks[rng.choice(n_pos, size=n_noise, replace=False)]
        half_window = 32
        for r0, c0 in anchors:
            c_lo = max(0, c0 - half_window)
            c_hi = min(dry.shape[1], c0 + half_window + 1)
            local = np.argwhere(dry[:, c_lo:c_hi])
            pick = local[rng.integers(len(local))]
            noise_rows.append((pick[0], pick[1] + c_lo))
        picks = np.vstack([picks[: n_pos - n_noise], np.array(noise_rows)])

    categories = sorted(NATURAL_CATEGORIES)
    records = []
    for r, c in picks:
        pt = cell_center(dem, int(r), int(c))
        records.append(SurveyRecord(pt, categories[rng.integers(len(categories))]))

    t = dem.transform
    x0, y_top = t.origin_x, t.origin_y
    width = dem.cols * t.cell_size_x
    height = dem.rows * t.cell_size_y
    pos_xy = np.array([(rec.point.x, rec.point.y) for rec in records])

    chunks: list[ChunkRecord] = []
    ny = int(height // chunk_size_m)
    nx = int(width // chunk_size_m)
    for iy in range(ny):
        for ix in range(nx):
            min_x = x0 + ix * chunk_size_m
            max_x = min_x + chunk_size_m
            max_y = y_top - iy * chunk_size_m
            min_y = max_y - chunk_size_m
            r0 = int((y_top - max_y) / t.cell_size_y)
            r1 = int(np.ceil((y_top - min_y) / t.cell_size_y))
            c0 = int((min_x - x0) / t.cell_size_x)
            c1 = int(np.ceil((max_x - x0) / t.cell_size_x))
            if wet[r0 : min(r1, dem.rows), c0 : min(c1, dem.cols)].any():
                continue
            inside = (
                (pos_xy[:, 0] >= min_x)
                & (pos_xy[:, 0] <= max_x)
                & (pos_xy[:, 1] >= min_y)
                & (pos_xy[:, 1] <= max_y)
            )
            if inside.any():
                continue
            chunks.append(ChunkRecord(min_x, min_y, max_x, max_y))
    if n_chunks is not None and len(chunks) > n_chunks:
        keep = rng.choice(len(chunks), size=n_chunks, replace=False)
        chunks = [chunks[i] for i in sorted(keep)]
    return records, chunks


def write_survey_files(
    records: list[SurveyRecord],
    chunks: list[ChunkRecord],
    positives_path,
    chunks_path,
) -> None:
    """Write survey records and chunks in the pipeline's input formats."""
    with open(positives_path, "w") as fh:
        fh.write("x,y,category\n")
        for rec in records:
            fh.write(f"{float(rec.point.x)!r},{float(rec.point.y)!r},{rec.category}\n")
    with open(chunks_path, "w") as fh:
        fh.write("min_x,min_y,max_x,max_y\n")
        for ch in chunks:
            fh.write(
                f"{float(ch.min_x)!r},{float(ch.min_y)!r},"
                f"{float(ch.max_x)!r},{float(ch.max_y)!r}\n"
            )
