import json
import tempfile
import time
from pathlib import Path

import numpy as np

from wetspot.pipeline import PipelineConfig, TerrainFeatures, run_pipeline
from wetspot.raster import write_ascii_grid
from wetspot.synthetic import synthetic_dem, synthetic_survey, write_survey_files

t_all = time.time()
work = Path(tempfile.mkdtemp())
dem = synthetic_dem(rows=512, cols=512, seed=11)
tf = TerrainFeatures(dem)
records, chunks = synthetic_survey(dem, tf, n_positives=1500, seed=12)
print("survey:", len(records), "positives,", len(chunks), "neg chunks;", round(time.time() - t_all, 1), "s")

write_ascii_grid(dem, work / "dem.asc")
write_survey_files(records, chunks, work / "pos.csv", work / "chunks.csv")

cfg = PipelineConfig(
    dem_paths=[str(work / "dem.asc")],
    positives_path=str(work / "pos.csv"),
    chunks_path=str(work / "chunks.csv"),
    output_dir=str(work / "out"),
    features=["tpi500", "twi", "rps", "closed_depressions", "flow_direction"],
    model_family="gradient_boosting",
    seed_negatives=1,
    seed_model=2,
    seed_undersample=3,
    write_grids=False,
    write_png=True,
)
t0 = time.time()
result = run_pipeline(cfg)
print("pipeline:", round(time.time() - t0, 1), "s")
print(result.report.format())
print("counts:", json.dumps(result.manifest["counts"]))

cfg2 = PipelineConfig(
    dem_paths=[str(work / "dem.asc")],
    positives_path=str(work / "pos.csv"),
    chunks_path=str(work / "chunks.csv"),
    output_dir=str(work / "out2"),
    features=["slope"],
    model_family="logistic",
    seed_negatives=1,
    seed_model=2,
    seed_undersample=3,
    write_grids=False,
    write_png=False,
)
t0 = time.time()
base = run_pipeline(cfg2)
print("baseline:", round(time.time() - t0, 1), "s  ROC:", base.report.roc_auc)
print("gap:", result.report.roc_auc - base.report.roc_auc)
print("total:", round(time.time() - t_all, 1), "s")
print(work)
