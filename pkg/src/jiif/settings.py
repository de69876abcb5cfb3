import os

# Load environment variables early
from dotenv import load_dotenv

load_dotenv(".env", override=False)

# Environment-driven locations
DATA_ROOT = os.getenv("JIIF_DATA_ROOT", "data")
RUNS_DIR = os.getenv("JIIF_RUNS_DIR", "runs")
DEBUG_CHECKS = os.getenv("JIIF_DEBUG", "0").lower() in ("1", "true", "yes")

# Dataset names
NYU_V2 = "nyu_v2"
MIDDLEBURY = "middlebury"
MIDDLEBURY_NOISY = "middlebury_noisy"
LU = "lu"
SYNTHETIC = "synthetic"

DATASET_NAMES = (NYU_V2, MIDDLEBURY, MIDDLEBURY_NOISY, LU, SYNTHETIC)

# Expected pair counts per (dataset, split); None means any count
DATASET_SIZES = {
    (NYU_V2, "train"): 1000,
    (NYU_V2, "test"): 449,
    (MIDDLEBURY, "test"): 30,
    (MIDDLEBURY_NOISY, "test"): 3,
    (LU, "test"): 6,
    (SYNTHETIC, "train"): None,
    (SYNTHETIC, "test"): None,
}
NYU_TRAIN_COUNT = 1000
TEST_ONLY_DATASETS = (MIDDLEBURY, MIDDLEBURY_NOISY, LU)
DISPARITY_DATASETS = (MIDDLEBURY, MIDDLEBURY_NOISY, LU)
NOISY_MIDDLEBURY_SCENES = ("Art", "Books", "Moebius")

# Degradation defaults
BENCHMARK_SCALES = (4, 8, 16)
NOISE_SIGMA_NYU = 0.04
NOISE_SIGMA_MIDDLEBURY = 651.0

# Training recipe
PATCH_SIZE = 256
SAMPLES_PER_PATCH = 30720
FEATURE_DIM = 128
DECODER_HIDDEN = (1024, 512, 256, 128)

# Reference rows for side-by-side printing (average RMSE)
REFERENCE_BICUBIC = {
    MIDDLEBURY: {4: 2.28, 8: 3.98, 16: 6.37},
    LU: {4: 2.42, 8: 4.54, 16: 7.38},
    NYU_V2: {4: 4.28, 8: 7.14, 16: 11.58},
}
REFERENCE_JIIF = {
    MIDDLEBURY: {4: 1.09, 8: 1.82, 16: 3.31},
    LU: {4: 0.85, 8: 1.73, 16: 4.16},
    NYU_V2: {4: 1.37, 8: 2.76, 16: 5.27},
}
REFERENCE_NOISY_BICUBIC = {
    "Art": {4: 6.07, 8: 7.27, 16: 9.59},
    "Books": {4: 5.15, 8: 5.45, 16: 5.97},
    "Moebius": {4: 5.51, 8: 5.68, 16: 6.11},
}
REFERENCE_NOISY_JIIF = {
    "Art": {4: 2.79, 8: 3.87, 16: 7.14},
    "Books": {4: 1.30, 8: 1.75, 16: 2.47},
    "Moebius": {4: 1.40, 8: 2.03, 16: 3.18},
}

# Ablation rows at x8 on NYU v2
ABLATION_MODULE_ROWS = (
    # label, joint representation, residual learning, reference RMSE
    ("Baseline", False, False, 3.12),
    ("+ Joint Repr.", True, False, 2.95),
    ("+ Residual", False, True, 2.97),
    ("Full (Joint Repr. + Residual)", True, True, 2.76),
)
ABLATION_WEIGHT_ROWS = (
    # label, weight strategy, reference RMSE
    ("Bilinear", "bilinear", 3.68),
    ("Direct Regression", "direct_regression", 3.67),
    ("Graph Attention", "graph_attention", 2.76),
)
ABLATION_SCALE = 8
