from src.jiif.data.degradation import DegradedDepth, add_depth_noise, degrade
from src.jiif.data.loaders import convert_release, load_dataset, write_split, write_synthetic_dataset
from src.jiif.data.pairs import (
    DepthStats,
    RGBDPair,
    apply_flips,
    center_crop_to_multiple,
    denormalize,
    normalize_depth,
    normalize_with,
)
from src.jiif.data.sampling import TrainingSample, collate, sample_training_patch
from src.jiif.data.synthetic import generate_synthetic

__all__ = [
    "DegradedDepth",
    "DepthStats",
    "RGBDPair",
    "TrainingSample",
    "add_depth_noise",
    "apply_flips",
    "center_crop_to_multiple",
    "collate",
    "convert_release",
    "degrade",
    "denormalize",
    "generate_synthetic",
    "load_dataset",
    "normalize_depth",
    "normalize_with",
    "sample_training_patch",
    "write_split",
    "write_synthetic_dataset",
]
