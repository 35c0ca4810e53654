"""Edge-orientation template matching for texture-less planar objects.

Detects the 2D rigid pose (x, y, theta) of a template in a search image by
maximizing a normalized gradient-orientation score over a pose lattice, with an
image pyramid, neighbourhood-max voting and serial or threaded search backends.
"""

from .edges import (EdgeModel, EdgePoint, EdgeThresholds, EmptyModelError, GradientField,
                    compute_gradients, extract_edge_model, model_point_count)
from .image import Image, ImageSizeError, PnmParseError, build_pyramid, downsample, load_pgm, \
    save_pgm, save_ppm
from .kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION
from .pose import Pose, PoseGrid, grid_size, pose_at, rotate_direction, transform_point
from .search import (Backend, Detection, NoDetection, SearchConfig, coarse_to_fine, detect,
                     exhaustive_search, score_map, search_topk)
from .similarity import PoseScore, ScoreParams, point_vote, pose_score

__version__ = "0.1.0"

__all__ = [
    "Backend", "Detection", "EdgeModel", "EdgePoint", "EdgeThresholds", "EmptyModelError",
    "GradientField", "Image", "ImageSizeError", "KERNEL_IMPLEMENTATION", "NoDetection",
    "PnmParseError", "Pose", "PoseGrid", "PoseScore", "ScoreParams", "SearchConfig",
    "build_pyramid", "coarse_to_fine", "compute_gradients", "detect", "downsample",
    "exhaustive_search", "extract_edge_model", "grid_size", "load_pgm", "model_point_count",
    "point_vote", "pose_at", "pose_score", "rotate_direction", "save_pgm", "save_ppm",
    "score_map", "search_topk", "transform_point",
]
