"""Point tracking of many objects across image slices with a thresholded
distance matrix, plus blob detection, scene simulation and evaluation."""

__version__ = "0.1.0"

from .core import (
    DetectionSlice,
    GroundTruth,
    ParseError,
    Point,
    Sample,
    TrackerConfig,
    Trajectory,
    read_detections,
    read_trajectories,
    read_truth,
    write_detections,
    write_trajectories,
    write_truth,
)
from .matching import (
    BinaryDistanceMatrix,
    ContractError,
    FrameRateParams,
    OcclusionEvent,
    TrackerState,
    annotate_speed,
    build_distance_matrix,
    min_frames_per_second,
    refine_nearest_neighbor,
    step,
    track,
)
