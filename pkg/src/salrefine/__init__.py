"""Local-global refinement for video salient object detection at desk scale."""

from .datamodel import FeaturePyramid, RunConfig, SaliencyMap, VideoSample, load_config, validate_sample
from .network import SaliencyNet, build_model

__version__ = "0.1.0"

__all__ = [
    "FeaturePyramid",
    "RunConfig",
    "SaliencyMap",
    "SaliencyNet",
    "VideoSample",
    "build_model",
    "load_config",
    "validate_sample",
]
