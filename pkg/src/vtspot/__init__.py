"""Video text spotting pipeline: spatial-temporal detection, text stream
tracking, quality-aware recognize-once selection, and evaluation."""

__version__ = "0.1.0"

from .geometry import Quad, ScoredQuad, nms, polygon_iou
from .kernels import BACKEND

__all__ = ["Quad", "ScoredQuad", "nms", "polygon_iou", "BACKEND", "__version__"]
