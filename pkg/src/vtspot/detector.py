"""Temporal aggregation of per-frame confidence maps around a reference frame.

A window of 2n+1 frames is warped onto the reference frame, neighbor
features are transformed to bridge the appearance gap, and per-position
softmax weights over similarity-times-confidence fuse the warped confidence
maps. A binary mask derived from the reference features then suppresses
positions without feature support, and surviving cells emit their quads.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .geometry import Quad, ScoredQuad, nms
from .kernels import bilinear_warp
from .types import FlowField, TensorGrid


@dataclass
class TransformParams:
    """Per-channel linear map with batch-norm statistics and ReLU."""

    weight: np.ndarray
    bias: np.ndarray
    bn_scale: np.ndarray
    bn_shift: np.ndarray
    bn_mean: np.ndarray
    bn_var: np.ndarray
    bn_epsilon: float = 1e-5

    def __post_init__(self):
        w = np.ascontiguousarray(self.weight, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ContractError(f"weight must be square, got shape {w.shape}")
        c = w.shape[0]
        self.weight = w
        for name in ("bias", "bn_scale", "bn_shift", "bn_mean", "bn_var"):
            v = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if v.shape != (c,):
                raise ContractError(f"{name} shape {v.shape} != ({c},)")
            if not np.isfinite(v).all():
                raise ContractError(f"{name} values must be finite")
            setattr(self, name, v)
        if not np.isfinite(w).all():
            raise ContractError("weight values must be finite")
        if (self.bn_var <= 0.0).any():
            raise ContractError("bn_var must be strictly positive")
        if self.bn_epsilon < 0.0:
            raise ContractError(f"bn_epsilon must be >= 0, got {self.bn_epsilon}")

    @property
    def channels(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def identity(cls, channels: int) -> "TransformParams":
        """Exact pass-through (positive inputs survive ReLU unchanged)."""
        return cls(
            weight=np.eye(channels),
            bias=np.zeros(channels),
            bn_scale=np.ones(channels),
            bn_shift=np.zeros(channels),
            bn_mean=np.zeros(channels),
            bn_var=np.ones(channels),
            bn_epsilon=0.0,
        )


@dataclass
class AggregationWindow:
    """2n+1 frames of features, confidences, and flows toward the reference.

    Entry order is t-n .. t+n; the middle flow must be the zero field.
    """

    n: int
    reference: int
    features: list
    confidences: list
    flows: list
    transform: TransformParams

    def __post_init__(self):
        if self.n < 0:
            raise ContractError(f"half-window must be >= 0, got {self.n}")
        size = 2 * self.n + 1
        for name, seq in (
            ("features", self.features),
            ("confidences", self.confidences),
            ("flows", self.flows),
        ):
            if len(seq) != size:
                raise ContractError(f"{name} must have {size} entries, got {len(seq)}")
        h, w = self.features[0].height, self.features[0].width
        for grid in self.features:
            if (grid.height, grid.width) != (h, w):
                raise ContractError("feature grids must share dimensions")
            if grid.channels != self.transform.channels:
                raise ContractError(
                    f"feature channels {grid.channels} != transform channels {self.transform.channels}"
                )
        for grid in self.confidences:
            if (grid.height, grid.width, grid.channels) != (h, w, 1):
                raise ContractError("confidence grids must be 1-channel and share dimensions")
        for flow in self.flows:
            if (flow.height, flow.width) != (h, w):
                raise ContractError("flow fields must share grid dimensions")
        if not self.flows[self.n].is_zero:
            raise ContractError("the reference-frame flow must be the zero field")


def warp(grid: TensorGrid, flow: FlowField) -> TensorGrid:
    """Backward bilinear warp toward the flow's reference frame."""
    if (grid.height, grid.width) != (flow.height, flow.width):
        raise ContractError(
            f"grid {grid.height}x{grid.width} does not match flow {flow.height}x{flow.width}"
        )
    data = bilinear_warp(grid.data, flow.dx, flow.dy)
    return TensorGrid(grid.height, grid.width, grid.channels, data)


def transform_features(grid: TensorGrid, p: TransformParams) -> TensorGrid:
    """ReLU(bn_scale * (W f + b - bn_mean) / sqrt(bn_var + eps) + bn_shift)."""
    if grid.channels != p.channels:
        raise ContractError(f"grid channels {grid.channels} != transform channels {p.channels}")
    flat = grid.data.reshape(-1, grid.channels)
    lin = flat @ p.weight.T + p.bias
    normed = p.bn_scale * (lin - p.bn_mean) / np.sqrt(p.bn_var + p.bn_epsilon) + p.bn_shift
    out = np.maximum(normed, 0.0).reshape(grid.data.shape)
    return TensorGrid(grid.height, grid.width, grid.channels, out)


def similarity_energy(a: TensorGrid, b: TensorGrid) -> TensorGrid:
    """Position-wise channel dot product, as a 1-channel grid."""
    if a.shape != b.shape:
        raise ContractError(f"grid shapes differ: {a.shape} vs {b.shape}")
    dots = np.einsum("hwc,hwc->hw", a.data, b.data)
    return TensorGrid(a.height, a.width, 1, dots[:, :, None])


def aggregation_weights(sims, confs):
    """Per-position softmax over similarity*confidence across the window.

    Computed with max subtraction, so weights at each position sum to 1
    within strict tolerance for any finite inputs.
    """
    if len(sims) != len(confs) or not sims:
        raise ContractError("sims and confs must be equal-length non-empty lists")
    h, w = sims[0].height, sims[0].width
    for g in list(sims) + list(confs):
        if (g.height, g.width, g.channels) != (h, w, 1):
            raise ContractError("weight inputs must be 1-channel grids of equal dimensions")
    z = np.stack([s.data[:, :, 0] * c.data[:, :, 0] for s, c in zip(sims, confs)])
    z -= z.max(axis=0, keepdims=True)
    e = np.exp(z)
    weights = e / e.sum(axis=0, keepdims=True)
    return [TensorGrid(h, w, 1, weights[i][:, :, None]) for i in range(len(sims))]


def _mask_statistic(features: TensorGrid) -> np.ndarray:
    """Mean absolute channel activation, min-max normalized over the frame.

    A featureless (constant) frame has no contrast to normalize; its
    statistic is defined as 0 everywhere, masking the whole frame out.
    """
    stat = np.abs(features.data).mean(axis=2)
    lo = stat.min()
    hi = stat.max()
    if hi == lo:
        return np.zeros_like(stat)
    return (stat - lo) / (hi - lo)


def aggregate(window: AggregationWindow, mask_threshold: float = 0.5) -> TensorGrid:
    """Fuse the window's confidences at the reference frame.

    Each neighbor's features and confidence are warped to the reference,
    warped features are transformed, and per-position softmax weights over
    similarity-times-confidence blend the warped confidences. The blended
    map is then gated by the reference-feature mask. With n=0 this reduces
    to the reference confidence times its mask, exactly.
    """
    ref_features = window.features[window.n]
    warped_feats = [warp(f, fl) for f, fl in zip(window.features, window.flows)]
    warped_confs = [warp(c, fl) for c, fl in zip(window.confidences, window.flows)]
    sims = [
        similarity_energy(ref_features, transform_features(wf, window.transform))
        for wf in warped_feats
    ]
    weights = aggregation_weights(sims, warped_confs)
    h, w = ref_features.height, ref_features.width
    if window.n == 0:
        agg = warped_confs[0].data[:, :, 0]
    else:
        agg = np.zeros((h, w))
        for wt, wc in zip(weights, warped_confs):
            agg += wt.data[:, :, 0] * wc.data[:, :, 0]
    mask = (_mask_statistic(warped_feats[window.n]) >= mask_threshold).astype(np.float64)
    return TensorGrid(h, w, 1, (agg * mask)[:, :, None])


def extract_quads(
    conf: TensorGrid,
    geometry: TensorGrid,
    conf_threshold: float,
    nms_threshold: float = 0.2,
):
    """Emit per-cell quads where confidence clears the threshold, then NMS.

    Geometry carries 8 channels per cell: vertex coordinates relative to
    the cell position, in x1,y1,...,x4,y4 order.
    """
    if conf.channels != 1:
        raise ContractError(f"confidence grid must be 1-channel, got {conf.channels}")
    if (geometry.height, geometry.width) != (conf.height, conf.width):
        raise ContractError(
            f"geometry {geometry.height}x{geometry.width} does not match "
            f"confidence {conf.height}x{conf.width}"
        )
    if geometry.channels != 8:
        raise ContractError(f"geometry grid must have 8 channels, got {geometry.channels}")
    candidates = []
    scores = conf.data[:, :, 0]
    for y, x in np.argwhere(scores >= conf_threshold):
        offsets = geometry.data[y, x].reshape(4, 2)
        vertices = offsets + np.array([float(x), float(y)])
        score = min(max(float(scores[y, x]), 0.0), 1.0)
        candidates.append(ScoredQuad(Quad(vertices), score))
    return nms(candidates, nms_threshold)
