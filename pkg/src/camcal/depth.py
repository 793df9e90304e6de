"""Metric and affine-invariant depth evaluation.

All metrics operate on the intersection of the two validity masks and only
on those pixels; reductions go through numpy's pairwise summation, so
results are reproducible across runs and chunk-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DepthMap",
    "DepthMetrics",
    "AffineAlignment",
    "abs_rel",
    "delta_threshold",
    "si_log",
    "align_affine",
    "align_scale",
    "masked_loss",
    "apply_scene_scale",
    "compute_metrics",
]

SCENE_KINDS = ("indoor", "outdoor")


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in meters with a boolean validity mask.

    Valid pixels must be finite and strictly positive; use `from_array` to
    derive the mask from raw data instead of validating by hand.
    """

    depth: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if depth.ndim != 2:
            raise ValueError(f"depth must be 2-D, got shape {depth.shape}")
        if mask.shape != depth.shape:
            raise ValueError(f"mask shape {mask.shape} != depth shape {depth.shape}")
        valid = depth[mask]
        if valid.size and (not np.all(np.isfinite(valid)) or np.any(valid <= 0)):
            raise ValueError("valid pixels must be finite and > 0")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_array(cls, depth, mask=None) -> "DepthMap":
        """Build a DepthMap, masking out non-finite or non-positive pixels."""
        depth = np.asarray(depth, dtype=np.float64)
        ok = np.isfinite(depth) & (depth > 0)
        if mask is not None:
            ok &= np.asarray(mask, dtype=bool)
        return cls(depth, ok)

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    delta1: float
    delta2: float
    delta3: float
    si_log: float

    def __post_init__(self):
        deltas = (self.delta1, self.delta2, self.delta3)
        if any(not (0.0 <= d <= 100.0) for d in deltas):
            raise ValueError("delta metrics must lie in [0, 100]")
        if not (self.delta1 <= self.delta2 <= self.delta3):
            raise ValueError("delta metrics must be monotone")
        if self.abs_rel < 0 or self.si_log < 0:
            raise ValueError("abs_rel and si_log must be non-negative")


@dataclass(frozen=True)
class AffineAlignment:
    """Least-squares scale/shift mapping predicted onto ground-truth depth.

    A non-positive scale indicates an anti-correlated (rejected) alignment;
    the solver reports it rather than failing.
    """

    s: float
    t: float

    def apply(self, depth: np.ndarray) -> np.ndarray:
        return self.s * np.asarray(depth, dtype=np.float64) + self.t


def _joint_valid(pred: DepthMap, gt: DepthMap) -> np.ndarray:
    if pred.depth.shape != gt.depth.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.depth.shape} vs gt {gt.depth.shape}"
        )
    valid = pred.mask & gt.mask
    if not valid.any():
        raise ValueError("empty intersection mask")
    return valid


def abs_rel(pred: DepthMap, gt: DepthMap) -> float:
    """Mean of |pred - gt| / gt over jointly valid pixels."""
    valid = _joint_valid(pred, gt)
    p, g = pred.depth[valid], gt.depth[valid]
    return float(np.mean(np.abs(p - g) / g))


def delta_threshold(pred: DepthMap, gt: DepthMap, i: int) -> float:
    """Percentage of jointly valid pixels with max(p/g, g/p) < 1.25**i."""
    if i not in (1, 2, 3):
        raise ValueError(f"i must be 1, 2 or 3, got {i}")
    valid = _joint_valid(pred, gt)
    p, g = pred.depth[valid], gt.depth[valid]
    ratio = np.maximum(p / g, g / p)
    return float(100.0 * np.mean(ratio < 1.25**i))


def si_log(pred: DepthMap, gt: DepthMap) -> float:
    """Scale-invariant log error: 100 * sqrt(population Var(log p - log g))."""
    valid = _joint_valid(pred, gt)
    p, g = pred.depth[valid], gt.depth[valid]
    if np.any(p <= 0) or np.any(g <= 0):
        raise ValueError("si_log requires positive depths")
    eps_log = np.log(p) - np.log(g)
    return float(100.0 * math.sqrt(np.var(eps_log)))


def align_affine(pred: DepthMap, gt: DepthMap) -> AffineAlignment:
    """Closed-form least squares of gt on pred: minimizes sum (s*p + t - g)^2."""
    valid = _joint_valid(pred, gt)
    p, g = pred.depth[valid], gt.depth[valid]
    if p.size < 2:
        raise ValueError("affine alignment needs at least 2 valid pixels")
    var = np.var(p)
    if var <= 1e-12 * (1.0 + np.mean(p) ** 2):
        raise ValueError("constant prediction: affine alignment is singular")
    s = float(np.mean((p - p.mean()) * (g - g.mean())) / var)
    t = float(g.mean() - s * p.mean())
    return AffineAlignment(s=s, t=t)


def align_scale(pred: DepthMap, gt: DepthMap) -> float:
    """Robust scale: median of gt / pred over jointly valid pixels."""
    valid = _joint_valid(pred, gt)
    return float(np.median(gt.depth[valid] / pred.depth[valid]))


def masked_loss(pred: DepthMap, gt: DepthMap) -> float:
    """Mean absolute depth error over jointly valid pixels (the training loss)."""
    valid = _joint_valid(pred, gt)
    return float(np.mean(np.abs(pred.depth[valid] - gt.depth[valid])))


def apply_scene_scale(depth: DepthMap, scene: str, s_in: float, s_out: float) -> DepthMap:
    """Divide depth by the indoor/outdoor scene scale factor."""
    if scene not in SCENE_KINDS:
        raise ValueError(f"scene must be one of {SCENE_KINDS}, got {scene!r}")
    if s_in <= 0 or s_out <= 0:
        raise ValueError("scale factors must be positive")
    factor = s_in if scene == "indoor" else s_out
    return DepthMap(depth.depth / factor, depth.mask)


def compute_metrics(pred: DepthMap, gt: DepthMap) -> DepthMetrics:
    """All evaluation metrics in one pass over the shared mask."""
    return DepthMetrics(
        abs_rel=abs_rel(pred, gt),
        delta1=delta_threshold(pred, gt, 1),
        delta2=delta_threshold(pred, gt, 2),
        delta3=delta_threshold(pred, gt, 3),
        si_log=si_log(pred, gt),
    )
