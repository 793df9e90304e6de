"""Pinhole camera model: intrinsics, viewing rays, field of view, and the
intrinsics algebra under common image transforms (crop / resize / pad / flip).

Pixel convention: (u, v) addresses pixel centers, with (0, 0) the center of
the top-left pixel. All geometry is computed in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Intrinsics",
    "ImageDims",
    "ResizePadPlan",
    "ray_direction",
    "fov_degrees",
    "intrinsics_after_crop",
    "intrinsics_after_resize",
    "intrinsics_after_pad",
    "intrinsics_after_hflip",
    "plan_resize_pad",
]


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=float,
        )


@dataclass(frozen=True)
class ImageDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError(f"dims must be at least 2x2, got {self.width}x{self.height}")


@dataclass(frozen=True)
class ResizePadPlan:
    """Aspect-preserving resize followed by centered zero padding.

    scaled_width/height are the post-resize dims; adding the pads on each
    side reproduces the target dims exactly.
    """

    scale: float
    scaled_width: int
    scaled_height: int
    pad_left: int
    pad_top: int
    pad_right: int
    pad_bottom: int

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        for name in ("pad_left", "pad_top", "pad_right", "pad_bottom"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def target_width(self) -> int:
        return self.scaled_width + self.pad_left + self.pad_right

    @property
    def target_height(self) -> int:
        return self.scaled_height + self.pad_top + self.pad_bottom


def ray_direction(K: Intrinsics, u, v) -> np.ndarray:
    """Unit viewing ray through pixel (u, v), forward-facing (third component > 0).

    Accepts scalars or broadcastable arrays; the ray components are stacked
    on a trailing axis.
    """
    x = (np.asarray(u, dtype=float) - K.cx) / K.fx
    y = (np.asarray(v, dtype=float) - K.cy) / K.fy
    x, y = np.broadcast_arrays(x, y)
    z = np.ones_like(x)
    ray = np.stack([x, y, z], axis=-1)
    return ray / np.linalg.norm(ray, axis=-1, keepdims=True)


def fov_degrees(K: Intrinsics, dims: ImageDims, axis: str) -> float:
    """Full field of view along one image axis, in degrees."""
    if axis == "x":
        extent, focal = dims.width, K.fx
    elif axis == "y":
        extent, focal = dims.height, K.fy
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return math.degrees(2.0 * math.atan(extent / (2.0 * focal)))


def intrinsics_after_crop(K: Intrinsics, offset_x: float, offset_y: float) -> Intrinsics:
    """Intrinsics after removing offset_x columns on the left and offset_y rows on top."""
    return Intrinsics(K.fx, K.fy, K.cx - offset_x, K.cy - offset_y)


def intrinsics_after_resize(K: Intrinsics, sx: float, sy: float) -> Intrinsics:
    if sx <= 0 or sy <= 0:
        raise ValueError(f"scales must be positive, got sx={sx}, sy={sy}")
    return Intrinsics(K.fx * sx, K.fy * sy, K.cx * sx, K.cy * sy)


def intrinsics_after_pad(K: Intrinsics, pad_left: float, pad_top: float) -> Intrinsics:
    if pad_left < 0 or pad_top < 0:
        raise ValueError("pads must be non-negative")
    return Intrinsics(K.fx, K.fy, K.cx + pad_left, K.cy + pad_top)


def intrinsics_after_hflip(K: Intrinsics, width: int) -> Intrinsics:
    # Pixel-center convention: column u maps to (width - 1) - u.
    return Intrinsics(K.fx, K.fy, (width - 1) - K.cx, K.cy)


def plan_resize_pad(dims: ImageDims, target: ImageDims) -> ResizePadPlan:
    """Plan an aspect-preserving resize of `dims` into `target`, centered with padding.

    The scale is min(target_w/w, target_h/h); scaled dims round to nearest
    integer (half up) and the leftover padding splits evenly with the extra
    pixel on the right/bottom.
    """
    scale = min(target.width / dims.width, target.height / dims.height)
    scaled_w = max(1, int(math.floor(dims.width * scale + 0.5)))
    scaled_h = max(1, int(math.floor(dims.height * scale + 0.5)))
    # Rounding can never overshoot: dims*scale <= target on both axes.
    pad_w = target.width - scaled_w
    pad_h = target.height - scaled_h
    pad_left = pad_w // 2
    pad_top = pad_h // 2
    return ResizePadPlan(
        scale=scale,
        scaled_width=scaled_w,
        scaled_height=scaled_h,
        pad_left=pad_left,
        pad_top=pad_top,
        pad_right=pad_w - pad_left,
        pad_bottom=pad_h - pad_top,
    )
