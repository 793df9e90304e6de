"""Depth + intrinsics to point clouds, metrology, and similarity alignment.

The similarity convention follows sigma * (R @ x + t): scale applied outside
the rigid motion. The closed-form solver works in the usual Umeyama
parameterization (c * R @ x + t') internally and converts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .camera import Intrinsics
from .depth import DepthMap

__all__ = [
    "PointCloud",
    "SimilarityTransform",
    "PoseError",
    "DegenerateGeometryError",
    "unproject",
    "project",
    "metrology_distance",
    "procrustes",
    "pose_error",
    "mean_relative_distance",
    "write_ply",
    "read_ply",
]


class DegenerateGeometryError(ValueError):
    """Point configuration does not determine the requested quantity."""


@dataclass(frozen=True)
class PointCloud:
    """3-D points in meters, optionally tagged with their source pixel."""

    points: np.ndarray
    pixels: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", points)
        if self.pixels is not None:
            pixels = np.asarray(self.pixels)
            if pixels.shape != (points.shape[0], 2):
                raise ValueError("pixels must have shape (N, 2)")
            object.__setattr__(self, "pixels", pixels)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SimilarityTransform:
    """x -> sigma * (R @ x + t) with R a proper rotation and sigma > 0."""

    sigma: float
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("R must be (3, 3) and t must be (3,)")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("R must be a proper rotation (det +1)")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.sigma * (points @ self.R.T + self.t)

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class PoseError:
    t_rel: float  # meters
    r_rel: float  # degrees


def unproject(depth: DepthMap, K: Intrinsics) -> PointCloud:
    """Lift every valid depth pixel to a 3-D point; z equals the depth exactly."""
    vs, us = np.nonzero(depth.mask)
    z = depth.depth[vs, us]
    x = (us - K.cx) / K.fx * z
    y = (vs - K.cy) / K.fy * z
    return PointCloud(np.column_stack([x, y, z]), pixels=np.column_stack([us, vs]))


def project(points: np.ndarray, K: Intrinsics) -> np.ndarray:
    """Pixel coordinates (u, v) of 3-D points with positive z."""
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    if np.any(z <= 0):
        raise ValueError("projection requires positive z")
    u = K.fx * points[..., 0] / z + K.cx
    v = K.fy * points[..., 1] / z + K.cy
    return np.stack([u, v], axis=-1)


def metrology_distance(depth: DepthMap, K: Intrinsics, pixel_a, pixel_b) -> float:
    """Euclidean distance in meters between two unprojected pixels."""

    def lift(pixel):
        u, v = int(pixel[0]), int(pixel[1])
        if not (0 <= u < depth.width and 0 <= v < depth.height):
            raise ValueError(f"pixel ({u}, {v}) outside {depth.width}x{depth.height} image")
        if not depth.mask[v, u]:
            raise ValueError(f"pixel ({u}, {v}) has no valid depth")
        d = depth.depth[v, u]
        return np.array([(u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d])

    return float(np.linalg.norm(lift(pixel_a) - lift(pixel_b)))


def procrustes(X1: PointCloud, X2: PointCloud) -> tuple[SimilarityTransform, float]:
    """Closed-form similarity aligning X1 onto X2, with RMS residual.

    Solves min over (sigma, R, t) of sum ||sigma * (R x1 + t) - x2||^2 via
    centroid subtraction and covariance SVD with a reflection guard.
    Requires >= 3 correspondences in a non-collinear configuration.
    """
    x = X1.points
    y = X2.points
    if len(x) != len(y):
        raise ValueError(f"point counts differ: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise DegenerateGeometryError("need at least 3 correspondences")

    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    dx = x - mu_x
    dy = y - mu_y

    cov = dy.T @ dx / n
    if np.linalg.matrix_rank(cov) < 2:
        raise DegenerateGeometryError("rank-deficient (collinear) configuration")
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt

    var_x = float((dx**2).sum() / n)
    scale = float((D * np.diag(S)).sum() / var_x)
    if scale <= 0:
        raise DegenerateGeometryError(f"non-positive scale {scale}")
    shift = mu_y - scale * (R @ mu_x)

    transform = SimilarityTransform(sigma=scale, R=R, t=shift / scale)
    residual = float(np.sqrt(np.mean(np.sum((transform.apply(x) - y) ** 2, axis=1))))
    return transform, residual


def pose_error(P_est: SimilarityTransform, P_gt: SimilarityTransform) -> PoseError:
    """Translation distance and relative rotation angle between two poses."""
    t_rel = float(np.linalg.norm(P_est.t - P_gt.t))
    relative = P_est.R.T @ P_gt.R
    cos_angle = (np.trace(relative) - 1.0) / 2.0
    r_rel = math.degrees(math.acos(min(1.0, max(-1.0, cos_angle))))
    return PoseError(t_rel=t_rel, r_rel=r_rel)


def mean_relative_distance(pred: PointCloud, gt: PointCloud) -> float:
    """Mean correspondence distance after Procrustes alignment, normalized by
    the ground-truth cloud's RMS extent about its centroid."""
    if len(pred) != len(gt):
        raise ValueError(f"point counts differ: {len(pred)} vs {len(gt)}")
    centered = gt.points - gt.points.mean(axis=0)
    extent = float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))
    if extent <= 0:
        raise DegenerateGeometryError("ground-truth cloud has zero extent")
    transform, _ = procrustes(pred, gt)
    aligned = transform.apply(pred.points)
    return float(np.mean(np.linalg.norm(aligned - gt.points, axis=1)) / extent)


def write_ply(path, cloud: PointCloud) -> None:
    """ASCII PLY with float32 x/y/z vertex properties."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    points = cloud.points.astype(np.float32)
    for p in points:
        lines.append(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_ply(path) -> PointCloud:
    """Read an ASCII PLY whose first three vertex properties are x, y, z."""
    with open(path, "r", encoding="ascii") as f:
        if f.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        if not f.readline().strip().startswith("format ascii"):
            raise ValueError(f"{path}: only ASCII PLY is supported")
        n_vertices = None
        properties = []
        for line in f:
            token = line.strip()
            if token == "end_header":
                break
            if token.startswith("element vertex"):
                n_vertices = int(token.split()[-1])
            elif token.startswith("element"):
                raise ValueError(f"{path}: unsupported element {token!r}")
            elif token.startswith("property"):
                properties.append(token.split()[-1])
        else:
            raise ValueError(f"{path}: missing end_header")
        if n_vertices is None:
            raise ValueError(f"{path}: missing vertex element")
        if properties[:3] != ["x", "y", "z"]:
            raise ValueError(f"{path}: expected x y z properties, got {properties}")
        points = np.empty((n_vertices, 3), dtype=np.float64)
        for k in range(n_vertices):
            row = f.readline().split()
            if len(row) < 3:
                raise ValueError(f"{path}: truncated vertex list at row {k}")
            points[k] = [float(row[0]), float(row[1]), float(row[2])]
    return PointCloud(points)
