"""Inversion of (noisy) camera images back to numerical intrinsics.

Each pixel of a camera image yields one sample on each of two lines:

    u = fx * tan(theta) + cx
    v = fy * (1 / (cos(theta) * tan(phi))) + cy

so the focal lengths and principal point are the slopes and intercepts of
per-axis robust line fits. Fitting runs RANSAC over two-point hypotheses
with an optional ordinary-least-squares refinement on the inliers.

Determinism: all trial samples are drawn up-front from the configured seed
and hypotheses are scored in bulk, so results are independent of evaluation
order (parallel scoring would give the same answer as sequential).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Intrinsics
from .camera_image import CameraImage

__all__ = [
    "RansacConfig",
    "LineFit",
    "RansacReport",
    "CalibError",
    "RansacFailureError",
    "pixel_abscissas",
    "solve_two_point",
    "ransac_line",
    "recover_intrinsics",
    "ensemble",
    "calib_error",
]

# Two-point hypotheses with abscissas closer than this are rejected.
DEGENERACY_EPS = 1e-6

_HALF_PI = math.pi / 2.0


class RansacFailureError(RuntimeError):
    """No line hypothesis reached the required inlier fraction."""

    def __init__(self, message: str, *, best_inlier_count: int, required: int, n_points: int):
        super().__init__(message)
        self.best_inlier_count = best_inlier_count
        self.required = required
        self.n_points = n_points


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 512
    inlier_threshold: float = 2.0  # pixels
    min_inlier_fraction: float = 0.5
    seed: int = 0
    refine: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not (0.0 < self.min_inlier_fraction <= 1.0):
            raise ValueError("min_inlier_fraction must be in (0, 1]")


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    inlier_mask: np.ndarray
    rms_residual: float
    n_points: int

    @property
    def inlier_count(self) -> int:
        return int(np.count_nonzero(self.inlier_mask))


@dataclass(frozen=True)
class RansacReport:
    x_fit: LineFit
    y_fit: LineFit
    n_samples: int
    n_dropped_x: int
    n_dropped_y: int


@dataclass(frozen=True)
class CalibError:
    e_f: float
    e_b: float


def pixel_abscissas(theta, phi):
    """Line abscissas (a_u, a_v) for camera-image values at one or many pixels.

    a_u = tan(theta); a_v = 1 / (cos(theta) * tan(phi)), computed as
    cos(phi) / (cos(theta) * sin(phi)) which is finite on all of phi in
    (0, pi) and crosses zero at phi = pi/2.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(theta <= -_HALF_PI) or np.any(theta >= _HALF_PI):
        raise ValueError("theta must lie in the open interval (-pi/2, pi/2)")
    if np.any(phi <= 0.0) or np.any(phi >= math.pi):
        raise ValueError("phi must lie in the open interval (0, pi)")
    a_u = np.tan(theta)
    a_v = np.cos(phi) / (np.cos(theta) * np.sin(phi))
    return a_u, a_v


def solve_two_point(p1, p2) -> tuple[float, float]:
    """Exact line through two (abscissa, coordinate) samples.

    Returns (slope, intercept); the caller decides whether a non-positive
    slope (impossible focal length) is acceptable. Raises on near-equal
    abscissas.
    """
    a1, c1 = float(p1[0]), float(p1[1])
    a2, c2 = float(p2[0]), float(p2[1])
    if abs(a1 - a2) <= DEGENERACY_EPS:
        raise ValueError(f"degenerate sample pair: abscissas {a1} and {a2}")
    slope = (c2 - c1) / (a2 - a1)
    return slope, c1 - slope * a1


def _ols_line(a: np.ndarray, c: np.ndarray) -> tuple[float, float]:
    a_mean = a.mean()
    c_mean = c.mean()
    da = a - a_mean
    var = np.dot(da, da)
    if var <= 0.0:
        raise ValueError("degenerate abscissas for least squares")
    slope = float(np.dot(da, c - c_mean) / var)
    return slope, float(c_mean - slope * a_mean)


def ransac_line(points, cfg: RansacConfig, rng: np.random.Generator | None = None):
    """Robust positive-slope line fit over (abscissa, coordinate) samples.

    Scores `cfg.iterations` two-point hypotheses and keeps the one with the
    most inliers (|coord - (slope*a + intercept)| <= threshold); first best
    wins on ties. With cfg.refine the inliers are re-fit by ordinary least
    squares. Raises RansacFailureError when no hypothesis reaches
    max(2, min_inlier_fraction * n) inliers.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {points.shape}")
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    a = np.ascontiguousarray(points[:, 0])
    c = np.ascontiguousarray(points[:, 1])

    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    i = rng.integers(0, n, size=cfg.iterations)
    j = rng.integers(0, n - 1, size=cfg.iterations)
    j = j + (j >= i)  # distinct pair, still uniform

    da = a[j] - a[i]
    valid = np.abs(da) > DEGENERACY_EPS
    safe_da = np.where(valid, da, 1.0)
    slopes = (c[j] - c[i]) / safe_da
    intercepts = c[i] - slopes * a[i]
    valid &= slopes > 0.0  # focal positivity

    counts = np.full(cfg.iterations, -1, dtype=np.int64)
    valid_idx = np.flatnonzero(valid)
    # Chunked scoring keeps the residual matrix bounded (~32 MB of float64).
    chunk = max(1, 4_000_000 // n)
    for start in range(0, valid_idx.size, chunk):
        idx = valid_idx[start : start + chunk]
        resid = np.abs(c[None, :] - (slopes[idx, None] * a[None, :] + intercepts[idx, None]))
        counts[idx] = (resid <= cfg.inlier_threshold).sum(axis=1)

    required = max(2, math.ceil(cfg.min_inlier_fraction * n))
    best = int(np.argmax(counts))
    best_count = int(counts[best])
    if best_count < required:
        raise RansacFailureError(
            f"best hypothesis has {best_count}/{n} inliers, "
            f"needs {required} at threshold {cfg.inlier_threshold}",
            best_inlier_count=best_count,
            required=required,
            n_points=n,
        )

    slope = float(slopes[best])
    intercept = float(intercepts[best])
    resid = np.abs(c - (slope * a + intercept))
    mask = resid <= cfg.inlier_threshold

    if cfg.refine:
        refined_slope, refined_intercept = _ols_line(a[mask], c[mask])
        if refined_slope > 0.0:
            refined_resid = np.abs(c - (refined_slope * a + refined_intercept))
            refined_mask = refined_resid <= cfg.inlier_threshold
            if np.count_nonzero(refined_mask) >= 2:
                slope, intercept = refined_slope, refined_intercept
                resid, mask = refined_resid, refined_mask

    rms = float(np.sqrt(np.mean(resid[mask] ** 2)))
    return LineFit(slope, intercept, mask, rms, n)


def _grid_indices(size: int, max_samples: int) -> np.ndarray:
    if size <= max_samples:
        return np.arange(size)
    return np.round(np.linspace(0, size - 1, max_samples)).astype(np.int64)


def recover_intrinsics(
    ci: CameraImage,
    cfg: RansacConfig = RansacConfig(),
    *,
    sample_grid: int = 64,
    use_all_pixels: bool = False,
) -> tuple[Intrinsics, RansacReport]:
    """Recover (fx, fy, cx, cy) from a camera image by per-axis RANSAC.

    By default samples a uniform grid of at most sample_grid x sample_grid
    pixel positions; use_all_pixels=True fits on every pixel instead.
    Samples whose theta/phi fall outside the representable open ranges
    (possible for noisy inputs) are dropped and counted in the report.
    """
    h, w = ci.height, ci.width
    if use_all_pixels:
        us = np.arange(w)
        vs = np.arange(h)
    else:
        if sample_grid < 2:
            raise ValueError("sample_grid must be >= 2")
        us = _grid_indices(w, sample_grid)
        vs = _grid_indices(h, sample_grid)

    theta = ci.theta[np.ix_(vs, us)]
    phi = ci.phi[np.ix_(vs, us)]
    uu = np.broadcast_to(us.astype(np.float64), theta.shape)
    vv = np.broadcast_to(vs.astype(np.float64)[:, None], theta.shape)
    n_samples = theta.size

    ok_theta = np.isfinite(theta) & (theta > -_HALF_PI) & (theta < _HALF_PI)
    ok_phi = np.isfinite(phi) & (phi > 0.0) & (phi < math.pi)
    ok_y = ok_theta & ok_phi

    x_points = np.column_stack([np.tan(theta[ok_theta]), uu[ok_theta]])
    a_v = np.cos(phi[ok_y]) / (np.cos(theta[ok_y]) * np.sin(phi[ok_y]))
    y_points = np.column_stack([a_v, vv[ok_y]])

    seed_x, seed_y = np.random.SeedSequence(cfg.seed).spawn(2)
    try:
        x_fit = ransac_line(x_points, cfg, rng=np.random.default_rng(seed_x))
    except (RansacFailureError, ValueError) as exc:
        raise RansacFailureError(
            f"x-axis fit failed: {exc}",
            best_inlier_count=getattr(exc, "best_inlier_count", 0),
            required=getattr(exc, "required", 2),
            n_points=len(x_points),
        ) from exc
    try:
        y_fit = ransac_line(y_points, cfg, rng=np.random.default_rng(seed_y))
    except (RansacFailureError, ValueError) as exc:
        raise RansacFailureError(
            f"y-axis fit failed: {exc}",
            best_inlier_count=getattr(exc, "best_inlier_count", 0),
            required=getattr(exc, "required", 2),
            n_points=len(y_points),
        ) from exc

    K = Intrinsics(fx=x_fit.slope, fy=y_fit.slope, cx=x_fit.intercept, cy=y_fit.intercept)
    report = RansacReport(
        x_fit=x_fit,
        y_fit=y_fit,
        n_samples=n_samples,
        n_dropped_x=int(n_samples - np.count_nonzero(ok_theta)),
        n_dropped_y=int(n_samples - np.count_nonzero(ok_y)),
    )
    return K, report


def ensemble(images) -> CameraImage:
    """Per-pixel, per-channel mean of several camera images of equal dims."""
    images = list(images)
    if not images:
        raise ValueError("ensemble needs at least one image")
    shape = (images[0].height, images[0].width)
    for im in images:
        if (im.height, im.width) != shape:
            raise ValueError("ensemble images must share dims")
    theta = np.mean([im.theta for im in images], axis=0)
    phi = np.mean([im.phi for im in images], axis=0)
    gray = np.mean([im.gray for im in images], axis=0)
    return CameraImage(theta, phi, gray)


def calib_error(K_pred: Intrinsics, K_gt: Intrinsics, dims) -> CalibError:
    """Relative focal error and dimension-normalized principal-point error."""
    e_f = max(
        abs(K_pred.fx - K_gt.fx) / K_gt.fx,
        abs(K_pred.fy - K_gt.fy) / K_gt.fy,
    )
    e_b = max(
        2.0 * abs(K_pred.cx - K_gt.cx) / dims.width,
        2.0 * abs(K_pred.cy - K_gt.cy) / dims.height,
    )
    return CalibError(e_f=e_f, e_b=e_b)
