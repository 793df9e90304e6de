"""Variance-preserving diffusion scheduler math with a plug-in predictor.

Implements forward noising z_t = alpha_t * z + sigma_t * eps, the
v-parameterization target v_t = alpha_t * eps - sigma_t * z and its inverse
conversions, deterministic reverse sampling (eta = 0), and multi-resolution
pyramid noise. No neural network is involved: the sampler accepts any
callable predictor(z_t, t, cond) -> v, including analytic oracles.

Timesteps run t = 0 (clean, alpha=1, sigma=0) to t = T (fully noised).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import ImageDims

__all__ = [
    "NoiseSchedule",
    "make_schedule",
    "forward_diffuse",
    "v_target",
    "v_to_eps",
    "v_to_clean",
    "sample",
    "multires_noise",
    "multires_effective_levels",
]

SCHEDULE_KINDS = ("linear-beta", "cosine")


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step coefficients alpha[t], sigma[t] for t in [0, T], with
    alpha strictly decreasing from 1, sigma strictly increasing from 0,
    and alpha^2 + sigma^2 = 1 everywhere."""

    T: int
    alpha: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if alpha.shape != (self.T + 1,) or sigma.shape != (self.T + 1,):
            raise ValueError("alpha and sigma must have shape (T + 1,)")
        if alpha[0] != 1.0 or sigma[0] != 0.0:
            raise ValueError("clean endpoint requires alpha[0] = 1, sigma[0] = 0")
        if np.any(np.diff(alpha) >= 0):
            raise ValueError("alpha must be strictly decreasing")
        if np.any(np.diff(sigma) <= 0):
            raise ValueError("sigma must be strictly increasing")
        if np.max(np.abs(alpha**2 + sigma**2 - 1.0)) > 1e-12:
            raise ValueError("schedule is not variance preserving")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", sigma)


def make_schedule(T: int, kind: str = "cosine") -> NoiseSchedule:
    """Build a variance-preserving schedule of the given kind."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if kind == "linear-beta":
        betas = np.linspace(1e-4, 0.02, T)
        alpha_bar = np.cumprod(1.0 - betas)
        alpha = np.concatenate([[1.0], np.sqrt(alpha_bar)])
    elif kind == "cosine":
        s = 0.008
        ts = np.arange(T + 1, dtype=np.float64) / T
        f = np.cos((ts + s) / (1.0 + s) * (math.pi / 2.0)) ** 2
        alpha = np.sqrt(f / f[0])
    else:
        raise ValueError(f"unknown schedule kind {kind!r}, expected one of {SCHEDULE_KINDS}")
    sigma = np.sqrt(1.0 - alpha**2)
    return NoiseSchedule(T=T, alpha=alpha, sigma=sigma)


def _coeffs(sched: NoiseSchedule, t: int) -> tuple[float, float]:
    if not (0 <= t <= sched.T):
        raise ValueError(f"t must be in [0, {sched.T}], got {t}")
    return float(sched.alpha[t]), float(sched.sigma[t])


def _check_same_shape(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def forward_diffuse(z, eps, t: int, sched: NoiseSchedule) -> np.ndarray:
    z, eps = _check_same_shape(z, eps)
    alpha, sigma = _coeffs(sched, t)
    return alpha * z + sigma * eps


def v_target(z, eps, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Prediction target of the v-parameterization."""
    z, eps = _check_same_shape(z, eps)
    alpha, sigma = _coeffs(sched, t)
    return alpha * eps - sigma * z


def v_to_eps(z_t, v, t: int, sched: NoiseSchedule) -> np.ndarray:
    z_t, v = _check_same_shape(z_t, v)
    alpha, sigma = _coeffs(sched, t)
    return sigma * z_t + alpha * v


def v_to_clean(z_t, v, t: int, sched: NoiseSchedule) -> np.ndarray:
    z_t, v = _check_same_shape(z_t, v)
    alpha, sigma = _coeffs(sched, t)
    return alpha * z_t - sigma * v


def _sample_timesteps(T: int, steps: int) -> list[int]:
    # Integer spacing guarantees a strictly decreasing ladder T -> 0.
    return [(T * (steps - i)) // steps for i in range(steps + 1)]


def sample(predictor, z_T, sched: NoiseSchedule, steps: int, cond=None) -> np.ndarray:
    """Deterministic reverse process from z_T down to the clean estimate.

    Each step converts the predicted v into clean/noise estimates and
    re-noises to the next (lower) timestep; steps=1 collapses to a single
    v_to_clean call.
    """
    if not (1 <= steps <= sched.T):
        raise ValueError(f"steps must be in [1, {sched.T}], got {steps}")
    z = np.asarray(z_T, dtype=np.float64)
    ts = _sample_timesteps(sched.T, steps)
    for t, t_next in zip(ts[:-1], ts[1:]):
        v = np.asarray(predictor(z, t, cond), dtype=np.float64)
        if v.shape != z.shape:
            raise ValueError(f"predictor returned shape {v.shape}, expected {z.shape}")
        clean = v_to_clean(z, v, t, sched)
        eps_hat = v_to_eps(z, v, t, sched)
        alpha_next, sigma_next = _coeffs(sched, t_next)
        z = alpha_next * clean + sigma_next * eps_hat
    return z


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear upsampling of an (h, w, c) array (half-pixel centers)."""
    h, w = img.shape[:2]
    src_y = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (src_y - y0)[:, None, None]
    wx = (src_x - x0)[None, :, None]
    top = img[y0][:, x0] * (1.0 - wx) + img[y0][:, x1] * wx
    bottom = img[y1][:, x0] * (1.0 - wx) + img[y1][:, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def multires_effective_levels(dims: ImageDims, levels: int) -> int:
    """Levels actually usable: every pyramid level must keep dims >= 2."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    max_levels = int(math.floor(math.log2(min(dims.width, dims.height))))
    return max(1, min(levels, max_levels))


def multires_noise(
    dims: ImageDims,
    channels: int = 3,
    levels: int = 4,
    decay: float = 0.5,
    seed: int = 0,
) -> np.ndarray:
    """Gaussian noise summed over a spatial pyramid, unit empirical variance.

    Level k draws white noise at dims / 2^k, bilinearly upsampled and
    weighted by decay^k; the sum is rescaled by its own standard deviation.
    Levels that would shrink a side below 2 pixels are clamped away (see
    multires_effective_levels). Deterministic per seed; shape (H, W, C).
    """
    if channels < 1:
        raise ValueError("channels must be >= 1")
    if not (0.0 < decay <= 1.0):
        raise ValueError("decay must be in (0, 1]")
    effective = multires_effective_levels(dims, levels)
    h, w = dims.height, dims.width
    rng = np.random.default_rng(seed)
    field = rng.standard_normal((h, w, channels))
    for k in range(1, effective):
        small = rng.standard_normal((h >> k, w >> k, channels))
        field += (decay**k) * _bilinear_resize(small, h, w)
    std = field.std()
    if std > 0:
        field /= std
    return field
