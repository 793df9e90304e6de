"""Robustness-sweep simulator: perturb exact camera images with controlled
noise, optionally ensemble several noisy copies, and measure how well the
intrinsics survive recovery.

Noise kinds:
  gaussian  additive N(0, level) on the theta/phi channels
  multires  pyramid noise scaled by level on theta/phi
  quantize  8-bit quantization round trip (level recorded but unused)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import ImageDims
from .camera_image import (
    CameraImage,
    denormalize,
    dequantize_u8,
    normalize,
    quantize_u8,
)
from .diffusion import multires_noise
from .recovery import RansacConfig, ensemble, recover_intrinsics

__all__ = ["SweepSpec", "NOISE_KINDS", "apply_noise", "noisy_ensemble", "recover_noisy"]

NOISE_KINDS = ("gaussian", "multires", "quantize")


@dataclass(frozen=True)
class SweepSpec:
    kinds: tuple = NOISE_KINDS
    levels: tuple = (0.0, 0.01, 0.02, 0.05)
    seeds: tuple = tuple(range(10))
    ensemble_size: int = 1
    ransac: RansacConfig = field(default_factory=RansacConfig)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("levels must be non-empty")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        for kind in self.kinds:
            if kind not in NOISE_KINDS:
                raise ValueError(f"unknown noise kind {kind!r}, expected one of {NOISE_KINDS}")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")


def apply_noise(ci: CameraImage, kind: str, level: float, seed) -> CameraImage:
    """One perturbed copy of a camera image; deterministic per seed."""
    if kind == "gaussian":
        if level == 0.0:
            return ci
        rng = np.random.default_rng(seed)
        shape = ci.theta.shape
        return CameraImage(
            ci.theta + rng.normal(0.0, level, shape),
            ci.phi + rng.normal(0.0, level, shape),
            ci.gray,
        )
    if kind == "multires":
        if level == 0.0:
            return ci
        dims = ImageDims(ci.width, ci.height)
        noise = multires_noise(dims, channels=2, seed=seed)
        return CameraImage(
            ci.theta + level * noise[..., 0],
            ci.phi + level * noise[..., 1],
            ci.gray,
        )
    if kind == "quantize":
        return denormalize(dequantize_u8(quantize_u8(normalize(ci))))
    raise ValueError(f"unknown noise kind {kind!r}")


def noisy_ensemble(ci: CameraImage, kind: str, level: float, seed, size: int) -> CameraImage:
    """Mean of `size` independently perturbed copies (substreams of `seed`)."""
    if size == 1:
        return apply_noise(ci, kind, level, seed)
    children = np.random.SeedSequence(seed).spawn(size)
    return ensemble([apply_noise(ci, kind, level, child) for child in children])


def recover_noisy(
    ci: CameraImage,
    kind: str,
    level: float,
    seed,
    cfg: RansacConfig,
    ensemble_size: int = 1,
):
    """Perturb, optionally ensemble, then recover; returns (Intrinsics, report)."""
    noisy = noisy_ensemble(ci, kind, level, seed, ensemble_size)
    return recover_intrinsics(noisy, cfg)
