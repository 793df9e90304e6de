"""Dense pseudo-spherical encoding of pinhole intrinsics.

A camera image stores, per pixel, the azimuth and elevation of the unit
viewing ray plus the scene's grayscale value as a third channel:

    theta = arctan(r1 / r3)     azimuth, constant down each column
    phi   = arccos(r2)          elevation
    g                           grayscale in [0, 1]

For exact encodings theta depends only on u and the quantity
1 / (cos(theta) * tan(phi)) depends only on v, which is what makes the
representation invertible by per-axis line fitting (see `recovery`).

Also provides the unit-ray ("incidence map") baseline representation, the
[-1, 1] normalization used for storage/quantization, an 8-bit quantizer,
and the CAMI container format (bit-exact float32 round trip).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .camera import ImageDims, Intrinsics

__all__ = [
    "CameraImage",
    "IncidenceMap",
    "ChannelVariant",
    "CamiFormatError",
    "rgb_to_gray",
    "encode",
    "encode_variant",
    "encode_incidence",
    "theta_phi_to_ray",
    "ray_to_theta_phi",
    "normalize",
    "denormalize",
    "quantize_u8",
    "dequantize_u8",
    "write_cami",
    "read_cami",
]

# Rec. 601 luma weights.
_GRAY_WEIGHTS = (0.299, 0.587, 0.114)

_CAMI_MAGIC = b"CAMI"
_CAMI_VERSION = 1
# magic, version u16, width u32, height u32, channels u8, 5 reserved bytes
_CAMI_HEADER = struct.Struct("<4sHIIB5s")


class CamiFormatError(ValueError):
    """Raised when a CAMI file is malformed or truncated."""


def _as_2d_float(name: str, arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class CameraImage:
    """Three per-pixel channels: azimuth theta, elevation phi (radians), gray.

    Exact encodings keep theta in (-pi/2, pi/2) and phi in (0, pi); noisy or
    predicted images may stray slightly outside, so the ranges are not
    enforced here (recovery drops out-of-range samples instead).
    """

    theta: np.ndarray
    phi: np.ndarray
    gray: np.ndarray

    def __post_init__(self):
        theta = _as_2d_float("theta", self.theta)
        phi = _as_2d_float("phi", self.phi)
        gray = _as_2d_float("gray", self.gray)
        if theta.shape != phi.shape or theta.shape != gray.shape:
            raise ValueError(
                f"channel shapes differ: {theta.shape}, {phi.shape}, {gray.shape}"
            )
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "gray", gray)

    @property
    def width(self) -> int:
        return self.theta.shape[1]

    @property
    def height(self) -> int:
        return self.theta.shape[0]

    def channels(self) -> np.ndarray:
        """Channels stacked on the last axis, shape (H, W, 3)."""
        return np.stack([self.theta, self.phi, self.gray], axis=-1)

    def crop(self, x0: int, y0: int, width: int, height: int) -> "CameraImage":
        if x0 < 0 or y0 < 0 or x0 + width > self.width or y0 + height > self.height:
            raise ValueError("crop window outside image")
        return CameraImage(
            self.theta[y0 : y0 + height, x0 : x0 + width].copy(),
            self.phi[y0 : y0 + height, x0 : x0 + width].copy(),
            self.gray[y0 : y0 + height, x0 : x0 + width].copy(),
        )


@dataclass(frozen=True)
class IncidenceMap:
    """Per-pixel unit viewing rays, shape (H, W, 3), forward-facing."""

    rays: np.ndarray

    def __post_init__(self):
        rays = np.asarray(self.rays, dtype=np.float64)
        if rays.ndim != 3 or rays.shape[-1] != 3:
            raise ValueError(f"rays must have shape (H, W, 3), got {rays.shape}")
        norms = np.linalg.norm(rays, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("rays must have unit norm (within 1e-6)")
        if np.any(rays[..., 2] <= 0):
            raise ValueError("rays must be forward-facing (third component > 0)")
        object.__setattr__(self, "rays", rays)

    @property
    def width(self) -> int:
        return self.rays.shape[1]

    @property
    def height(self) -> int:
        return self.rays.shape[0]


@dataclass(frozen=True)
class ChannelVariant:
    """Choice of third channel: 'grayscale', 'duplicate-theta', or 'constant'."""

    kind: str
    value: float = 0.0

    _KINDS = ("grayscale", "duplicate-theta", "constant")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown variant {self.kind!r}, expected one of {self._KINDS}")

    @classmethod
    def grayscale(cls) -> "ChannelVariant":
        return cls("grayscale")

    @classmethod
    def duplicate_theta(cls) -> "ChannelVariant":
        return cls("duplicate-theta")

    @classmethod
    def constant(cls, value: float) -> "ChannelVariant":
        return cls("constant", float(value))


def rgb_to_gray(rgb) -> np.ndarray:
    """Rec. 601 luma of an (H, W, 3) image with channels in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) rgb image, got shape {rgb.shape}")
    wr, wg, wb = _GRAY_WEIGHTS
    return wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]


def _ray_grid(K: Intrinsics, dims: ImageDims):
    """Normalized pixel offsets x(u), y(v) and the per-pixel ray norm."""
    xs = (np.arange(dims.width, dtype=np.float64) - K.cx) / K.fx
    ys = (np.arange(dims.height, dtype=np.float64) - K.cy) / K.fy
    norm = np.sqrt(xs[None, :] ** 2 + ys[:, None] ** 2 + 1.0)
    return xs, ys, norm


def encode(K: Intrinsics, dims: ImageDims, gray) -> CameraImage:
    """Encode intrinsics (+ grayscale) into a camera image.

    theta is computed once per column so that column constancy holds exactly
    in double precision.
    """
    gray = _as_2d_float("gray", gray)
    if gray.shape != (dims.height, dims.width):
        raise ValueError(
            f"gray shape {gray.shape} does not match dims {dims.height}x{dims.width}"
        )
    xs, ys, norm = _ray_grid(K, dims)
    theta = np.broadcast_to(np.arctan(xs), (dims.height, dims.width)).copy()
    r2 = np.clip(ys[:, None] / norm, -1.0, 1.0)
    phi = np.arccos(r2)
    return CameraImage(theta, phi, gray.copy())


def encode_variant(K: Intrinsics, dims: ImageDims, gray, variant: ChannelVariant) -> CameraImage:
    """Encode with an alternative third channel (ablation variants)."""
    if variant.kind == "grayscale":
        return encode(K, dims, gray)
    base = encode(K, dims, np.zeros((dims.height, dims.width)))
    if variant.kind == "duplicate-theta":
        third = base.theta.copy()
    else:
        third = np.full((dims.height, dims.width), variant.value, dtype=np.float64)
    return CameraImage(base.theta, base.phi, third)


def encode_incidence(K: Intrinsics, dims: ImageDims) -> IncidenceMap:
    """Baseline representation: the unit viewing ray stored per pixel."""
    xs, ys, norm = _ray_grid(K, dims)
    rays = np.empty((dims.height, dims.width, 3), dtype=np.float64)
    rays[..., 0] = xs[None, :] / norm
    rays[..., 1] = ys[:, None] / norm
    rays[..., 2] = 1.0 / norm
    return IncidenceMap(rays)


def theta_phi_to_ray(theta, phi) -> np.ndarray:
    """Unit ray from (azimuth, elevation); inverse of `ray_to_theta_phi`."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    sin_phi = np.sin(phi)
    return np.stack(
        [sin_phi * np.sin(theta), np.cos(phi), sin_phi * np.cos(theta)], axis=-1
    )


def ray_to_theta_phi(rays) -> tuple[np.ndarray, np.ndarray]:
    rays = np.asarray(rays, dtype=np.float64)
    theta = np.arctan2(rays[..., 0], rays[..., 2])
    phi = np.arccos(np.clip(rays[..., 1], -1.0, 1.0))
    return theta, phi


def normalize(ci: CameraImage) -> np.ndarray:
    """Map channels into [-1, 1]: theta/pi, phi/pi, 2g - 1. Shape (H, W, 3)."""
    return np.stack(
        [ci.theta / np.pi, ci.phi / np.pi, 2.0 * ci.gray - 1.0], axis=-1
    )


def denormalize(arr) -> CameraImage:
    """Exact inverse of `normalize`."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
    return CameraImage(
        arr[..., 0] * np.pi, arr[..., 1] * np.pi, (arr[..., 2] + 1.0) / 2.0
    )


def quantize_u8(arr) -> np.ndarray:
    """Affine map [-1, 1] -> {0..255}, rounding half away from zero."""
    arr = np.asarray(arr, dtype=np.float64)
    if np.any(arr < -1.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise ValueError("quantize_u8 input must lie in [-1, 1]")
    # Values are mapped to [0, 255] first, so half-away-from-zero == half-up.
    return np.floor((arr + 1.0) * (255.0 / 2.0) + 0.5).astype(np.uint8)


def dequantize_u8(q) -> np.ndarray:
    """Map 8-bit codes back to the bin centers in [-1, 1]."""
    q = np.asarray(q)
    if q.dtype != np.uint8:
        raise ValueError(f"expected uint8 input, got dtype {q.dtype}")
    return q.astype(np.float64) * (2.0 / 255.0) - 1.0


def write_cami(path, ci: CameraImage) -> None:
    """Write the CAMI container: header + 3 float32 channel planes (LE, row-major)."""
    if ci.width > 0xFFFFFFFF or ci.height > 0xFFFFFFFF:
        raise CamiFormatError(f"dims {ci.width}x{ci.height} overflow the u32 header")
    header = _CAMI_HEADER.pack(
        _CAMI_MAGIC, _CAMI_VERSION, ci.width, ci.height, 3, b"\x00" * 5
    )
    planes = np.stack(
        [
            np.ascontiguousarray(ci.theta, dtype="<f4"),
            np.ascontiguousarray(ci.phi, dtype="<f4"),
            np.ascontiguousarray(ci.gray, dtype="<f4"),
        ]
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(planes.tobytes())


def read_cami(path) -> CameraImage:
    """Read a CAMI file; channel data comes back as float32, bit-exact."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _CAMI_HEADER.size:
        raise CamiFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, width, height, channels, _reserved = _CAMI_HEADER.unpack_from(raw)
    if magic != _CAMI_MAGIC:
        raise CamiFormatError(f"{path}: bad magic {magic!r}")
    if version != _CAMI_VERSION:
        raise CamiFormatError(f"{path}: unsupported version {version}")
    if channels != 3:
        raise CamiFormatError(f"{path}: expected 3 channels, got {channels}")
    expected = _CAMI_HEADER.size + 3 * width * height * 4
    if len(raw) != expected:
        raise CamiFormatError(
            f"{path}: expected {expected} bytes for {width}x{height}, got {len(raw)}"
        )
    planes = np.frombuffer(raw, dtype="<f4", offset=_CAMI_HEADER.size).reshape(
        3, height, width
    )
    return CameraImage(planes[0].copy(), planes[1].copy(), planes[2].copy())
