"""Manifest-driven dataset ingestion.

A manifest is line-delimited JSON: one record per line with named fields,
so it stays greppable, streamable, and append-friendly. Principal points
are interpreted in the convention declared on the command line
(pixel-center by default); records themselves store raw numbers.

Depth files are either 16-bit (or 8-bit) single-channel PNG scaled by
depth_scale (meters per stored unit), or a raw float32 dump with an
8-byte dims header (little-endian u32 width, u32 height, then row-major
float32 data), also scaled by depth_scale.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .camera import ImageDims, Intrinsics
from .camera_image import rgb_to_gray

__all__ = [
    "ManifestRecord",
    "read_manifest",
    "write_manifest",
    "resolve_path",
    "load_gray",
    "read_depth",
    "write_depth_raw",
    "read_depth_raw",
    "write_depth_png16",
    "load_mask",
]

_RAW_HEADER = struct.Struct("<II")


@dataclass(frozen=True)
class ManifestRecord:
    image_path: str
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    depth_path: Optional[str] = None
    depth_scale: float = 1.0
    mask_path: Optional[str] = None
    scene: Optional[str] = None
    pred_depth_path: Optional[str] = None
    pred_depth_scale: float = 1.0

    def __post_init__(self):
        if not self.image_path:
            raise ValueError("image_path must be non-empty")
        # Reuse the intrinsics/dims invariants.
        Intrinsics(self.fx, self.fy, self.cx, self.cy)
        ImageDims(self.width, self.height)
        if self.depth_path is not None and self.depth_scale <= 0:
            raise ValueError("depth_scale must be positive when depth is present")
        if self.pred_depth_path is not None and self.pred_depth_scale <= 0:
            raise ValueError("pred_depth_scale must be positive when present")
        if self.scene is not None and self.scene not in ("indoor", "outdoor"):
            raise ValueError(f"scene must be 'indoor' or 'outdoor', got {self.scene!r}")

    @property
    def key(self) -> str:
        """Join key used across command outputs: the image filename stem."""
        return Path(self.image_path).stem

    def intrinsics(self) -> Intrinsics:
        return Intrinsics(self.fx, self.fy, self.cx, self.cy)

    def dims(self) -> ImageDims:
        return ImageDims(self.width, self.height)


def read_manifest(path) -> list[ManifestRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                fields = json.loads(line)
                records.append(ManifestRecord(**fields))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest record: {exc}") from exc
    return records


def resolve_path(manifest_path, record_path) -> Path:
    """Relative record paths resolve against the manifest's directory."""
    p = Path(record_path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


def write_manifest(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            fields = {k: v for k, v in asdict(record).items() if v is not None}
            f.write(json.dumps(fields) + "\n")


def load_gray(path) -> np.ndarray:
    """Load an image as float grayscale in [0, 1] (Rec. 601 luma)."""
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return rgb_to_gray(rgb)


def write_depth_raw(path, depth) -> None:
    depth = np.asarray(depth, dtype="<f4")
    if depth.ndim != 2:
        raise ValueError(f"depth must be 2-D, got shape {depth.shape}")
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(_RAW_HEADER.pack(w, h))
        f.write(np.ascontiguousarray(depth).tobytes())


def read_depth_raw(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _RAW_HEADER.size:
        raise ValueError(f"{path}: truncated raw depth header")
    w, h = _RAW_HEADER.unpack_from(raw)
    expected = _RAW_HEADER.size + w * h * 4
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {w}x{h}, got {len(raw)}")
    return (
        np.frombuffer(raw, dtype="<f4", offset=_RAW_HEADER.size)
        .reshape(h, w)
        .astype(np.float64)
    )


def write_depth_png16(path, depth, scale: float) -> None:
    """Store depth / scale as 16-bit PNG (values clipped to the u16 range)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    stored = np.clip(np.round(np.asarray(depth, dtype=np.float64) / scale), 0, 65535)
    Image.fromarray(stored.astype(np.uint16)).save(path)


def read_depth(path, scale: float = 1.0) -> np.ndarray:
    """Read a depth file (PNG or raw float32) and convert to meters."""
    path = str(path)
    if path.lower().endswith(".png"):
        with Image.open(path) as img:
            stored = np.asarray(img, dtype=np.float64)
        if stored.ndim != 2:
            raise ValueError(f"{path}: depth PNG must be single-channel")
        return stored * scale
    return read_depth_raw(path) * scale


def load_mask(path) -> np.ndarray:
    """Boolean mask from an image file: nonzero pixels are valid."""
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr != 0
