import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from camcal.camera import ImageDims, Intrinsics
from camcal.camera_image import encode


@pytest.fixture
def default_K():
    return Intrinsics(500.0, 500.0, 320.0, 240.0)


@pytest.fixture
def default_dims():
    return ImageDims(640, 480)


@pytest.fixture
def default_gray(default_dims):
    rng = np.random.default_rng(0)
    return rng.uniform(0.0, 1.0, (default_dims.height, default_dims.width))


@pytest.fixture
def default_ci(default_K, default_dims, default_gray):
    return encode(default_K, default_dims, default_gray)


def make_dataset(root: Path, n_records: int = 3, width: int = 96, height: int = 64):
    """Write synthetic images plus a manifest; returns the manifest path."""
    rng = np.random.default_rng(1234)
    img_dir = root / "imgs"
    img_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(n_records):
        pixels = rng.integers(0, 256, (height, width, 3), dtype=np.uint8)
        Image.fromarray(pixels, "RGB").save(img_dir / f"rec{i:03d}.png")
        records.append(
            {
                "image_path": str(img_dir / f"rec{i:03d}.png"),
                "fx": 0.8 * width + 7.0 * i,
                "fy": 1.1 * width - 3.0 * i,
                "cx": width / 2 - 0.5 + 0.3 * i,
                "cy": height / 2 - 0.5 - 0.2 * i,
                "width": width,
                "height": height,
            }
        )
    manifest = root / "manifest.jsonl"
    with open(manifest, "w") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")
    return manifest
