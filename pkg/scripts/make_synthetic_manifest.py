#!/usr/bin/env python3
"""Generate a synthetic dataset (images, optional plane depth, manifest)
for exercising the camcal CLI without real data.

Example:
    python scripts/make_synthetic_manifest.py --out-dir /tmp/synth --n 10 --with-depth
    camcal encode --manifest /tmp/synth/manifest.jsonl --out-dir /tmp/synth/enc
"""

import argparse
import json
from pathlib import Path

import numpy as np
from PIL import Image

from camcal.manifest import write_depth_raw


def checkerboard(rng, width, height):
    cell = int(rng.integers(4, 13))
    yy, xx = np.mgrid[0:height, 0:width]
    board = ((xx // cell + yy // cell) % 2) * 160 + 40
    texture = rng.integers(0, 56, (height, width, 3))
    return np.clip(board[..., None] + texture, 0, 255).astype(np.uint8)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--width", type=int, default=128)
    ap.add_argument("--height", type=int, default=96)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--with-depth", action="store_true",
                    help="also write fronto-parallel plane depth per record")
    args = ap.parse_args()

    root = Path(args.out_dir)
    (root / "imgs").mkdir(parents=True, exist_ok=True)
    if args.with_depth:
        (root / "depth").mkdir(exist_ok=True)

    rng = np.random.default_rng(args.seed)
    w, h = args.width, args.height
    records = []
    for i in range(args.n):
        name = f"synth{i:03d}"
        Image.fromarray(checkerboard(rng, w, h), "RGB").save(root / "imgs" / f"{name}.png")
        record = {
            "image_path": f"imgs/{name}.png",
            "fx": float(w * rng.uniform(0.4, 3.0)),
            "fy": float(w * rng.uniform(0.4, 3.0)),
            "cx": float((w - 1) / 2 + rng.uniform(-0.1, 0.1) * w),
            "cy": float((h - 1) / 2 + rng.uniform(-0.1, 0.1) * h),
            "width": w,
            "height": h,
        }
        if args.with_depth:
            plane = np.full((h, w), float(rng.uniform(1.0, 6.0)), dtype=np.float32)
            write_depth_raw(root / "depth" / f"{name}.f32", plane)
            record["depth_path"] = f"depth/{name}.f32"
            record["scene"] = "indoor" if rng.uniform() < 0.5 else "outdoor"
        records.append(record)

    with open(root / "manifest.jsonl", "w") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")
    print(f"wrote {args.n} records under {root}")


if __name__ == "__main__":
    main()
