#!/usr/bin/env python3
"""Monte Carlo calibration oracle behind the frozen regression bounds in the
test suite. Re-run after estimator changes to re-derive:

  * per-sigma e_f quantiles for additive gaussian channel noise,
  * the ensemble (size 5 vs 1) standard-deviation ratio,
  * quantization-round-trip e_f and FoV error across a focal grid.

Results print as a plain table; nothing is written.
"""

import argparse

import numpy as np

from camcal.camera import ImageDims, Intrinsics, fov_degrees
from camcal.camera_image import encode
from camcal.recovery import RansacConfig, calib_error, recover_intrinsics
from camcal.sweep import apply_noise, noisy_ensemble


def gaussian_table(ci, K, dims, sigmas, n_seeds, cfg):
    print(f"\ngaussian noise, {n_seeds} seeds, threshold {cfg.inlier_threshold}px")
    print("sigma\tmedian_ef\tp95_ef\tmax_ef\tfrac<0.05")
    for sigma in sigmas:
        efs = []
        for s in range(n_seeds):
            noisy = apply_noise(ci, "gaussian", sigma, s)
            K2, _ = recover_intrinsics(noisy, cfg)
            efs.append(calib_error(K2, K, dims).e_f)
        efs = np.array(efs)
        print(
            f"{sigma:g}\t{np.median(efs):.5f}\t{np.quantile(efs, 0.95):.5f}"
            f"\t{efs.max():.5f}\t{np.mean(efs < 0.05):.2f}"
        )


def ensemble_ratio(ci, K, dims, sigma, n_seeds, cfg):
    singles, fives = [], []
    for s in range(n_seeds):
        for size, sink in ((1, singles), (5, fives)):
            noisy = noisy_ensemble(ci, "gaussian", sigma, [777, s], size)
            K2, _ = recover_intrinsics(noisy, cfg)
            sink.append(calib_error(K2, K, dims).e_f)
    ratio = np.std(singles) / np.std(fives)
    print(f"\nensemble at sigma={sigma:g}, {n_seeds} seeds:")
    print(f"std1={np.std(singles):.5f} std5={np.std(fives):.5f} ratio={ratio:.2f}")


def quantization_grid(dims, cfg):
    gray = np.zeros((dims.height, dims.width))
    print(f"\nquantization round trip at {dims.width}x{dims.height}")
    print("f/w\te_f\tfov_err_deg")
    for f_scale in (0.3, 0.5, 1.0, 2.0, 3.0, 4.0):
        K = Intrinsics(f_scale * dims.width, f_scale * dims.width,
                       (dims.width - 1) / 2, (dims.height - 1) / 2)
        ci = apply_noise(encode(K, dims, gray), "quantize", 0.0, 0)
        K2, _ = recover_intrinsics(ci, cfg)
        e_f = calib_error(K2, K, dims).e_f
        fov_err = abs(fov_degrees(K2, dims, "x") - fov_degrees(K, dims, "x"))
        print(f"{f_scale:g}\t{e_f:.5f}\t{fov_err:.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--sigmas", default="0.01,0.02,0.05")
    ap.add_argument("--inlier-px", type=float, default=80.0)
    args = ap.parse_args()

    K = Intrinsics(500.0, 500.0, 320.0, 240.0)
    dims = ImageDims(640, 480)
    ci = encode(K, dims, np.zeros((dims.height, dims.width)))
    noisy_cfg = RansacConfig(seed=1, inlier_threshold=args.inlier_px, min_inlier_fraction=0.3)

    gaussian_table(ci, K, dims, [float(s) for s in args.sigmas.split(",")],
                   args.seeds, noisy_cfg)
    ensemble_ratio(ci, K, dims, 0.05, min(args.seeds, 60), noisy_cfg)
    quantization_grid(dims, RansacConfig(seed=3, inlier_threshold=40.0))


if __name__ == "__main__":
    main()
