"""Command-line surface.

Subcommands: encode, recover, eval-calib, eval-depth, sweep, metrology,
align. Every command is deterministic given its flags; all randomness is
seeded. Exit codes: 0 success, 1 partial failures, 2 invalid invocation.

Records may be processed by a thread pool (CAMCAL_THREADS caps the worker
count) but outputs are always emitted in manifest order and are identical
to sequential execution.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import Intrinsics
from .camera_image import (
    CameraImage,
    ChannelVariant,
    encode_variant,
    normalize,
    quantize_u8,
    read_cami,
    write_cami,
)
from .depth import DepthMap, align_affine, align_scale, compute_metrics
from .geometry import metrology_distance, procrustes, read_ply
from .manifest import load_gray, load_mask, read_depth, read_manifest, resolve_path
from .recovery import RansacConfig, calib_error, recover_intrinsics
from .sweep import NOISE_KINDS, SweepSpec, noisy_ensemble

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(lines, out_path) -> None:
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _worker_count(n_items: int) -> int:
    env = os.environ.get("CAMCAL_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = 1
    else:
        cap = os.cpu_count() or 1
    return max(1, min(n_items, cap))


def _map_ordered(fn, items):
    """Apply fn to items, preserving order; each result is (ok, value|message)."""

    def capture(item):
        try:
            return True, fn(item)
        except Exception as exc:  # per-record isolation
            return False, f"{type(exc).__name__}: {exc}"

    items = list(items)
    workers = _worker_count(len(items))
    if workers <= 1:
        return [capture(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(capture, items))


def _to_internal(K: Intrinsics, convention: str) -> Intrinsics:
    """Convert a declared principal point to the internal pixel-center frame."""
    if convention == "pixel-corner":
        return Intrinsics(K.fx, K.fy, K.cx - 0.5, K.cy - 0.5)
    return K


def _from_internal(K: Intrinsics, convention: str) -> Intrinsics:
    if convention == "pixel-corner":
        return Intrinsics(K.fx, K.fy, K.cx + 0.5, K.cy + 0.5)
    return K


def _parse_variant(text: str) -> ChannelVariant:
    if text == "grayscale":
        return ChannelVariant.grayscale()
    if text == "duplicate-theta":
        return ChannelVariant.duplicate_theta()
    if text.startswith("constant:"):
        return ChannelVariant.constant(float(text.split(":", 1)[1]))
    if text == "constant":
        return ChannelVariant.constant(0.0)
    raise ValueError(
        f"bad variant {text!r}: expected grayscale, duplicate-theta, or constant[:VALUE]"
    )


def _ransac_config(args) -> RansacConfig:
    return RansacConfig(
        iterations=args.ransac_iters,
        inlier_threshold=args.inlier_px,
        min_inlier_fraction=args.min_inlier_fraction,
        seed=args.seed,
        refine=not args.no_refine,
    )


def _write_preview(path, ci: CameraImage) -> None:
    # Previews clamp before quantizing; they are for human inspection only.
    arr = quantize_u8(np.clip(normalize(ci), -1.0, 1.0))
    Image.fromarray(arr, mode="RGB").save(path)


# ---------------------------------------------------------------- commands


def cmd_encode(args) -> int:
    records = read_manifest(args.manifest)
    if not records:
        _log(f"error: no records in {args.manifest}")
        return EXIT_USAGE
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variant = _parse_variant(args.variant)

    keys = [r.key for r in records]
    duplicates = {k for k in keys if keys.count(k) > 1}

    def work(record):
        if record.key in duplicates:
            raise ValueError(f"duplicate manifest key {record.key!r}")
        gray = load_gray(resolve_path(args.manifest, record.image_path))
        if gray.shape != (record.height, record.width):
            raise ValueError(
                f"image is {gray.shape[1]}x{gray.shape[0]}, manifest says "
                f"{record.width}x{record.height}"
            )
        K = _to_internal(record.intrinsics(), args.convention)
        ci = encode_variant(K, record.dims(), gray, variant)
        cami_path = out_dir / f"{record.key}.cami"
        write_cami(cami_path, ci)
        if args.preview:
            _write_preview(out_dir / f"{record.key}_preview.png", ci)
        return str(cami_path)

    failures = 0
    for record, (ok, value) in zip(records, _map_ordered(work, records)):
        if ok:
            _log(f"encoded {record.image_path} -> {value}")
        else:
            failures += 1
            _log(f"skipped {record.image_path}: {value}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_recover(args) -> int:
    if args.manifest:
        if not args.cami_dir:
            _log("error: --manifest requires --cami-dir")
            return EXIT_USAGE
        records = read_manifest(args.manifest)
        paths = [str(Path(args.cami_dir) / f"{r.key}.cami") for r in records]
    else:
        paths = list(args.camis)
    if not paths:
        _log("error: no CAMI inputs (pass paths or --manifest with --cami-dir)")
        return EXIT_USAGE

    cfg = _ransac_config(args)

    def work(path):
        ci = read_cami(path)
        K, report = recover_intrinsics(
            ci, cfg, sample_grid=args.sample_grid, use_all_pixels=args.all_pixels
        )
        K_out = _from_internal(K, args.convention)
        return {
            "type": "result",
            "path": path,
            "fx": K_out.fx,
            "fy": K_out.fy,
            "cx": K_out.cx,
            "cy": K_out.cy,
            "inliers_x": report.x_fit.inlier_count,
            "inliers_y": report.y_fit.inlier_count,
            "rms_x": report.x_fit.rms_residual,
            "rms_y": report.y_fit.rms_residual,
            "n_samples": report.n_samples,
            "dropped_x": report.n_dropped_x,
            "dropped_y": report.n_dropped_y,
        }

    header = {
        "type": "header",
        "command": "recover",
        "convention": args.convention,
        "seed": args.seed,
        "iterations": args.ransac_iters,
        "inlier_px": args.inlier_px,
    }
    lines = [json.dumps(header)]
    failures = 0
    for path, (ok, value) in zip(paths, _map_ordered(work, paths)):
        if ok:
            lines.append(json.dumps(value))
        else:
            failures += 1
            lines.append(json.dumps({"type": "error", "path": path, "error": value}))
    _emit(lines, args.out)
    return EXIT_PARTIAL if failures else EXIT_OK


def _read_prediction_rows(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rows.append(json.loads(line))
    return rows


def cmd_eval_calib(args) -> int:
    records = read_manifest(args.manifest)
    by_key = {r.key: r for r in records}
    rows = _read_prediction_rows(args.pred)

    results = []
    for row in rows:
        kind = row.get("type")
        if kind == "header":
            continue
        if kind == "error":
            _log(f"skipping failed prediction for {row.get('path')}: {row.get('error')}")
            continue
        key = Path(row["path"]).stem
        record = by_key.get(key)
        if record is None:
            _log(f"error: prediction key {key!r} not found in manifest")
            return EXIT_USAGE
        K_pred = Intrinsics(row["fx"], row["fy"], row["cx"], row["cy"])
        err = calib_error(K_pred, record.intrinsics(), record.dims())
        results.append((key, err))

    if not results:
        _log("error: no valid prediction records to evaluate")
        return EXIT_USAGE

    lines = [
        "# camcal eval-calib",
        f"# convention: {args.convention}",
        "key\te_f\te_b",
    ]
    for key, err in results:
        lines.append(f"{key}\t{err.e_f:.6f}\t{err.e_b:.6f}")
    mean_ef = sum(e.e_f for _, e in results) / len(results)
    mean_eb = sum(e.e_b for _, e in results) / len(results)
    lines.append(f"MEAN\t{mean_ef:.3f}\t{mean_eb:.3f}")
    _emit(lines, args.out)
    return EXIT_OK


def cmd_eval_depth(args) -> int:
    records = read_manifest(args.manifest)
    usable = [r for r in records if r.depth_path and r.pred_depth_path]
    for r in records:
        if r not in usable:
            _log(f"skipping {r.key}: missing depth_path or pred_depth_path")
    if not usable:
        _log("error: no records with both depth_path and pred_depth_path")
        return EXIT_USAGE

    def work(record):
        gt_raw = read_depth(resolve_path(args.manifest, record.depth_path), record.depth_scale)
        pred_raw = read_depth(
            resolve_path(args.manifest, record.pred_depth_path), record.pred_depth_scale
        )
        if gt_raw.shape != pred_raw.shape:
            raise ValueError(
                f"pred shape {pred_raw.shape} != gt shape {gt_raw.shape}"
            )
        mask = load_mask(resolve_path(args.manifest, record.mask_path)) if record.mask_path else None
        if args.min_depth is not None or args.max_depth is not None:
            clamp = np.ones_like(gt_raw, dtype=bool)
            if args.min_depth is not None:
                clamp &= gt_raw >= args.min_depth
            if args.max_depth is not None:
                clamp &= gt_raw <= args.max_depth
            mask = clamp if mask is None else (mask & clamp)
        gt = DepthMap.from_array(gt_raw, mask)
        pred = DepthMap.from_array(pred_raw)
        if args.alignment == "scale":
            s = align_scale(pred, gt)
            pred = DepthMap.from_array(s * pred_raw)
        elif args.alignment == "affine":
            fit = align_affine(pred, gt)
            pred = DepthMap.from_array(fit.apply(pred_raw))
        return compute_metrics(pred, gt)

    lines = [
        "# camcal eval-depth",
        f"# alignment: {args.alignment}",
        f"# convention: {args.convention}",
        "key\tabs_rel\tdelta1\tdelta2\tdelta3\tsi_log",
    ]
    collected = []
    failures = 0
    for record, (ok, value) in zip(usable, _map_ordered(work, usable)):
        if ok:
            collected.append(value)
            lines.append(
                f"{record.key}\t{value.abs_rel:.6f}\t{value.delta1:.3f}"
                f"\t{value.delta2:.3f}\t{value.delta3:.3f}\t{value.si_log:.6f}"
            )
        else:
            failures += 1
            _log(f"failed {record.key}: {value}")
    if not collected:
        _log("error: every record failed")
        return EXIT_USAGE
    n = len(collected)
    lines.append(
        "MEAN\t{:.3f}\t{:.3f}\t{:.3f}\t{:.3f}\t{:.3f}".format(
            sum(m.abs_rel for m in collected) / n,
            sum(m.delta1 for m in collected) / n,
            sum(m.delta2 for m in collected) / n,
            sum(m.delta3 for m in collected) / n,
            sum(m.si_log for m in collected) / n,
        )
    )
    _emit(lines, args.out)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_sweep(args) -> int:
    records = read_manifest(args.manifest)
    if not records:
        _log(f"error: no records in {args.manifest}")
        return EXIT_USAGE
    spec = SweepSpec(
        kinds=tuple(args.kinds.split(",")),
        levels=tuple(float(x) for x in args.levels.split(",")),
        seeds=tuple(int(x) for x in args.seeds.split(",")),
        ensemble_size=args.ensemble,
        ransac=_ransac_config(args),
    )

    def work(record):
        gray = load_gray(resolve_path(args.manifest, record.image_path))
        if gray.shape != (record.height, record.width):
            raise ValueError("image dims do not match manifest")
        K_gt = _to_internal(record.intrinsics(), args.convention)
        dims = record.dims()
        ci = encode_variant(K_gt, dims, gray, ChannelVariant.grayscale())
        # Keyed (not index-based) noise streams: a row's values never change
        # when records are added elsewhere in the manifest.
        record_entropy = zlib.crc32(record.key.encode())
        rows = []
        for kind in spec.kinds:
            for level in spec.levels:
                for seed in spec.seeds:
                    try:
                        noisy = noisy_ensemble(
                            ci, kind, level, [seed, record_entropy], spec.ensemble_size
                        )
                        K_pred, _ = recover_intrinsics(noisy, spec.ransac)
                        err = calib_error(K_pred, K_gt, dims)
                        rows.append(
                            f"{record.key}\t{kind}\t{level:g}\t{seed}\tok"
                            f"\t{err.e_f:.9g}\t{err.e_b:.9g}"
                        )
                    except Exception as exc:
                        rows.append(
                            f"{record.key}\t{kind}\t{level:g}\t{seed}\terror\tnan\tnan"
                        )
                        _log(f"sweep row failed ({record.key}, {kind}, {level}, {seed}): {exc}")
        return rows

    lines = [
        "# camcal sweep",
        f"# convention: {args.convention}",
        f"# ensemble: {spec.ensemble_size}",
        "key\tkind\tlevel\tseed\tstatus\te_f\te_b",
    ]
    failures = 0
    table: dict[tuple, list] = {}
    for record, (ok, value) in zip(records, _map_ordered(work, records)):
        if not ok:
            failures += 1
            _log(f"failed {record.key}: {value}")
            continue
        for row in value:
            lines.append(row)
            fields = row.split("\t")
            if fields[4] == "error":
                failures += 1
            else:
                table.setdefault((fields[1], fields[2]), []).append(
                    (float(fields[5]), float(fields[6]))
                )

    lines.append("# summary: kind level n median_e_f p90_e_f median_e_b p90_e_b")
    for (kind, level), values in sorted(table.items()):
        efs = np.array([v[0] for v in values])
        ebs = np.array([v[1] for v in values])
        lines.append(
            f"SUMMARY\t{kind}\t{level}\t{len(values)}"
            f"\t{np.median(efs):.9g}\t{np.quantile(efs, 0.9):.9g}"
            f"\t{np.median(ebs):.9g}\t{np.quantile(ebs, 0.9):.9g}"
        )
    _emit(lines, args.out)
    return EXIT_PARTIAL if failures else EXIT_OK


def _parse_pair(text: str):
    try:
        a, b = text.split(":")
        ua, va = (int(x) for x in a.split(","))
        ub, vb = (int(x) for x in b.split(","))
        return (ua, va), (ub, vb)
    except ValueError as exc:
        raise ValueError(f"bad pixel pair {text!r}, expected 'u1,v1:u2,v2'") from exc


def cmd_metrology(args) -> int:
    depth = DepthMap.from_array(read_depth(args.depth, args.depth_scale),
                                load_mask(args.mask) if args.mask else None)

    if args.cami:
        ci = read_cami(args.cami)
        cfg = RansacConfig(seed=args.seed)
        K, _ = recover_intrinsics(ci, cfg)
        source = f"recovered from {args.cami}"
    else:
        if None in (args.fx, args.fy, args.cx, args.cy):
            _log("error: pass --cami or all of --fx --fy --cx --cy")
            return EXIT_USAGE
        K = _to_internal(Intrinsics(args.fx, args.fy, args.cx, args.cy), args.convention)
        source = "flags"

    pairs = [_parse_pair(p) for p in args.pair]
    lines = [
        "# camcal metrology",
        f"# convention: {args.convention}",
        f"# intrinsics: {source}",
        "pixel_a\tpixel_b\tdistance_m",
    ]
    failures = 0
    for (pa, pb) in pairs:
        try:
            dist = metrology_distance(depth, K, pa, pb)
            lines.append(f"{pa[0]},{pa[1]}\t{pb[0]},{pb[1]}\t{dist:.9g}")
        except ValueError as exc:
            failures += 1
            lines.append(f"{pa[0]},{pa[1]}\t{pb[0]},{pb[1]}\terror")
            _log(f"pair {pa}:{pb} failed: {exc}")
    _emit(lines, args.out)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_align(args) -> int:
    cloud_a = read_ply(args.cloud_a)
    cloud_b = read_ply(args.cloud_b)
    transform, residual = procrustes(cloud_a, cloud_b)
    lines = [
        "# camcal align",
        f"sigma\t{transform.sigma:.12g}",
    ]
    for row in transform.R:
        lines.append(f"R\t{row[0]:.12g}\t{row[1]:.12g}\t{row[2]:.12g}")
    lines.append(f"t\t{transform.t[0]:.12g}\t{transform.t[1]:.12g}\t{transform.t[2]:.12g}")
    lines.append(f"residual\t{residual:.12g}")
    _emit(lines, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(sp) -> None:
    sp.add_argument("--out", help="write output here instead of stdout")
    conv = sp.add_mutually_exclusive_group()
    conv.add_argument(
        "--pixel-center", dest="convention", action="store_const",
        const="pixel-center", default="pixel-center",
        help="principal points address pixel centers (default)",
    )
    conv.add_argument(
        "--pixel-corner", dest="convention", action="store_const",
        const="pixel-corner",
        help="principal points address pixel corners",
    )


def _add_ransac(sp) -> None:
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ransac-iters", type=int, default=512)
    sp.add_argument("--inlier-px", type=float, default=2.0)
    sp.add_argument("--min-inlier-fraction", type=float, default=0.5)
    sp.add_argument("--no-refine", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camcal",
        description="Camera-image encoding, intrinsics recovery, and evaluation tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("encode", help="encode manifest records into CAMI files")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--variant", default="grayscale",
                    help="third channel: grayscale | duplicate-theta | constant[:VALUE]")
    sp.add_argument("--preview", action="store_true", help="also write 8-bit PNG previews")
    _add_common(sp)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("recover", help="recover intrinsics from CAMI files")
    sp.add_argument("camis", nargs="*", help="CAMI files (or use --manifest/--cami-dir)")
    sp.add_argument("--manifest")
    sp.add_argument("--cami-dir")
    sp.add_argument("--sample-grid", type=int, default=64)
    sp.add_argument("--all-pixels", action="store_true")
    _add_ransac(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("eval-calib", help="calibration errors of recovered intrinsics")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--pred", required=True, help="JSONL output of `camcal recover`")
    _add_common(sp)
    sp.set_defaults(func=cmd_eval_calib)

    sp = sub.add_parser("eval-depth", help="depth metrics for manifest predictions")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--alignment", choices=("none", "scale", "affine"), default="none")
    sp.add_argument("--min-depth", type=float, default=None)
    sp.add_argument("--max-depth", type=float, default=None)
    _add_common(sp)
    sp.set_defaults(func=cmd_eval_depth)

    sp = sub.add_parser("sweep", help="noise robustness sweep over a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--kinds", default=",".join(NOISE_KINDS))
    sp.add_argument("--levels", default="0,0.01,0.02,0.05")
    sp.add_argument("--seeds", default="0,1,2,3,4")
    sp.add_argument("--ensemble", type=int, default=1)
    _add_ransac(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("metrology", help="distances between unprojected pixel pairs")
    sp.add_argument("--depth", required=True, help="depth file (PNG or raw f32)")
    sp.add_argument("--depth-scale", type=float, default=1.0)
    sp.add_argument("--mask")
    sp.add_argument("--fx", type=float)
    sp.add_argument("--fy", type=float)
    sp.add_argument("--cx", type=float)
    sp.add_argument("--cy", type=float)
    sp.add_argument("--cami", help="recover intrinsics from this CAMI file instead")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--pair", action="append", required=True,
                    help="pixel pair 'u1,v1:u2,v2' (repeatable)")
    _add_common(sp)
    sp.set_defaults(func=cmd_metrology)

    sp = sub.add_parser("align", help="Procrustes alignment of two ASCII PLY clouds")
    sp.add_argument("cloud_a")
    sp.add_argument("cloud_b")
    _add_common(sp)
    sp.set_defaults(func=cmd_align)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
