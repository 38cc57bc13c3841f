"""Command-line interface.

Subcommands: synth, warp, augment, nmf-seg, eval, train-toy, grad-check.
Exit codes: 0 success, 1 domain/validation error, 2 IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import fileio
from .augment import apply_mask, make_occlusion_mask
from .errors import SceneCoverageError
from .geometry import CameraIntrinsics, PoseSE3, warp_field
from .gradcheck import run_check
from .metrics import compute_metrics, write_metrics_csv
from .nmf import (
    build_segmentations,
    extract_features,
    nmf_factorize,
    orthogonality_defect,
)
from .sampler import synthesize_view
from .synth import Scene, render_view
from .train import RunConfig, train_toy


def _cmd_synth(args):
    scene = Scene.load_json(args.scene) if args.scene else Scene(kind="plane")
    K = (
        CameraIntrinsics.load_json(args.intrinsics)
        if args.intrinsics
        else CameraIntrinsics(fx=64.0, fy=64.0, cx=31.5, cy=31.5, width=64, height=64)
    )
    pose = PoseSE3.load_json(args.pose) if args.pose else PoseSE3.identity()
    image, depth = render_view(scene, K, pose)
    os.makedirs(args.out, exist_ok=True)
    fileio.write_png(os.path.join(args.out, "image.png"), image)
    fileio.write_pfm(os.path.join(args.out, "depth.pfm"), depth)
    print(f"wrote image.png and depth.pfm to {args.out}")
    return 0


def _cmd_warp(args):
    depth = fileio.read_pfm(args.depth)
    K = CameraIntrinsics.load_json(args.intrinsics)
    pose = PoseSE3.load_json(args.pose)
    warp = warp_field(depth, K, pose)
    os.makedirs(args.out, exist_ok=True)
    fileio.write_pfm(os.path.join(args.out, "src_depth.pfm"), warp.src_depth)
    fileio.write_png(os.path.join(args.out, "valid.png"), warp.valid.astype(np.float64))
    if args.source:
        source = fileio.read_png(args.source)
        recon = synthesize_view(source, warp)
        fileio.write_png(os.path.join(args.out, "reconstructed.png"), recon.values)
    print(f"warp outputs written to {args.out} "
          f"({int(warp.valid.sum())}/{warp.valid.size} valid pixels)")
    return 0


def _cmd_augment(args):
    image = fileio.read_png(args.image)
    H, W = image.shape[:2]
    mask = make_occlusion_mask(H, W, seed=args.mask_seed)
    fill = float(image.mean()) if args.mean_fill else args.fill
    masked = apply_mask(image, mask, fill=fill)
    os.makedirs(args.out, exist_ok=True)
    fileio.write_png(os.path.join(args.out, "masked.png"), masked)
    fileio.write_index_png(
        os.path.join(args.out, "mask.png"), mask.occluded.astype(np.uint8) * 255
    )
    print(f"mask rect (top, left, h, w) = {mask.rect}; outputs in {args.out}")
    return 0


def _cmd_nmf_seg(args):
    images = [fileio.read_png(p) for p in args.images]
    feats = extract_features(images, seed=args.seed)
    res = nmf_factorize(feats, K=args.k, seed=args.seed)
    segs = build_segmentations(
        res.P, feats.n_views, feats.height, feats.width, temperature=args.temperature
    )
    os.makedirs(args.out, exist_ok=True)
    for i, (path, seg) in enumerate(zip(args.images, segs)):
        labels = np.argmax(seg.probs, axis=-1)
        fileio.write_index_png(os.path.join(args.out, f"seg_{i}.png"), labels)
        if args.probs:
            for k in range(seg.probs.shape[-1]):
                fileio.write_pfm(
                    os.path.join(args.out, f"seg_{i}_class_{k}.pfm"),
                    seg.probs[..., k],
                )
    print(f"final Frobenius error: {res.error_trace[-1]:.6g} "
          f"after {res.iterations_run} iterations")
    print(f"orthogonality defect ||QQ^T - I||_F: {orthogonality_defect(res.Q):.6g}")
    return 0


def _cmd_eval(args):
    if len(args.pred) != len(args.gt):
        raise ValueError("--pred and --gt must list the same number of files")
    rows = []
    for pred_path, gt_path in zip(args.pred, args.gt):
        record = compute_metrics(
            fileio.read_pfm(pred_path),
            fileio.read_pfm(gt_path),
            cap_mm=args.cap,
            median_scale=not args.no_median_scale,
            delta_threshold=args.threshold,
        )
        rows.append((os.path.basename(pred_path), record))
    write_metrics_csv(rows, args.out)
    print(f"wrote {len(rows)} rows (+mean) to {args.out}")
    return 0


def _cmd_train_toy(args):
    if args.config:
        config = RunConfig.from_dict(fileio.read_json(args.config))
    else:
        config = RunConfig()
    if args.out:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    if args.mask_seed is not None:
        config.mask_seed = args.mask_seed
    report = train_toy(config)
    m = report.metrics
    print(f"final loss: {report.loss_curve[-1]:.6g}")
    print(f"abs_rel={m.abs_rel:.4f} sq_rel={m.sq_rel:.4f} rmse={m.rmse:.4f} "
          f"rmse_log={m.rmse_log:.4f} delta={m.delta:.4f}")
    return 0


def _cmd_grad_check(args):
    report = run_check(args.target, seed=args.seed)
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{status} {report['target']}: max relative error "
          f"{report['max_rel_error']:.3e} (tolerance {report['tolerance']:.0e})")
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="endodepth",
        description="Occlusion-aware self-supervised depth estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene")
    p.add_argument("--scene", help="scene spec JSON")
    p.add_argument("--intrinsics", help="intrinsics JSON")
    p.add_argument("--pose", help="world-to-camera pose JSON (4x4)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("warp", help="compute a warp field from a depth map")
    p.add_argument("--depth", required=True, help="target depth PFM")
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--pose", required=True, help="target-to-source pose JSON")
    p.add_argument("--source", help="source image PNG to reconstruct from")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_warp)

    p = sub.add_parser("augment", help="apply an occlusion mask to an image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask-seed", type=int, default=0)
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--mean-fill", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("nmf-seg", help="NMF segmentation pseudo-labels")
    p.add_argument("images", nargs="+")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--probs", action="store_true", help="also write per-class PFMs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_nmf_seg)

    p = sub.add_parser("eval", help="depth metrics over PFM pairs")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--gt", nargs="+", required=True)
    p.add_argument("--cap", type=float, default=150.0)
    p.add_argument("--no-median-scale", action="store_true")
    p.add_argument("--threshold", type=float, default=1.25)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("train-toy", help="desk-scale training loop")
    p.add_argument("--config", help="RunConfig JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--mask-seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_train_toy)

    p = sub.add_parser("grad-check", help="finite-difference gradient check")
    p.add_argument("--target", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, SceneCoverageError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
