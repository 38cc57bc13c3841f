"""Depth evaluation metrics with capping and optional median scaling."""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import EmptySupportError

DEPTH_FLOOR = 1e-3  # mm


@dataclass
class MetricsRecord:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta: float
    n_pixels: int
    scale_ratio: float


def clamp_depth(depth: np.ndarray, cap_mm: float) -> np.ndarray:
    """Clamp depths to [DEPTH_FLOOR, cap_mm]."""
    if cap_mm <= 0:
        raise ValueError("cap must be positive")
    return np.clip(np.asarray(depth, dtype=np.float64), DEPTH_FLOOR, cap_mm)


def compute_metrics(
    pred: np.ndarray,
    gt: np.ndarray,
    cap_mm: float = 150.0,
    median_scale: bool = True,
    delta_threshold: float = 1.25,
) -> MetricsRecord:
    """Abs-Rel, Sq-Rel, RMSE, RMSE-log and delta accuracy over valid pixels.

    Ground-truth pixels outside (0, cap_mm] are excluded. With median_scale
    the prediction is rescaled by median(gt)/median(pred) first (the usual
    treatment for scale-ambiguous monocular predictions). RMSE is the
    standard root-mean-square error; delta is returned as a fraction.
    """
    d_pred = np.asarray(pred, dtype=np.float64).ravel()
    d_gt = np.asarray(gt, dtype=np.float64).ravel()
    if d_pred.shape != d_gt.shape:
        raise ValueError("prediction and ground truth shapes differ")
    valid = (d_gt > 0) & (d_gt <= cap_mm)
    if not valid.any():
        raise EmptySupportError("no ground-truth pixels inside (0, cap]")
    d_gt = d_gt[valid]
    d_pred = d_pred[valid]

    if median_scale:
        ratio = float(np.median(d_gt) / max(np.median(d_pred), DEPTH_FLOOR))
    else:
        ratio = 1.0
    d_pred = clamp_depth(d_pred * ratio, cap_mm)

    err = d_gt - d_pred
    thresh = np.maximum(d_gt / d_pred, d_pred / d_gt)
    return MetricsRecord(
        abs_rel=float(np.mean(np.abs(err) / d_gt)),
        sq_rel=float(np.mean(err ** 2 / d_gt)),
        rmse=float(np.sqrt(np.mean(err ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(d_gt) - np.log(d_pred)) ** 2))),
        delta=float(np.mean(thresh < delta_threshold)),
        n_pixels=int(d_gt.size),
        scale_ratio=ratio,
    )


_CSV_FIELDS = ["frame", "abs_rel", "sq_rel", "rmse", "rmse_log", "delta", "scale_ratio", "n_pixels"]


def write_metrics_csv(rows, path) -> None:
    """Write (frame, MetricsRecord) rows plus a final mean row, atomically."""
    rows = list(rows)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(_CSV_FIELDS)
            for frame, rec in rows:
                writer.writerow(
                    [frame, rec.abs_rel, rec.sq_rel, rec.rmse, rec.rmse_log,
                     rec.delta, rec.scale_ratio, rec.n_pixels]
                )
            if rows:
                writer.writerow(
                    ["mean"]
                    + [
                        np.mean([getattr(rec, name) for _, rec in rows])
                        for name in _CSV_FIELDS[1:-1]
                    ]
                    + [int(np.sum([rec.n_pixels for _, rec in rows]))]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
