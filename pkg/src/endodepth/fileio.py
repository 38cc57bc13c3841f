"""File formats: PFM depth maps, 8-bit PNG images, JSON configs.

All writes go through a temp-file-then-rename so partially written outputs
never appear under the final name.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np
from PIL import Image as PILImage


def _atomic_write_bytes(path, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pfm(path, data: np.ndarray) -> None:
    """Single-channel little-endian PFM (scale field -1.0), bottom row first."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("PFM writer handles single-channel maps only")
    height, width = arr.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    body = np.flipud(arr).astype("<f4").tobytes()
    _atomic_write_bytes(path, header + body)


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        tag = f.readline().decode("ascii").strip()
        if tag not in ("Pf", "PF"):
            raise ValueError(f"{path}: not a PFM file")
        dims = f.readline().decode("ascii").split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline().decode("ascii").strip())
        channels = 3 if tag == "PF" else 1
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(width * height * channels * 4), dtype=dtype)
    data = data.reshape(height, width, channels) if channels == 3 else data.reshape(height, width)
    return np.flipud(data).astype(np.float64)


def write_png(path, image: np.ndarray) -> None:
    """8-bit PNG from intensities in [0, 1] (2D gray or H x W x 3)."""
    arr = np.asarray(image, dtype=np.float64)
    q = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    mode = "L" if q.ndim == 2 else "RGB"
    import io

    buf = io.BytesIO()
    PILImage.fromarray(q, mode=mode).save(buf, format="PNG")
    _atomic_write_bytes(path, buf.getvalue())


def write_index_png(path, indices: np.ndarray) -> None:
    """Single-channel PNG of small integer labels (e.g. arg-max classes)."""
    arr = np.asarray(indices)
    if arr.max(initial=0) > 255 or arr.min(initial=0) < 0:
        raise ValueError("indices must fit in uint8")
    import io

    buf = io.BytesIO()
    PILImage.fromarray(arr.astype(np.uint8), mode="L").save(buf, format="PNG")
    _atomic_write_bytes(path, buf.getvalue())


def read_png(path) -> np.ndarray:
    """Read a PNG to float intensities in [0, 1] (gray -> 2D, RGB -> H x W x 3)."""
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return arr


def write_json(path, obj) -> None:
    _atomic_write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode("utf-8"))


def read_json(path):
    with open(path) as f:
        return json.load(f)
