"""Plain-text PGM (P2) and PPM (P3) frame import/export for eyeballing."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, FormatError
from .tensorops import Frame


def write_pgm(path, values: np.ndarray, maxval: int = 255) -> None:
    """Write a 2-D array with values in [0, 1] as a plain P2 file."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"PGM wants a (H, W) array, got shape {arr.shape}")
    quant = np.rint(np.clip(arr, 0.0, 1.0) * maxval).astype(int)
    _write_plain(path, "P2", quant[None], maxval)


def write_ppm(path, values: np.ndarray, maxval: int = 255) -> None:
    """Write a (3, H, W) array with values in [0, 1] as a plain P3 file."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise DimensionError(f"PPM wants a (3, H, W) array, got shape {arr.shape}")
    quant = np.rint(np.clip(arr, 0.0, 1.0) * maxval).astype(int)
    _write_plain(path, "P3", quant, maxval)


def write_frame(path, frame: Frame, maxval: int = 255) -> None:
    """Write a Frame as PGM (1 channel) or PPM (3 channels)."""
    if frame.channels == 1:
        write_pgm(path, frame.values[0], maxval)
    else:
        write_ppm(path, frame.values, maxval)


def _write_plain(path, tag: str, planes: np.ndarray, maxval: int) -> None:
    c, h, w = planes.shape
    with open(path, "w") as fh:
        fh.write(f"{tag}\n{w} {h}\n{maxval}\n")
        # interleave channels per pixel, row per line
        for y in range(h):
            row = planes[:, y, :].T.reshape(-1)
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_pnm(path) -> Frame:
    """Read a plain P2/P3 file back into a Frame (values scaled to [0, 1])."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens:
        raise FormatError(f"{path}: empty file")
    tag = tokens[0]
    if tag not in ("P2", "P3"):
        raise FormatError(f"{path}: unsupported magic {tag!r}, expected P2 or P3")
    channels = 1 if tag == "P2" else 3
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        values = [int(t) for t in tokens[4:]]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header or samples ({exc})") from exc
    if maxval <= 0:
        raise FormatError(f"{path}: non-positive maxval {maxval}")
    if len(values) != w * h * channels:
        raise FormatError(
            f"{path}: expected {w * h * channels} samples, got {len(values)}")
    arr = np.array(values, dtype=np.float64).reshape(h, w, channels)
    arr = np.moveaxis(arr, -1, 0) / maxval
    return Frame(np.clip(arr, 0.0, 1.0))
