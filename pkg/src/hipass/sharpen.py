"""Unsharp masking with a fixed high-pass kernel, plus stacked gradient maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PreconditionError
from .kernels import (LAPLACIAN_4, SOBEL_H, SOBEL_V, TEMPORAL_GRAD, verify_high_pass)
from .tensorops import Frame, VideoClip, conv2d

NAMED_KERNELS = {
    "neg-laplacian": -LAPLACIAN_4,
    "laplacian": LAPLACIAN_4,
    "sobel-h": SOBEL_H,
    "sobel-v": SOBEL_V,
}


def get_named_kernel(name: str) -> np.ndarray:
    try:
        return NAMED_KERNELS[name].copy()
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}, expected one of {tuple(NAMED_KERNELS)}") from None


@dataclass
class UnsharpConfig:
    """A 2-D high-pass kernel, the boost strength, and output clamping."""

    kernel: np.ndarray
    lam: float = 1.0
    clamp: bool = True

    def __post_init__(self):
        ker = np.array(self.kernel, dtype=np.float64, copy=True)
        if ker.ndim != 2:
            raise DimensionError(f"unsharp kernel must be 2-D, got shape {ker.shape}")
        if self.lam < 0:
            raise PreconditionError("lam must be >= 0")
        report = verify_high_pass(ker)
        if not report:
            raise PreconditionError(
                f"unsharp kernel is not high-pass (|DC gain| = {report.dc_gain:.3e})")
        self.kernel = ker


def unsharp_mask_array(values: np.ndarray, cfg: UnsharpConfig) -> np.ndarray:
    """x + lam * (k * x) on a raw (H, W) or (C, H, W) array.

    Uses replicate padding, so constant areas are exactly preserved. Clamping
    follows cfg; the unclamped output is linear in lam.
    """
    arr = np.asarray(values, dtype=np.float64)
    out = arr + cfg.lam * conv2d(arr, cfg.kernel, "same-replicate")
    if cfg.clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def unsharp_mask(frame: Frame, cfg: UnsharpConfig) -> Frame:
    """Sharpen a frame; with cfg.clamp the result is always a valid frame."""
    return Frame(unsharp_mask_array(frame.values, cfg))


GRADIENT_FAMILIES = ("sobel", "laplacian", "temporal", "sobel+temporal")


def gradient_features(window: VideoClip, family: str) -> np.ndarray:
    """Stack fixed-filter feature maps for the window's center frame.

    'sobel' yields |Gx * x| and |Gy * x|, 'laplacian' the (signed) Laplacian
    response, 'temporal' the second-difference map 0.5*x_{t-1} - x_t +
    0.5*x_{t+1} (requires a 3-frame window), 'sobel+temporal' both. Output
    shape is (F, C, H, W).
    """
    if family not in GRADIENT_FAMILIES:
        raise ValueError(f"unknown family {family!r}, expected one of {GRADIENT_FAMILIES}")
    t = len(window)
    if t % 2 == 0:
        raise DimensionError("window length must be odd")
    center = window.data[t // 2]
    feats = []
    if family in ("sobel", "sobel+temporal"):
        feats.append(np.abs(conv2d(center, SOBEL_H, "same-replicate")))
        feats.append(np.abs(conv2d(center, SOBEL_V, "same-replicate")))
    if family == "laplacian":
        feats.append(conv2d(center, LAPLACIAN_4, "same-replicate"))
    if family in ("temporal", "sobel+temporal"):
        if t != 3:
            raise DimensionError(
                f"temporal features need a 3-frame window, got {t} frames")
        taps = TEMPORAL_GRAD
        feats.append(taps[0] * window.data[0] + taps[1] * window.data[1]
                     + taps[2] * window.data[2])
    return np.stack(feats)
