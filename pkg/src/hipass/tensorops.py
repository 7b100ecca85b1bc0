"""Dense tensor primitives: convolution, DFT, rotation, warping, pixel shuffle.

Tensors are plain numpy arrays. ``conv2d`` performs true mathematical
convolution (the kernel is flipped); the learned layers in
:mod:`hipass.autodiff` use the cross-correlation convention instead and say so.
All public operations return freshly allocated arrays and never mutate their
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, PreconditionError

PAD_MODES = {
    "same-zero": "constant",
    "same-replicate": "edge",
    "same-wrap": "wrap",  # circular padding, used by the DFT consistency tests
}

PADDINGS = ("same-zero", "same-replicate", "valid", "same-wrap")


@dataclass
class Frame:
    """A single image with values in [0, 1], stored channels-first (C, H, W)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise DimensionError(f"frame must be (C, H, W) or (H, W), got shape {arr.shape}")
        if arr.shape[0] not in (1, 3):
            raise DimensionError(f"frame channels must be 1 or 3, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("frame values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise PreconditionError("frame values must lie in [0, 1]")
        self.values = arr

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass
class VideoClip:
    """An ordered frame sequence stored as one (T, C, H, W) array."""

    data: np.ndarray
    frame_rate: float = 24.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 3:  # (T, H, W) single channel
            arr = arr[:, None]
        if arr.ndim != 4:
            raise DimensionError(f"clip must be (T, C, H, W), got shape {np.shape(self.data)}")
        if arr.shape[0] < 1:
            raise DimensionError("clip needs at least one frame")
        if arr.shape[1] not in (1, 3):
            raise DimensionError(f"clip channels must be 1 or 3, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("clip values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise PreconditionError("clip values must lie in [0, 1]")
        if not self.frame_rate > 0:
            raise PreconditionError("frame_rate must be positive")
        self.data = arr

    @classmethod
    def from_frames(cls, frames, frame_rate: float = 24.0) -> "VideoClip":
        stacked = np.stack([f.values for f in frames])
        return cls(stacked, frame_rate)

    def __len__(self) -> int:
        return self.data.shape[0]

    def frame(self, i: int) -> Frame:
        return Frame(self.data[i])

    @property
    def frames(self) -> list:
        return [self.frame(i) for i in range(len(self))]


def _check_odd_kernel(kernel: np.ndarray, ndim: int, what: str) -> np.ndarray:
    ker = np.asarray(kernel, dtype=np.float64)
    if ker.ndim != ndim:
        raise DimensionError(f"{what} must have rank {ndim}, got shape {ker.shape}")
    if any(e % 2 == 0 for e in ker.shape[-2:]):
        raise DimensionError(f"{what} spatial extents must be odd, got {ker.shape}")
    return ker


def conv2d(image: np.ndarray, kernel: np.ndarray, padding: str = "same-zero") -> np.ndarray:
    """True 2-D convolution (kernel flipped) of a (H, W) or (C, H, W) image.

    ``padding`` is one of ``same-zero``, ``same-replicate``, ``valid`` or
    ``same-wrap``; the ``same-*`` modes preserve the spatial extents.
    """
    ker = _check_odd_kernel(kernel, 2, "kernel")
    img = np.asarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[None]
    if img.ndim != 3:
        raise DimensionError(f"image must be (H, W) or (C, H, W), got shape {img.shape}")
    kh, kw = ker.shape
    if padding == "valid":
        if img.shape[1] < kh or img.shape[2] < kw:
            raise DimensionError("image smaller than kernel under valid padding")
        padded = img
    elif padding in PAD_MODES:
        ph, pw = kh // 2, kw // 2
        padded = np.pad(img, ((0, 0), (ph, ph), (pw, pw)), mode=PAD_MODES[padding])
    else:
        raise ValueError(f"unknown padding {padding!r}, expected one of {PADDINGS}")
    flipped = ker[::-1, ::-1]
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
    out = np.einsum("chwij,ij->chw", windows, flipped, optimize=True)
    return out[0] if squeeze else out


def conv3d_temporal(window: np.ndarray, kernel: np.ndarray,
                    spatial_padding: str = "same-zero") -> np.ndarray:
    """Space-time convolution of a frame window with a (Tk, Hk, Wk) kernel.

    Spatial axes use true (flipped) convolution; temporal taps align with the
    frames in order, so kernel [[0], [-1], [1]] applied to a window
    (x_{t-1}, x_t, x_{t+1}) yields x_{t+1} - x_t. Accepts (C, Tk, H, W) or
    (Tk, H, W) windows and reduces the temporal axis.
    """
    ker = _check_odd_kernel(kernel, 3, "kernel")
    win = np.asarray(window, dtype=np.float64)
    squeeze = win.ndim == 3
    if squeeze:
        win = win[None]
    if win.ndim != 4:
        raise DimensionError(f"window must be (C, Tk, H, W) or (Tk, H, W), got {win.shape}")
    if win.shape[1] != ker.shape[0]:
        raise DimensionError(
            f"window has {win.shape[1]} temporal taps but kernel has {ker.shape[0]}")
    ch, cw = ker.shape[1] // 2, ker.shape[2] // 2
    out = None
    for t in range(ker.shape[0]):
        tap = ker[t]
        if not tap.any():
            continue
        nz = np.nonzero(tap)
        if len(nz[0]) == 1 and nz[0][0] == ch and nz[1][0] == cw and spatial_padding != "valid":
            # center-delta slice: spatial convolution collapses to a scale
            term = tap[ch, cw] * win[:, t]
        else:
            term = conv2d(win[:, t], tap, spatial_padding)
        out = term if out is None else out + term
    if out is None:  # all-zero kernel
        if spatial_padding == "valid":
            h = win.shape[2] - ker.shape[1] + 1
            w = win.shape[3] - ker.shape[2] + 1
            out = np.zeros((win.shape[0], h, w))
        else:
            out = np.zeros((win.shape[0],) + win.shape[2:])
    return out[0] if squeeze else out


def dft2d(image: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT of a (H, W) array; constant c maps to
    a single (0, 0) bin of value c*H*W."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise DimensionError(f"dft2d expects a (H, W) array, got shape {img.shape}")
    return np.fft.fft2(img)


def idft2d(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft2d` (carries the 1/(H*W) normalization)."""
    spec = np.asarray(spectrum)
    if spec.ndim != 2:
        raise DimensionError(f"idft2d expects a (H, W) array, got shape {spec.shape}")
    return np.fft.ifft2(spec)


def rotate90(kernel: np.ndarray) -> np.ndarray:
    """Rotate the trailing two axes 90 degrees counterclockwise:
    [[1, 2], [3, 4]] -> [[2, 4], [1, 3]]."""
    ker = np.asarray(kernel)
    if ker.ndim < 2:
        raise DimensionError("rotate90 needs at least two axes")
    return np.rot90(ker, k=1, axes=(-2, -1)).copy()


def bilinear_warp(image: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward-warp an image by a per-pixel flow field.

    ``flow`` is (2, H, W) with channel 0 the horizontal displacement u and
    channel 1 the vertical displacement v; the output at (y, x) samples the
    input at (y + v, x + u) with bilinear interpolation, clamping out-of-range
    coordinates to the border.
    """
    img = np.asarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[None]
    flo = np.asarray(flow, dtype=np.float64)
    if img.ndim != 3:
        raise DimensionError(f"image must be (H, W) or (C, H, W), got {img.shape}")
    if flo.shape != (2,) + img.shape[1:]:
        raise DimensionError(
            f"flow shape {flo.shape} does not match image spatial extents {img.shape[1:]}")
    if not np.all(np.isfinite(flo)):
        raise PreconditionError("flow must be finite")
    h, w = img.shape[1:]
    xs = np.clip(np.arange(w)[None, :] + flo[0], 0.0, w - 1.0)
    ys = np.clip(np.arange(h)[:, None] + flo[1], 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    out = (img[:, y0, x0] * (1 - fy) * (1 - fx)
           + img[:, y0, x1] * (1 - fy) * fx
           + img[:, y1, x0] * fy * (1 - fx)
           + img[:, y1, x1] * fy * fx)
    return out[0] if squeeze else out


def _shuffle(x: np.ndarray, s: int) -> np.ndarray:
    *lead, c2, h, w = x.shape
    c = c2 // (s * s)
    y = x.reshape(*lead, c, s, s, h, w)
    n = len(lead)
    y = y.transpose(*range(n), n, n + 3, n + 1, n + 4, n + 2)
    return y.reshape(*lead, c, h * s, w * s)


def _unshuffle(x: np.ndarray, s: int) -> np.ndarray:
    *lead, c, hs, ws = x.shape
    h, w = hs // s, ws // s
    y = x.reshape(*lead, c, h, s, w, s)
    n = len(lead)
    y = y.transpose(*range(n), n, n + 2, n + 4, n + 1, n + 3)
    return y.reshape(*lead, c * s * s, h, w)


def pixel_shuffle(x: np.ndarray, scale: int) -> np.ndarray:
    """Depth-to-space: (C*s*s, H, W) -> (C, s*H, s*W). For a 4x1x1 input
    (a, b, c, d) and s=2 the output plane is [[a, b], [c, d]]."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"pixel_shuffle expects (C, H, W), got shape {arr.shape}")
    if scale < 1:
        raise PreconditionError("scale must be >= 1")
    if arr.shape[0] % (scale * scale):
        raise DimensionError(
            f"channel count {arr.shape[0]} not divisible by scale^2 = {scale * scale}")
    return _shuffle(arr, scale).copy()


def pixel_unshuffle(x: np.ndarray, scale: int) -> np.ndarray:
    """Space-to-depth inverse of :func:`pixel_shuffle`."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"pixel_unshuffle expects (C, H, W), got shape {arr.shape}")
    if scale < 1:
        raise PreconditionError("scale must be >= 1")
    if arr.shape[1] % scale or arr.shape[2] % scale:
        raise DimensionError(f"spatial extents {arr.shape[1:]} not divisible by {scale}")
    return _unshuffle(arr, scale).copy()
