"""Image and video quality metrics plus frequency-band error analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PreconditionError
from .pnm import write_pgm
from .tensorops import Frame, VideoClip, conv2d
from .vten import write_tensors

PSNR_CAP = 100.0
N_BANDS = 10

# Rec.601 luma weights, used to reduce RGB to one plane before SSIM.
_LUMA = np.array([0.299, 0.587, 0.114])


def _to_array(x) -> np.ndarray:
    if isinstance(x, VideoClip):
        return x.data
    if isinstance(x, Frame):
        return x.values
    return np.asarray(x, dtype=np.float64)


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 100 (exact match -> 100).

    Clip inputs (4-D stacks) score each frame separately and return the mean
    of the per-frame values.
    """
    av, bv = _to_array(a), _to_array(b)
    if av.shape != bv.shape:
        raise DimensionError(f"shape mismatch {av.shape} vs {bv.shape}")
    if av.ndim == 4:
        return float(np.mean([psnr(fa, fb, peak) for fa, fb in zip(av, bv)]))
    mse = float(np.mean((av - bv) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse)))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def _luma_plane(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[0] == 1:
        return arr[0]
    if arr.ndim == 3 and arr.shape[0] == 3:
        return np.tensordot(_LUMA, arr, axes=(0, 0))
    raise DimensionError(f"expected (H, W), (1, H, W) or (3, H, W), got {arr.shape}")


def ssim(a, b, peak: float = 1.0) -> float:
    """Mean structural similarity with the standard 11x11 sigma-1.5 Gaussian
    window and valid-mode local statistics. RGB inputs are reduced to luma."""
    x = _luma_plane(_to_array(a))
    y = _luma_plane(_to_array(b))
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    win = _gaussian_window()
    if min(x.shape) < win.shape[0]:
        raise PreconditionError(
            f"image extents {x.shape} smaller than the {win.shape[0]}x"
            f"{win.shape[0]} window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu_x = conv2d(x, win, "valid")
    mu_y = conv2d(y, win, "valid")
    xx = conv2d(x * x, win, "valid") - mu_x * mu_x
    yy = conv2d(y * y, win, "valid") - mu_y * mu_y
    xy = conv2d(x * y, win, "valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


# -- radial frequency bands ---------------------------------------------------

def normalized_radius_grid(h: int, w: int) -> np.ndarray:
    """Radial frequency of every DFT bin, scaled so the outermost corner bin
    sits at 2*pi. Bin (0, 0) is 0."""
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    r = np.hypot(fy, fx)
    corner = np.hypot(np.abs(fy).max(), np.abs(fx).max())
    return r * (2.0 * np.pi / corner)


def band_index_grid(h: int, w: int, n_bands: int = N_BANDS) -> np.ndarray:
    """Index of the radial band each DFT bin falls in; bands split [0, 2*pi]
    evenly, the last band closed at the top."""
    r = normalized_radius_grid(h, w)
    idx = np.floor(r / (2.0 * np.pi / n_bands)).astype(np.int64)
    return np.minimum(idx, n_bands - 1)


@dataclass
class SubbandReport:
    """Per-band spectral MSE of an output against a reference output.

    ``output_mse`` and ``reference_mse`` sum (over bands) to the plain image
    MSE of the respective signal; ``relative_mse`` is their per-band
    difference (output minus reference), so negative values mean the output
    beats the reference in that band.
    """

    band_edges: np.ndarray
    output_mse: np.ndarray
    reference_mse: np.ndarray
    relative_mse: np.ndarray
    reference_variant: str = "reference"

    def rows(self) -> list:
        """One record per band: {band, lo, hi, output_mse, reference_mse,
        relative_mse}."""
        out = []
        for i in range(len(self.output_mse)):
            out.append({
                "band": i,
                "lo": float(self.band_edges[i]),
                "hi": float(self.band_edges[i + 1]),
                "output_mse": float(self.output_mse[i]),
                "reference_mse": float(self.reference_mse[i]),
                "relative_mse": float(self.relative_mse[i]),
            })
        return out

    def table(self) -> str:
        """Fixed-width text table of the per-band rows."""
        lines = [f"reference: {self.reference_variant}",
                 f"{'band':>4} {'lo':>8} {'hi':>8} {'output':>12} "
                 f"{'reference':>12} {'relative':>12}"]
        for r in self.rows():
            lines.append(
                f"{r['band']:>4} {r['lo']:>8.4f} {r['hi']:>8.4f} "
                f"{r['output_mse']:>12.6e} {r['reference_mse']:>12.6e} "
                f"{r['relative_mse']:>12.6e}")
        return "\n".join(lines)


def _band_power(err_frames: np.ndarray, idx: np.ndarray, n_bands: int) -> np.ndarray:
    """Parseval band split: sum of |FFT|^2 / (H*W)^2 per band, averaged over
    frames and channels. Bands therefore sum to the spatial MSE."""
    t, c, h, w = err_frames.shape
    acc = np.zeros(n_bands)
    flat_idx = idx.ravel()
    for f in range(t):
        for ch in range(c):
            p = np.abs(np.fft.fft2(err_frames[f, ch])) ** 2
            acc += np.bincount(flat_idx, weights=p.ravel(), minlength=n_bands)
    return acc / (t * c * (h * w) ** 2)


def subband_mse(outputs, reference_outputs, ground_truth,
                n_bands: int = N_BANDS,
                reference_variant: str = "reference") -> SubbandReport:
    """Compare two restorations of the same ground truth band by band."""
    out = _to_array(outputs)
    ref = _to_array(reference_outputs)
    gt = _to_array(ground_truth)
    if not out.shape == ref.shape == gt.shape:
        raise DimensionError(
            f"shape mismatch: outputs {out.shape}, reference {ref.shape}, "
            f"ground truth {gt.shape}")
    if out.ndim == 3:
        out, ref, gt = out[None], ref[None], gt[None]
    if out.ndim != 4:
        raise DimensionError(f"expected (T, C, H, W) stacks, got {out.shape}")
    h, w = out.shape[2:]
    idx = band_index_grid(h, w, n_bands)
    out_mse = _band_power(out - gt, idx, n_bands)
    ref_mse = _band_power(ref - gt, idx, n_bands)
    rel = out_mse - ref_mse
    return SubbandReport(
        band_edges=np.linspace(0.0, 2.0 * np.pi, n_bands + 1),
        output_mse=out_mse,
        reference_mse=ref_mse,
        relative_mse=rel,
        reference_variant=reference_variant,
    )


def spectrum_dump(image, base_path: str) -> np.ndarray:
    """Write the centered log magnitude spectrum of a single image plane.

    Produces ``<base_path>.pgm`` (log magnitude rescaled to the full gray
    range for eyeballing) and ``<base_path>.vten`` holding the raw float64
    values under the name ``log_magnitude`` for lossless reload. Returns the
    raw array.
    """
    plane = _luma_plane(_to_array(image))
    if plane.ndim != 2:
        raise DimensionError(f"expected one image plane, got shape {plane.shape}")
    mag = np.log1p(np.abs(np.fft.fftshift(np.fft.fft2(plane))))
    top = mag.max()
    scaled = mag / top if top > 0 else mag
    write_pgm(f"{base_path}.pgm", scaled)
    write_tensors(f"{base_path}.vten", {"log_magnitude": mag})
    return mag
