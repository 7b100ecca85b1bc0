"""High-pass kernel algebra: fixed bases, non-negative mixing, spectra.

The central object is a small basis of zero-sum (DC-blocking) space-time
kernels. Any non-negative mixture of zero-sum kernels is itself zero-sum, so
dynamically predicted mixing weights can never produce a low-pass kernel; the
checks in this module make that closure property testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, PreconditionError
from .tensorops import rotate90

ZERO_SUM_TOL = 1e-12

# Horizontal-gradient Sobel (responds to variation along x) and its vertical
# counterpart, both scaled by 1/4.
SOBEL_H = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]) / 4.0
SOBEL_V = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]) / 4.0

LAPLACIAN_4 = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])

KIRSCH_H = np.array([[-3.0, -3.0, 5.0], [-3.0, 0.0, 5.0], [-3.0, -3.0, 5.0]]) / 15.0
KIRSCH_V = np.array([[5.0, 5.0, 5.0], [-3.0, 0.0, -3.0], [-3.0, -3.0, -3.0]]) / 15.0

# Temporal taps (ordered past, present, future), applied at the center pixel.
TEMPORAL_DIFF = np.array([0.0, -1.0, 1.0])       # x_{t+1} - x_t
TEMPORAL_MEAN_DIFF = np.array([1.0, -0.5, -0.5])  # x_{t-1} - (x_t + x_{t+1})/2
TEMPORAL_GRAD = np.array([0.5, -1.0, 0.5])        # second difference / 2


def embed_spatial(kernel2d: np.ndarray, t_extent: int = 3) -> np.ndarray:
    """Place a 2-D kernel at the center temporal tap of a (T, Hk, Wk) kernel."""
    k2 = np.asarray(kernel2d, dtype=np.float64)
    if k2.ndim != 2:
        raise DimensionError("embed_spatial expects a 2-D kernel")
    if t_extent % 2 == 0:
        raise DimensionError("temporal extent must be odd")
    out = np.zeros((t_extent,) + k2.shape)
    out[t_extent // 2] = k2
    return out


def embed_temporal(taps: np.ndarray, h: int = 3, w: int = 3) -> np.ndarray:
    """Broadcast 1-D temporal taps at the center pixel of (T, h, w) slices."""
    t = np.asarray(taps, dtype=np.float64)
    if t.ndim != 1:
        raise DimensionError("embed_temporal expects 1-D taps")
    if h % 2 == 0 or w % 2 == 0:
        raise DimensionError("spatial extents must be odd")
    out = np.zeros((t.shape[0], h, w))
    out[:, h // 2, w // 2] = t
    return out


@dataclass
class KernelBasis:
    """A fixed family of zero-sum kernels with common (Tk, Hk, Wk) extents."""

    kernels: list = field(default_factory=list)
    names: list = field(default_factory=list)

    def __post_init__(self):
        if not self.kernels:
            raise PreconditionError("basis needs at least one kernel")
        ks = [np.array(k, dtype=np.float64, copy=True) for k in self.kernels]
        ref = ks[0].shape
        if len(ref) != 3:
            raise DimensionError(f"basis kernels must be (Tk, Hk, Wk), got {ref}")
        for i, k in enumerate(ks):
            if k.shape != ref:
                raise DimensionError(f"kernel {i} shape {k.shape} != {ref}")
            if abs(k.sum()) > ZERO_SUM_TOL:
                raise PreconditionError(
                    f"kernel {i} is not zero-sum (sum={k.sum():.3e})")
        if not self.names:
            self.names = [f"k{i}" for i in range(len(ks))]
        if len(self.names) != len(ks):
            raise DimensionError("names/kernels length mismatch")
        self.kernels = ks

    @property
    def size(self) -> int:
        return len(self.kernels)

    @property
    def extents(self) -> tuple:
        return self.kernels[0].shape

    def stacked(self) -> np.ndarray:
        return np.stack(self.kernels)

    def rotated(self) -> "KernelBasis":
        """The same basis with every kernel rotated 90 degrees CCW."""
        return KernelBasis([rotate90(k) for k in self.kernels],
                          [f"{n}-rot90" for n in self.names])


@dataclass
class CoefficientVector:
    """Non-negative mixing weights over a basis."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if vals.size < 1:
            raise DimensionError("empty coefficient vector")
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("coefficients must be finite")
        if vals.min() < 0.0:
            raise PreconditionError(
                f"coefficients must be non-negative, got min {vals.min():.3e}")
        self.values = vals

    def __len__(self) -> int:
        return self.values.size


@dataclass
class DynamicKernel:
    """A mixed kernel, its 90-degree-rotated counterpart (mixed from the
    rotated basis with the same coefficients), and the coefficients used."""

    kernel: np.ndarray          # (1, Tk, Hk, Wk)
    rotated: np.ndarray         # (1, Tk, Hk, Wk)
    coefficients: CoefficientVector


def combine(basis: KernelBasis, coefficients) -> DynamicKernel:
    """Mix the basis with non-negative coefficients: k = sum_j a_j * k_j.

    The rotated counterpart uses the rotated basis with the *same*
    coefficients. All-zero coefficients are allowed (producing the zero
    kernel); negative coefficients are rejected.
    """
    coeff = coefficients if isinstance(coefficients, CoefficientVector) \
        else CoefficientVector(np.asarray(coefficients))
    if len(coeff) != basis.size:
        raise DimensionError(
            f"{len(coeff)} coefficients for a basis of size {basis.size}")
    stack = basis.stacked()
    kernel = np.tensordot(coeff.values, stack, axes=(0, 0))
    rot = np.tensordot(coeff.values, rotate90(stack), axes=(0, 0))
    return DynamicKernel(kernel[None], rot[None], coeff)


def gram_schmidt(new: np.ndarray, against: np.ndarray) -> np.ndarray:
    """Remove from ``new`` its projection onto ``against`` (same shape)."""
    a = np.asarray(new, dtype=np.float64)
    b = np.asarray(against, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    denom = float(np.vdot(b, b).real)
    if denom == 0.0:
        raise PreconditionError("cannot orthogonalize against a zero tensor")
    return a - (float(np.vdot(b, a).real) / denom) * b


def _effective_kernel(kernel: np.ndarray) -> np.ndarray:
    """Drop leading singleton axes; result has rank 1, 2 or 3."""
    arr = np.asarray(kernel, dtype=np.float64)
    while arr.ndim > 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim not in (1, 2, 3):
        raise DimensionError(f"kernel rank {arr.ndim} unsupported")
    return arr


def sample_response(kernel: np.ndarray, grid: int = 64) -> np.ndarray:
    """Complex DTFT of a kernel sampled on a uniform [0, pi] grid per axis.

    The map kernel -> sampled response is linear, which is what the mixing
    linearity checks rely on. Phases use tap indices 0..n-1 per axis.
    """
    if grid < 8:
        raise PreconditionError("grid must be >= 8 samples per axis")
    arr = _effective_kernel(kernel)
    freqs = np.linspace(0.0, np.pi, grid)
    resp = arr.astype(np.complex128)
    for axis in range(arr.ndim):
        n = arr.shape[axis]
        mat = np.exp(-1j * np.outer(freqs, np.arange(n)))  # (grid, n)
        resp = np.moveaxis(np.tensordot(mat, resp, axes=(1, axis)), 0, axis)
    return resp


@dataclass
class FrequencyResponse:
    """Sampled DTFT magnitudes of a kernel plus summary facts.

    ``magnitudes`` has one axis per effective kernel axis: pure temporal
    kernels (center-pixel taps) reduce to a 1-D response along time, kernels
    with a single nonzero temporal slice to the 2-D spatial response of that
    slice, and mixed space-time kernels keep the full 3-D grid. ``dc_gain``
    is |sum of all entries| and always equals the zero-frequency magnitude.
    """

    magnitudes: np.ndarray
    frequencies: tuple
    dc_gain: float
    cutoff: float
    peak_frequency: tuple


def _characteristic_kernel(kernel: np.ndarray) -> np.ndarray:
    """Reduce a 3-D kernel to the axes that carry its structure."""
    arr = _effective_kernel(kernel)
    if arr.ndim != 3:
        return arr
    t, h, w = arr.shape
    mask = np.ones((h, w), dtype=bool)
    mask[h // 2, w // 2] = False
    if not arr[:, mask].any():
        return arr[:, h // 2, w // 2]  # center-pixel temporal taps
    nonzero_taps = [i for i in range(t) if arr[i].any()]
    if len(nonzero_taps) == 1:
        return arr[nonzero_taps[0]]
    return arr


def frequency_response(kernel: np.ndarray, grid: int = 64) -> FrequencyResponse:
    """Characterize a kernel's DTFT on a [0, pi] grid (>= 8 samples per axis).

    ``cutoff`` is the smallest sampled radial frequency whose magnitude first
    reaches 1/sqrt(2) of the maximum (NaN for the zero kernel);
    ``peak_frequency`` is the grid point of maximum magnitude.
    """
    arr = _effective_kernel(kernel)
    char = _characteristic_kernel(arr)
    mags = np.abs(sample_response(char, grid))
    freqs = tuple(np.linspace(0.0, np.pi, grid) for _ in range(char.ndim))
    mesh = np.meshgrid(*freqs, indexing="ij") if char.ndim > 1 else [freqs[0]]
    radii = np.sqrt(sum(m * m for m in mesh))
    peak_flat = int(np.argmax(mags))
    peak_idx = np.unravel_index(peak_flat, mags.shape)
    peak = tuple(freqs[a][peak_idx[a]] for a in range(char.ndim))
    max_mag = float(mags.flat[peak_flat])
    if max_mag <= 0.0:
        cutoff = float("nan")
    else:
        order = np.argsort(radii, axis=None, kind="stable")
        above = mags.reshape(-1)[order] >= max_mag / np.sqrt(2.0)
        first = int(np.argmax(above))
        cutoff = float(radii.reshape(-1)[order][first])
    return FrequencyResponse(
        magnitudes=mags,
        frequencies=freqs,
        dc_gain=float(abs(arr.sum())),
        cutoff=cutoff,
        peak_frequency=peak,
    )


@dataclass
class HighPassReport:
    """Outcome of a DC-blocking check with spectral summary facts."""

    is_high_pass: bool
    dc_gain: float
    tolerance: float
    cutoff: float
    peak_frequency: tuple

    def __bool__(self) -> bool:
        return self.is_high_pass


def verify_high_pass(kernel: np.ndarray, tolerance: float = 1e-9,
                     grid: int = 16) -> HighPassReport:
    """Check |DC gain| <= tolerance and report cutoff/peak facts."""
    resp = frequency_response(kernel, grid=grid)
    return HighPassReport(
        is_high_pass=resp.dc_gain <= tolerance,
        dc_gain=resp.dc_gain,
        tolerance=tolerance,
        cutoff=resp.cutoff,
        peak_frequency=resp.peak_frequency,
    )


def mean_removal_projection(a: np.ndarray) -> np.ndarray:
    """Apply (I - (1/n) 11^T) to the flattened tensor, i.e. remove the mean."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.size < 2:
        raise DimensionError("projection needs at least 2 entries")
    return arr - arr.mean()


def random_high_pass(rows: int, cols: int, seed: int) -> np.ndarray:
    """A seeded standard-normal draw with its mean removed; sums to zero."""
    if rows * cols < 2:
        raise DimensionError("need at least 2 entries")
    rng = np.random.default_rng(seed)
    return mean_removal_projection(rng.standard_normal((rows, cols)))


def make_default_basis() -> KernelBasis:
    """The standard 4-kernel basis over (3, 3, 3) extents.

    Two scaled Sobel kernels at the center temporal tap plus two temporal
    kernels at the center pixel: the forward difference (0, -1, 1) and its
    orthogonalized complement (1, -1/2, -1/2).
    """
    return KernelBasis(
        kernels=[
            embed_spatial(SOBEL_H),
            embed_spatial(SOBEL_V),
            embed_temporal(TEMPORAL_DIFF),
            embed_temporal(TEMPORAL_MEAN_DIFF),
        ],
        names=["sobel-h", "sobel-v", "temporal-diff", "temporal-mean-diff"],
    )


ABLATION_KINDS = ("laplacian", "kirsch", "sobel", "temporal", "sobel+temporal", "random")


def make_ablation_bases(kind: str, seed: int = 0) -> KernelBasis:
    """Alternative fixed bases for controlled comparisons."""
    if kind == "laplacian":
        return KernelBasis([embed_spatial(LAPLACIAN_4)], ["laplacian"])
    if kind == "kirsch":
        return KernelBasis([embed_spatial(KIRSCH_H), embed_spatial(KIRSCH_V)],
                           ["kirsch-h", "kirsch-v"])
    if kind == "sobel":
        return KernelBasis([embed_spatial(SOBEL_H), embed_spatial(SOBEL_V)],
                           ["sobel-h", "sobel-v"])
    if kind == "temporal":
        return KernelBasis([embed_temporal(TEMPORAL_GRAD)], ["temporal-grad"])
    if kind == "sobel+temporal":
        return KernelBasis(
            [embed_spatial(SOBEL_H), embed_spatial(SOBEL_V), embed_temporal(TEMPORAL_GRAD)],
            ["sobel-h", "sobel-v", "temporal-grad"])
    if kind == "random":
        kernels = [embed_spatial(random_high_pass(3, 3, seed + j)) for j in range(4)]
        return KernelBasis(kernels, [f"random-{j}" for j in range(4)])
    raise ValueError(f"unknown ablation kind {kind!r}, expected one of {ABLATION_KINDS}")


BASIS_KINDS = ("default",) + ABLATION_KINDS


def resolve_basis(name: str, seed: int = 0) -> KernelBasis:
    """Look up a basis by name ('default' or an ablation kind)."""
    if name == "default":
        return make_default_basis()
    return make_ablation_bases(name, seed=seed)


def write_kernel_text(path, kernel: np.ndarray, comment: str = "") -> None:
    """Write a kernel as plain text: a 'T H W' header, then one whitespace
    block of H rows x W decimals per temporal slice."""
    arr = np.asarray(kernel, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise DimensionError(f"kernel must be 2-D or 3-D, got shape {arr.shape}")
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(f"{arr.shape[0]} {arr.shape[1]} {arr.shape[2]}")
    for t in range(arr.shape[0]):
        lines.append("")
        for row in arr[t]:
            lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_kernel_text(path) -> np.ndarray:
    """Read a kernel written by :func:`write_kernel_text`."""
    from .errors import FormatError

    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if len(tokens) < 3:
        raise FormatError(f"{path}: missing 'T H W' header")
    try:
        t, h, w = (int(x) for x in tokens[:3])
        values = [float(x) for x in tokens[3:]]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if t < 1 or h < 1 or w < 1:
        raise FormatError(f"{path}: non-positive extents {t}x{h}x{w}")
    if len(values) != t * h * w:
        raise FormatError(
            f"{path}: expected {t * h * w} values for extents {t}x{h}x{w}, got {len(values)}")
    return np.array(values).reshape(t, h, w)
