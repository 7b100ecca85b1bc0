"""Brute-force reference implementations the fast code is checked against.

Everything here trades speed for obviousness: nested loops, explicit
matrices, direct DTFT sums. Nothing imports the fast paths it verifies.
"""

import numpy as np


def conv2d_loops(image: np.ndarray, kernel: np.ndarray, padding: str = "same-zero"):
    """True 2-D convolution, quadruple loop. image (H, W), odd kernel."""
    img = np.asarray(image, dtype=np.float64)
    ker = np.asarray(kernel, dtype=np.float64)
    kh, kw = ker.shape
    ph, pw = kh // 2, kw // 2
    h, w = img.shape
    if padding == "valid":
        out = np.zeros((h - kh + 1, w - kw + 1))
        for y in range(out.shape[0]):
            for x in range(out.shape[1]):
                acc = 0.0
                for i in range(kh):
                    for j in range(kw):
                        acc += ker[i, j] * img[y + kh - 1 - i, x + kw - 1 - j]
                out[y, x] = acc
        return out
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(kh):
                for j in range(kw):
                    yy = y - (i - ph)
                    xx = x - (j - pw)
                    if padding == "same-zero":
                        if 0 <= yy < h and 0 <= xx < w:
                            acc += ker[i, j] * img[yy, xx]
                    elif padding == "same-replicate":
                        acc += ker[i, j] * img[min(max(yy, 0), h - 1),
                                               min(max(xx, 0), w - 1)]
                    elif padding == "same-wrap":
                        acc += ker[i, j] * img[yy % h, xx % w]
                    else:
                        raise ValueError(padding)
            out[y, x] = acc
    return out


def conv3d_loops(window: np.ndarray, kernel: np.ndarray, padding: str = "same-zero"):
    """Reference space-time filtering: correlation along frames (tap t hits
    frame t), true convolution in space. window (C, Tk, H, W)."""
    win = np.asarray(window, dtype=np.float64)
    ker = np.asarray(kernel, dtype=np.float64)
    c = win.shape[0]
    planes = []
    for ch in range(c):
        acc = None
        for t in range(ker.shape[0]):
            term = conv2d_loops(win[ch, t], ker[t], padding)
            acc = term if acc is None else acc + term
        planes.append(acc)
    return np.stack(planes)


def dft2d_loops(image: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT, quadruple loop."""
    img = np.asarray(image, dtype=np.complex128)
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for y in range(h):
                for x in range(w):
                    acc += img[y, x] * np.exp(-2j * np.pi * (u * y / h + v * x / w))
            out[u, v] = acc
    return out


def dtft_at(kernel: np.ndarray, freqs_per_axis) -> complex:
    """Direct DTFT sum of an n-D kernel at one frequency point; tap phases
    run over indices 0..n-1 per axis."""
    ker = np.asarray(kernel, dtype=np.float64)
    acc = 0j
    for idx in np.ndindex(*ker.shape):
        phase = sum(f * i for f, i in zip(freqs_per_axis, idx))
        acc += ker[idx] * np.exp(-1j * phase)
    return acc


def mean_projector(n: int) -> np.ndarray:
    """The explicit mean-removal matrix I - (1/n) 11^T."""
    return np.eye(n) - np.ones((n, n)) / n


def bilinear_warp_loops(image: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Reference backward warp with border clamping. image (C, H, W)."""
    img = np.asarray(image, dtype=np.float64)
    c, h, w = img.shape
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            sx = min(max(x + flow[0, y, x], 0.0), w - 1.0)
            sy = min(max(y + flow[1, y, x], 0.0), h - 1.0)
            x0, y0 = int(np.floor(sx)), int(np.floor(sy))
            x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
            ax, ay = sx - x0, sy - y0
            for ch in range(c):
                top = (1 - ax) * img[ch, y0, x0] + ax * img[ch, y0, x1]
                bot = (1 - ax) * img[ch, y1, x0] + ax * img[ch, y1, x1]
                out[ch, y, x] = (1 - ay) * top + ay * bot
    return out


def gaussian_kernel(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def step_edge(h: int = 48, w: int = 48, low: float = 0.2, high: float = 0.8):
    img = np.full((h, w), low)
    img[:, w // 2:] = high
    return img
