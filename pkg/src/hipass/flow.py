"""Block-matching optical flow via diamond search.

A deliberately simple motion estimator: 8x8 blocks, SAD cost, displacement
search within +-4 px. ``estimate_flow(a, b)`` returns the flow such that
backward-warping ``b`` by it approximates ``a``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .tensorops import Frame

_LARGE_DIAMOND = ((0, 0), (2, 0), (-2, 0), (0, 2), (0, -2), (1, 1), (1, -1), (-1, 1), (-1, -1))
_SMALL_DIAMOND = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1))


def _as_plane(x) -> np.ndarray:
    if isinstance(x, Frame):
        x = x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=0)
    if arr.ndim != 2:
        raise DimensionError(f"expected (H, W) or (C, H, W), got shape {arr.shape}")
    return arr


def estimate_flow(a, b, block_size: int = 8, search_range: int = 4) -> np.ndarray:
    """Per-block displacement (u, v) minimizing SAD(a_block, b at block+d).

    Output is a dense (2, H, W) field with the block displacement broadcast
    over its pixels; identical inputs give exactly zero flow.
    """
    pa = _as_plane(a)
    pb = _as_plane(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"frame shapes differ: {pa.shape} vs {pb.shape}")
    h, w = pa.shape
    r = search_range
    pb_pad = np.pad(pb, r, mode="edge")
    flow = np.zeros((2, h, w))
    for by in range(0, h, block_size):
        for bx in range(0, w, block_size):
            y1 = min(by + block_size, h)
            x1 = min(bx + block_size, w)
            ref = pa[by:y1, bx:x1]

            def cost(dy, dx):
                cand = pb_pad[by + r + dy:y1 + r + dy, bx + r + dx:x1 + r + dx]
                return float(np.abs(ref - cand).sum())

            best = (0, 0)
            best_cost = cost(0, 0)
            # large diamond until the center wins, then one small-diamond refine
            while True:
                center = best
                for dy, dx in _LARGE_DIAMOND[1:]:
                    cy, cx = center[0] + dy, center[1] + dx
                    if abs(cy) > r or abs(cx) > r:
                        continue
                    c = cost(cy, cx)
                    if c < best_cost:
                        best_cost = c
                        best = (cy, cx)
                if best == center:
                    break
            for dy, dx in _SMALL_DIAMOND[1:]:
                cy, cx = best[0] + dy, best[1] + dx
                if abs(cy) > r or abs(cx) > r:
                    continue
                c = cost(cy, cx)
                if c < best_cost:
                    best_cost = c
                    best = (cy, cx)
            flow[0, by:y1, bx:x1] = best[1]
            flow[1, by:y1, bx:x1] = best[0]
    return flow
