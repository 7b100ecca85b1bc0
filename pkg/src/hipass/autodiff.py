"""A small reverse-mode autodiff engine on numpy arrays.

Covers exactly the layers the deblurring network needs: strided
cross-correlation conv layers, dense layers, pixel shuffle, bilinear warping
with a stop-gradient on the flow, the usual activations, and a Charbonnier
loss. Plus Adam with bias correction, a cosine-restart learning-rate
schedule, and a finite-difference gradient checker.

Gradients flow only into subgraphs that contain trainable parameters;
constants (data) never trigger backward work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError, PreconditionError

# --------------------------------------------------------------------------
# graph core

_MAC_TALLY = None


class mac_counter:
    """Context manager that tallies conv/dense multiply-accumulates."""

    def __enter__(self):
        global _MAC_TALLY
        self._prev = _MAC_TALLY
        _MAC_TALLY = {"macs": 0}
        return self

    def __exit__(self, *exc):
        global _MAC_TALLY
        self.macs = _MAC_TALLY["macs"]
        _MAC_TALLY = self._prev
        return False


def _tally(n: int) -> None:
    if _MAC_TALLY is not None:
        _MAC_TALLY["macs"] += int(n)


class Var:
    """A node in the computation graph: a value, optional grad, parents."""

    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_bwd")

    def __init__(self, value, parents=(), bwd=None, requires_grad=False, name=None):
        self.value = value if isinstance(value, np.ndarray) else np.asarray(value)
        self.grad = None
        self._parents = tuple(parents)
        self._bwd = bwd
        self.requires_grad = requires_grad or any(p.requires_grad for p in self._parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def backward(self, seed=None) -> None:
        """Accumulate gradients into every requiring leaf below this node."""
        if seed is None:
            if self.value.size != 1:
                raise DimensionError("backward() without a seed needs a scalar output")
            seed = np.ones_like(self.value)
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        grads = {id(self): np.asarray(seed, dtype=self.value.dtype)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._bwd is None:  # leaf
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._bwd(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def constant(value, name=None) -> Var:
    return Var(np.asarray(value), name=name)


def parameter(value, name: str) -> Var:
    """A trainable leaf."""
    return Var(np.array(value, copy=True), requires_grad=True, name=name)


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# --------------------------------------------------------------------------
# elementwise / structural ops

def add(a: Var, b: Var) -> Var:
    out = a.value + b.value
    return Var(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Var, b: Var) -> Var:
    out = a.value - b.value
    return Var(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Var, b: Var) -> Var:
    out = a.value * b.value
    return Var(out, (a, b), lambda g: (_unbroadcast(g * b.value, a.shape),
                                       _unbroadcast(g * a.value, b.shape)))


def scale(a: Var, s: float) -> Var:
    return Var(a.value * s, (a,), lambda g: (g * s,))


def neg(a: Var) -> Var:
    return scale(a, -1.0)


def relu(a: Var) -> Var:
    out = np.maximum(a.value, 0)
    return Var(out, (a,), lambda g: (g * (a.value > 0),))


def leaky_relu(a: Var, slope: float = 0.1) -> Var:
    out = np.where(a.value > 0, a.value, slope * a.value)
    return Var(out, (a,), lambda g: (np.where(a.value > 0, g, slope * g),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(a: Var) -> Var:
    """log(1 + e^x), numerically stable; derivative at 0 is exactly 0.5."""
    out = np.logaddexp(np.zeros((), dtype=a.value.dtype), a.value)
    return Var(out, (a,), lambda g: (g * _sigmoid(a.value),))


def abs_(a: Var) -> Var:
    """|x| with subgradient 0 at x == 0."""
    return Var(np.abs(a.value), (a,), lambda g: (g * np.sign(a.value),))


def concat(vars_, axis: int = 1) -> Var:
    vs = list(vars_)
    out = np.concatenate([v.value for v in vs], axis=axis)
    sizes = [v.value.shape[axis] for v in vs]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return Var(out, tuple(vs), bwd)


def sum_(a: Var) -> Var:
    return Var(np.asarray(a.value.sum()), (a,),
               lambda g: (np.broadcast_to(g, a.shape).astype(a.value.dtype),))


def mean_(a: Var) -> Var:
    n = a.value.size
    return Var(np.asarray(a.value.mean()), (a,),
               lambda g: ((np.broadcast_to(g, a.shape) / n).astype(a.value.dtype),))


def fold_mean(vars_) -> Var:
    """Arithmetic mean of equally shaped scalars/arrays built with add+scale."""
    vs = list(vars_)
    total = vs[0]
    for v in vs[1:]:
        total = add(total, v)
    return scale(total, 1.0 / len(vs))


# --------------------------------------------------------------------------
# learned layers (cross-correlation convention)

def conv2d_layer(x: Var, w: Var, b=None, stride: int = 1, pad=None) -> Var:
    """Strided cross-correlation with zero padding; x (B,Ci,H,W), w (Co,Ci,kh,kw)."""
    xv, wv = x.value, w.value
    if xv.ndim != 4 or wv.ndim != 4:
        raise DimensionError(
            f"conv2d_layer wants 4-D input/weight, got {xv.shape} and {wv.shape}")
    bsz, ci, h, ww_ = xv.shape
    co, ci_w, kh, kw = wv.shape
    if ci != ci_w:
        raise DimensionError(f"input has {ci} channels, weight expects {ci_w}")
    p = kh // 2 if pad is None else pad
    s = stride
    ho = (h + 2 * p - kh) // s + 1
    wo = (ww_ + 2 * p - kw) // s + 1
    if ho < 1 or wo < 1:
        raise DimensionError("conv output would be empty")
    xp = np.pad(xv, ((0, 0), (0, 0), (p, p), (p, p))) if p else xv
    acc = np.zeros((bsz, ho, wo, co), dtype=np.result_type(xv, wv))
    for ki in range(kh):
        for kj in range(kw):
            xs = xp[:, :, ki:ki + (ho - 1) * s + 1:s, kj:kj + (wo - 1) * s + 1:s]
            acc += np.tensordot(xs, wv[:, :, ki, kj], axes=([1], [1]))
    out = np.ascontiguousarray(acc.transpose(0, 3, 1, 2))
    _tally(bsz * ci * co * kh * kw * ho * wo)

    def bwd(g):
        gt = g.transpose(0, 2, 3, 1)  # (B, ho, wo, Co)
        dw = None
        if w.requires_grad:
            dw = np.empty_like(wv)
            for ki in range(kh):
                for kj in range(kw):
                    xs = xp[:, :, ki:ki + (ho - 1) * s + 1:s, kj:kj + (wo - 1) * s + 1:s]
                    dw[:, :, ki, kj] = np.tensordot(gt, xs, axes=([0, 1, 2], [0, 2, 3]))
        dx = None
        if x.requires_grad:
            dxp_t = np.zeros((bsz, h + 2 * p, ww_ + 2 * p, ci), dtype=g.dtype)
            for ki in range(kh):
                for kj in range(kw):
                    contrib = np.tensordot(gt, wv[:, :, ki, kj], axes=([3], [0]))
                    dxp_t[:, ki:ki + (ho - 1) * s + 1:s,
                          kj:kj + (wo - 1) * s + 1:s] += contrib
            dxp = dxp_t.transpose(0, 3, 1, 2)
            dx = dxp[:, :, p:p + h, p:p + ww_] if p else dxp
            dx = np.ascontiguousarray(dx)
        return dx, dw

    node = Var(out, (x, w), bwd)
    if b is not None:
        node = add(node, reshape_bias(b, co))
    return node


def reshape_bias(b: Var, channels: int) -> Var:
    if b.value.shape != (channels,):
        raise DimensionError(f"bias shape {b.value.shape}, expected ({channels},)")
    return Var(b.value.reshape(1, channels, 1, 1), (b,),
               lambda g: (g.reshape(channels),))


def dense(x: Var, w: Var, b=None) -> Var:
    """x (B, F) @ w (F, O) + b."""
    xv, wv = x.value, w.value
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[0]:
        raise DimensionError(f"dense shape mismatch: {xv.shape} @ {wv.shape}")
    out = xv @ wv
    _tally(xv.shape[0] * wv.shape[0] * wv.shape[1])

    def bwd(g):
        dx = g @ wv.T if x.requires_grad else None
        dw = xv.T @ g if w.requires_grad else None
        return dx, dw

    node = Var(out, (x, w), bwd)
    if b is not None:
        if b.value.shape != (wv.shape[1],):
            raise DimensionError(f"bias shape {b.value.shape}, expected ({wv.shape[1]},)")
        node = add(node, b)
    return node


def global_avg_pool(x: Var) -> Var:
    xv = x.value
    if xv.ndim != 4:
        raise DimensionError(f"global_avg_pool wants (B,C,H,W), got {xv.shape}")
    hw = xv.shape[2] * xv.shape[3]
    out = xv.mean(axis=(2, 3))

    def bwd(g):
        return ((g / hw)[:, :, None, None] * np.ones_like(xv),)

    return Var(out, (x,), bwd)


def pixel_shuffle_layer(x: Var, s: int) -> Var:
    """Depth-to-space on (B, C*s*s, H, W)."""
    xv = x.value
    if xv.ndim != 4:
        raise DimensionError(f"pixel_shuffle_layer wants 4-D input, got {xv.shape}")
    if xv.shape[1] % (s * s):
        raise DimensionError(f"channels {xv.shape[1]} not divisible by {s * s}")
    bsz, c2, h, w = xv.shape
    c = c2 // (s * s)
    out = xv.reshape(bsz, c, s, s, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(
        bsz, c, h * s, w * s)

    def bwd(g):
        back = g.reshape(bsz, c, h, s, w, s).transpose(0, 1, 3, 5, 2, 4).reshape(
            bsz, c2, h, w)
        return (np.ascontiguousarray(back),)

    return Var(np.ascontiguousarray(out), (x,), bwd)


def bilinear_warp_stopgrad(x: Var, flow: np.ndarray) -> Var:
    """Backward-warp features by a plain-array flow; no gradient reaches the
    flow (it is not a graph node), gradients scatter into the features."""
    if isinstance(flow, Var):
        raise PreconditionError("flow must be a plain array: gradients never flow through it")
    xv = x.value
    flo = np.asarray(flow, dtype=xv.dtype)
    if xv.ndim != 4:
        raise DimensionError(f"bilinear_warp_stopgrad wants (B,C,H,W), got {xv.shape}")
    bsz, c, h, w = xv.shape
    if flo.shape != (bsz, 2, h, w):
        raise DimensionError(f"flow shape {flo.shape}, expected {(bsz, 2, h, w)}")
    xs = np.clip(np.arange(w)[None, None, :] + flo[:, 0], 0.0, w - 1.0)
    ys = np.clip(np.arange(h)[None, :, None] + flo[:, 1], 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0).astype(xv.dtype)
    fy = (ys - y0).astype(xv.dtype)
    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = fy * fx
    flat = xv.reshape(bsz, c, h * w)
    idx = [(y0 * w + x0), (y0 * w + x1), (y1 * w + x0), (y1 * w + x1)]
    weights = [w00, w01, w10, w11]
    out = np.zeros_like(xv)
    for ind, wt in zip(idx, weights):
        gathered = np.take_along_axis(flat, ind.reshape(bsz, 1, h * w), axis=2)
        out += gathered.reshape(bsz, c, h, w) * wt[:, None]

    def bwd(g):
        dflat = np.zeros((bsz, c, h * w), dtype=g.dtype)
        bi = np.arange(bsz)[:, None, None]
        ci = np.arange(c)[None, :, None]
        for ind, wt in zip(idx, weights):
            vals = (g * wt[:, None]).reshape(bsz, c, h * w)
            np.add.at(dflat, (bi, ci, ind.reshape(bsz, 1, h * w)), vals)
        return (dflat.reshape(bsz, c, h, w),)

    return Var(out, (x,), bwd)


def lincomb(alpha: Var, responses: np.ndarray) -> Var:
    """sum_j alpha[:, j] * responses[:, j] with constant response maps.

    alpha is (B, M), responses (B, M, C, H, W); the gradient flows into alpha
    only. This realizes dynamic-kernel filtering as mixing of fixed-basis
    responses.
    """
    if isinstance(responses, Var):
        raise PreconditionError("responses must be constant arrays")
    av = alpha.value
    r = np.asarray(responses, dtype=av.dtype)
    if av.ndim != 2 or r.ndim != 5 or r.shape[:2] != av.shape:
        raise DimensionError(f"lincomb shapes {av.shape} and {r.shape} incompatible")
    out = np.einsum("bm,bmchw->bchw", av, r, optimize=True)
    _tally(r.size)

    def bwd(g):
        return (np.einsum("bchw,bmchw->bm", g, r, optimize=True),)

    return Var(out, (alpha,), bwd)


def charbonnier_loss(pred: Var, target, eps: float = 1e-3) -> Var:
    """mean(sqrt((pred - target)^2 + eps^2)); equals eps at pred == target."""
    tv = target.value if isinstance(target, Var) else np.asarray(target, dtype=pred.value.dtype)
    if tv.shape != pred.value.shape:
        raise DimensionError(f"target shape {tv.shape} != pred shape {pred.value.shape}")
    d = pred.value - tv
    s = np.sqrt(d * d + eps * eps)
    n = d.size
    out = np.asarray(s.mean())
    parents = (pred, target) if isinstance(target, Var) else (pred,)

    def bwd(g):
        dpred = g * d / (s * n)
        if isinstance(target, Var):
            return dpred, -dpred
        return (dpred,)

    return Var(out, parents, bwd)


# --------------------------------------------------------------------------
# optimization

@dataclass
class ScheduleConfig:
    """Cosine schedule with warm restarts every ``restart_period`` steps."""

    initial_lr: float = 2e-4
    min_lr: float = 1e-7
    restart_period: int = 2000

    def __post_init__(self):
        if self.restart_period < 1:
            raise PreconditionError("restart_period must be >= 1")
        if not 0 <= self.min_lr <= self.initial_lr:
            raise PreconditionError("need 0 <= min_lr <= initial_lr")


def cosine_restart_lr(step: int, cfg: ScheduleConfig) -> float:
    """lr = min + 0.5 (init - min) (1 + cos(pi * (step mod P) / P))."""
    phase = (step % cfg.restart_period) / cfg.restart_period
    return cfg.min_lr + 0.5 * (cfg.initial_lr - cfg.min_lr) * (1.0 + math.cos(math.pi * phase))


@dataclass
class TrainState:
    """Adam moments and step count; moments are keyed by parameter name."""

    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    step: int = 0
    learning_rate: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: TrainState, params) -> float:
    """One bias-corrected Adam update in place; returns the lr used.

    Parameters with ``grad is None`` are treated as zero-gradient (their
    moments decay; with fresh state they stay unchanged).
    """
    lr = cosine_restart_lr(state.step, state.schedule)
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p in params:
        if p.name is None:
            raise PreconditionError("adam_step needs named parameters")
        g = p.grad if p.grad is not None else np.zeros_like(p.value)
        m = state.m.get(p.name)
        if m is None:
            m = np.zeros_like(p.value, dtype=np.float64)
            v = np.zeros_like(p.value, dtype=np.float64)
        else:
            v = state.v[p.name]
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[p.name] = m
        state.v[p.name] = v
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.value = (p.value - update).astype(p.value.dtype, copy=False)
    state.learning_rate = lr
    return lr


# --------------------------------------------------------------------------
# gradient checking

@dataclass
class GradCheckEntry:
    name: str
    max_rel_err: float
    frozen: bool = False


@dataclass
class GradCheckReport:
    entries: list
    tolerance: float

    @property
    def max_rel_err(self) -> float:
        errs = [e.max_rel_err for e in self.entries if not e.frozen]
        return max(errs) if errs else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def grad_check(build_loss, params, h: float = 1e-5, tolerance: float = 1e-4,
               rng=None, max_entries=None) -> GradCheckReport:
    """Compare backward gradients against central finite differences.

    ``build_loss`` re-evaluates the scalar loss from the current parameter
    values. Per-parameter error is max |analytic - numeric| divided by the
    larger of the two gradients' max magnitudes (floored at 1e-8). Frozen
    (non-trainable) Vars are reported with zero gradient and not differenced.
    ``max_entries`` optionally spot-checks a random subset of each parameter.
    """
    entries = []
    zero_grads([p for p in params if p.requires_grad])
    loss = build_loss()
    if loss.value.size != 1:
        raise DimensionError("grad_check needs a scalar loss")
    loss.backward()
    for p in params:
        if not p.requires_grad:
            entries.append(GradCheckEntry(p.name or "frozen", 0.0, frozen=True))
            continue
        analytic = p.grad if p.grad is not None else np.zeros_like(p.value)
        analytic = np.asarray(analytic, dtype=np.float64)
        flat = p.value.reshape(-1)
        indices = range(flat.size)
        if max_entries is not None and flat.size > max_entries:
            gen = rng or np.random.default_rng(0)
            indices = sorted(gen.choice(flat.size, size=max_entries, replace=False))
        picked = list(indices)
        numeric = np.zeros(len(picked))
        for j, i in enumerate(picked):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(build_loss().value)
            flat[i] = orig - h
            lm = float(build_loss().value)
            flat[i] = orig
            numeric[j] = (lp - lm) / (2.0 * h)
        ana = analytic.reshape(-1)[picked]
        denom = max(float(np.max(np.abs(ana), initial=0.0)),
                    float(np.max(np.abs(numeric), initial=0.0)), 1e-8)
        err = float(np.max(np.abs(ana - numeric), initial=0.0)) / denom
        entries.append(GradCheckEntry(p.name or "param", err))
        zero_grads([p])
    return GradCheckReport(entries=entries, tolerance=tolerance)


def check_finite_loss(value: float, step: int) -> None:
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite loss {value!r} at iteration {step}")
