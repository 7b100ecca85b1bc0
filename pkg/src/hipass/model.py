"""The recurrent video deblurring network with dynamically mixed
high-pass extraction paths.

Per frame, N extraction paths each predict non-negative mixing weights over a
fixed zero-sum kernel basis, filter the surrounding frame window with the
mixed kernel and its 90-degree-rotated counterpart (same weights), and feed
{h, h_rot, |h| + |h_rot|} into a downsampling preprocessor. An identity path
preprocesses the raw frame. A shared recurrent module consumes the path
features plus the flow-warped previous state, once per temporal direction;
a pixel-shuffle upsampler turns both direction states into a residual that is
added to the input frame.

Because each path filters with a *mixture of fixed bases*, filtering is
implemented as mixing of fixed-basis responses, which keeps the mixed kernel
zero-sum by construction (the closure property the kernel algebra verifies).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ScheduleConfig, TrainState, Var
from .errors import DimensionError, FormatError, PreconditionError
from .flow import estimate_flow
from .kernels import (CoefficientVector, KernelBasis, resolve_basis)
from .tensorops import VideoClip, conv3d_temporal, rotate90
from .vten import read_tensors, write_tensors

VARIANTS = ("adaptive", "direct", "naive", "identity")
DOWNSAMPLE_FACTORS = (1.0, 0.5, 0.25)
FLOW_MODES = ("block", "zero")


@dataclass
class ModelConfig:
    """Architecture knobs; the defaults are the desk-scale configuration."""

    variant: str = "adaptive"
    n_paths: int = 2
    span: int = 1              # window reaches span frames to each side
    in_channels: int = 1
    channels: int = 16
    n_res_blocks: int = 4
    downsample: float = 0.25
    basis: str = "default"
    upsample_channels: int = 8
    coeff_hidden: tuple = (8, 16)
    lrelu_slope: float = 0.1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.n_paths < 0:
            raise PreconditionError("n_paths must be >= 0")
        if self.span < 1:
            raise PreconditionError("span must be >= 1")
        if self.in_channels not in (1, 3):
            raise DimensionError("in_channels must be 1 or 3")
        if float(self.downsample) not in DOWNSAMPLE_FACTORS:
            raise ValueError(
                f"downsample must be one of {DOWNSAMPLE_FACTORS}, got {self.downsample}")

    @property
    def window_len(self) -> int:
        return 2 * self.span + 1

    @property
    def effective_paths(self) -> int:
        return 0 if self.variant == "identity" else self.n_paths

    @property
    def down_denominator(self) -> int:
        return round(1.0 / self.downsample)


class ParamStore:
    """Named trainable leaves with a fixed dtype."""

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._params = {}

    def add(self, name: str, value: np.ndarray) -> Var:
        if name in self._params:
            raise PreconditionError(f"duplicate parameter name {name!r}")
        var = ad.parameter(np.asarray(value, dtype=self.dtype), name)
        self._params[name] = var
        return var

    def items(self):
        return self._params.items()

    def values(self):
        return list(self._params.values())

    def __getitem__(self, name: str) -> Var:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def parameter_count(self) -> int:
        return sum(v.value.size for v in self._params.values())


class Conv:
    def __init__(self, store, rng, name, cin, cout, k=3, stride=1, gain=math.sqrt(2.0)):
        std = gain / math.sqrt(cin * k * k)
        self.w = store.add(f"{name}.w", rng.normal(0.0, std, size=(cout, cin, k, k)))
        self.b = store.add(f"{name}.b", np.zeros(cout))
        self.stride = stride

    def __call__(self, x: Var) -> Var:
        return ad.conv2d_layer(x, self.w, self.b, stride=self.stride)


class Dense:
    def __init__(self, store, rng, name, fin, fout, gain=1.0):
        std = gain / math.sqrt(fin)
        self.w = store.add(f"{name}.w", rng.normal(0.0, std, size=(fin, fout)))
        self.b = store.add(f"{name}.b", np.zeros(fout))

    def __call__(self, x: Var) -> Var:
        return ad.dense(x, self.w, self.b)


class ResBlock:
    """conv -> lrelu -> conv plus identity skip, no normalization.

    The branch-ending conv starts small so stacking blocks keeps feature
    variance near the input's."""

    def __init__(self, store, rng, name, ch, slope):
        self.c1 = Conv(store, rng, f"{name}.c1", ch, ch)
        self.c2 = Conv(store, rng, f"{name}.c2", ch, ch, gain=0.2)
        self.slope = slope

    def __call__(self, x: Var) -> Var:
        return ad.add(x, self.c2(ad.leaky_relu(self.c1(x), self.slope)))


class DownBlock:
    """A small residual dense block with an optionally strided entry conv."""

    def __init__(self, store, rng, name, cin, cout, stride, slope):
        self.entry = Conv(store, rng, f"{name}.entry", cin, cout, stride=stride)
        self.dense1 = Conv(store, rng, f"{name}.dense1", cout, cout)
        self.fuse = Conv(store, rng, f"{name}.fuse", 2 * cout, cout, k=1, gain=0.2)
        self.slope = slope

    def __call__(self, x: Var) -> Var:
        e = ad.leaky_relu(self.entry(x), self.slope)
        d = ad.leaky_relu(self.dense1(e), self.slope)
        return ad.add(e, self.fuse(ad.concat([e, d], axis=1)))


class Preprocessor:
    """One conv plus two residual dense blocks; strides realize the
    configured downsampling factor."""

    def __init__(self, store, rng, name, cin, ch, downsample, slope):
        strides = {1.0: (1, 1), 0.5: (2, 1), 0.25: (2, 2)}[float(downsample)]
        self.conv_in = Conv(store, rng, f"{name}.conv_in", cin, ch)
        self.block1 = DownBlock(store, rng, f"{name}.block1", ch, ch, strides[0], slope)
        self.block2 = DownBlock(store, rng, f"{name}.block2", ch, ch, strides[1], slope)
        self.slope = slope

    def __call__(self, x: Var) -> Var:
        f = ad.leaky_relu(self.conv_in(x), self.slope)
        return self.block2(self.block1(f))


class CoeffGen:
    """Window -> mixing weights: two strided convs, global pooling, dense."""

    def __init__(self, store, rng, name, cin, m_out, hidden, slope, activation):
        h1, h2 = hidden
        self.conv1 = Conv(store, rng, f"{name}.conv1", cin, h1, stride=2)
        self.conv2 = Conv(store, rng, f"{name}.conv2", h1, h2, stride=2)
        self.fc = Dense(store, rng, f"{name}.fc", h2, m_out)
        self.slope = slope
        self.activation = activation

    def __call__(self, window_flat: Var) -> Var:
        y = ad.leaky_relu(self.conv1(window_flat), self.slope)
        y = ad.leaky_relu(self.conv2(y), self.slope)
        y = ad.global_avg_pool(y)
        y = self.fc(y)
        if self.activation == "softplus":
            y = ad.softplus(y)
        return y


def _one_hot_basis(window_len: int, k: int = 3) -> np.ndarray:
    """Standard basis over (window_len, k, k): patterns [1 0 ... 0] etc."""
    m = window_len * k * k
    return np.eye(m).reshape(m, window_len, k, k)


@dataclass
class ExtractionOutput:
    """One path's responses for one frame window."""

    h: np.ndarray
    h_rot: np.ndarray
    combined: np.ndarray
    coefficients: np.ndarray
    kernel: np.ndarray
    rotated_kernel: np.ndarray


class ExtractionPath:
    """One dynamic extraction path: weight generator plus fixed basis."""

    def __init__(self, store, rng, name, config, basis_stack, activation):
        self.basis = np.asarray(basis_stack, dtype=np.float64)
        self.basis_rot = rotate90(self.basis)
        cin = config.in_channels * config.window_len
        self.gen = CoeffGen(store, rng, f"{name}.coeff", cin, self.basis.shape[0],
                            config.coeff_hidden, config.lrelu_slope, activation)

    def coefficients(self, window_flat: Var) -> Var:
        return self.gen(window_flat)

    def responses(self, window: np.ndarray, dtype) -> tuple:
        """Fixed-basis responses of a (B, C, Tk, H, W) window, replicate padded."""
        b, c, tk, h, w = window.shape
        m = self.basis.shape[0]
        resp = np.empty((b, m, c, h, w), dtype=dtype)
        resp_rot = np.empty_like(resp)
        for i in range(b):
            for j in range(m):
                resp[i, j] = conv3d_temporal(window[i], self.basis[j], "same-replicate")
                resp_rot[i, j] = conv3d_temporal(window[i], self.basis_rot[j],
                                                 "same-replicate")
        return resp, resp_rot

    def kernels_from(self, alpha: np.ndarray) -> tuple:
        """Mixed kernel and rotated counterpart for weight rows (B, M)."""
        k = np.tensordot(alpha, self.basis, axes=(1, 0))
        k_rot = np.tensordot(alpha, self.basis_rot, axes=(1, 0))
        return k, k_rot

    def extract(self, window: np.ndarray, dtype) -> tuple:
        """Graph outputs (h, h_rot, combined, alpha) for a numpy window."""
        b = window.shape[0]
        flat = window.transpose(0, 2, 1, 3, 4).reshape(
            b, -1, window.shape[3], window.shape[4])
        alpha = self.coefficients(ad.constant(flat.astype(dtype)))
        resp, resp_rot = self.responses(window, dtype)
        h = ad.lincomb(alpha, resp)
        h_rot = ad.lincomb(alpha, resp_rot)
        combined = ad.add(ad.abs_(h), ad.abs_(h_rot))
        return h, h_rot, combined, alpha


class Recurrent:
    """Fuse path features with the warped previous state, then refine."""

    def __init__(self, store, rng, name, n_inputs, ch, n_blocks, slope):
        self.fuse = Conv(store, rng, f"{name}.fuse", n_inputs * ch, ch, k=1)
        self.conv_in = Conv(store, rng, f"{name}.conv_in", ch, ch)
        self.blocks = [ResBlock(store, rng, f"{name}.block{i}", ch, slope)
                       for i in range(n_blocks)]
        self.slope = slope

    def __call__(self, path_feats, warped_state: Var) -> Var:
        y = ad.leaky_relu(self.fuse(ad.concat([*path_feats, warped_state], axis=1)),
                          self.slope)
        y = ad.leaky_relu(self.conv_in(y), self.slope)
        for blk in self.blocks:
            y = blk(y)
        return y


class Upsampler:
    """Pixel-shuffle stages back to full resolution; the final conv emits the
    residual, so zeroing it makes the whole network an identity map."""

    def __init__(self, store, rng, name, ch, uch, out_channels, downsample, slope):
        n_up = {1.0: 0, 0.5: 1, 0.25: 2}[float(downsample)]
        self.n_up = n_up
        self.slope = slope
        if n_up == 0:
            self.conv_a = Conv(store, rng, f"{name}.conv_a", 2 * ch, uch)
            self.conv_b = None
        elif n_up == 1:
            self.conv_a = Conv(store, rng, f"{name}.conv_a", 2 * ch, 4 * uch)
            self.conv_b = None
        else:
            self.conv_a = Conv(store, rng, f"{name}.conv_a", 2 * ch, 4 * ch)
            self.conv_b = Conv(store, rng, f"{name}.conv_b", ch, 4 * uch)
        self.final = Conv(store, rng, f"{name}.final", uch, out_channels, gain=0.1)

    def __call__(self, r_fwd: Var, r_bwd: Var) -> Var:
        y = ad.concat([r_fwd, r_bwd], axis=1)
        y = self.conv_a(y)
        if self.n_up >= 1:
            y = ad.pixel_shuffle_layer(y, 2)
        y = ad.leaky_relu(y, self.slope)
        if self.conv_b is not None:
            y = ad.leaky_relu(ad.pixel_shuffle_layer(self.conv_b(y), 2), self.slope)
        return self.final(y)


class DeblurNet:
    """The assembled bidirectional network."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float64):
        self.config = config
        rng = np.random.default_rng(seed)
        self.store = ParamStore(dtype)
        c = config.in_channels
        ch = config.channels
        n = config.effective_paths

        if config.variant == "adaptive":
            basis = resolve_basis(config.basis)
            if basis.extents[0] != config.window_len:
                raise DimensionError(
                    f"basis temporal extent {basis.extents[0]} != window length "
                    f"{config.window_len}")
            basis_stack = basis.stacked()
            activation = "softplus"
            self.kernel_basis = basis
        elif config.variant in ("direct", "naive"):
            basis_stack = _one_hot_basis(config.window_len)
            activation = "identity" if config.variant == "direct" else "softplus"
            self.kernel_basis = None
        else:
            basis_stack = None
            activation = None
            self.kernel_basis = None

        self.paths = [
            ExtractionPath(self.store, rng, f"path{i + 1}", config, basis_stack, activation)
            for i in range(n)
        ]
        self.pre = [Preprocessor(self.store, rng, "pre0", c, ch,
                                 config.downsample, config.lrelu_slope)]
        self.pre += [Preprocessor(self.store, rng, f"pre{i + 1}", 3 * c, ch,
                                  config.downsample, config.lrelu_slope)
                     for i in range(n)]
        self.recurrent = Recurrent(self.store, rng, "recurrent", n + 2, ch,
                                   config.n_res_blocks, config.lrelu_slope)
        self.upsampler = Upsampler(self.store, rng, "upsample", ch,
                                   config.upsample_channels, c,
                                   config.downsample, config.lrelu_slope)

    # -- helpers ----------------------------------------------------------

    @property
    def dtype(self):
        return self.store.dtype

    def parameters(self):
        return self.store.values()

    def _check_extents(self, h: int, w: int) -> None:
        den = self.config.down_denominator
        if h % den or w % den:
            raise DimensionError(
                f"frame extents {h}x{w} not divisible by the downsampling "
                f"denominator {den}")

    def _window(self, clips: np.ndarray, t: int) -> np.ndarray:
        """(B, C, Tk, H, W) window around frame t, edges replicated."""
        tt = clips.shape[1]
        idx = np.clip(np.arange(t - self.config.span, t + self.config.span + 1), 0, tt - 1)
        return clips[:, idx].transpose(0, 2, 1, 3, 4)

    def _downsample_flow(self, flow: np.ndarray) -> np.ndarray:
        den = self.config.down_denominator
        if den == 1:
            return flow
        return flow[:, :, ::den, ::den] * self.config.downsample

    def _path_features(self, clips: np.ndarray, t: int):
        feats = [self.pre[0](ad.constant(clips[:, t].astype(self.dtype)))]
        if self.paths:
            window = self._window(clips, t)
            for i, path in enumerate(self.paths):
                h, h_rot, combined, _ = path.extract(window, self.dtype)
                feats.append(self.pre[i + 1](ad.concat([h, h_rot, combined], axis=1)))
        return feats

    def _pair_flows(self, clips: np.ndarray, flows, flow_mode: str):
        """Per-step warping flows at feature resolution.

        Returns (to_prev, to_next): to_prev[t] aligns state t-1 with frame t
        (defined for t >= 1), to_next[t] aligns state t+1 with frame t
        (defined for t <= T-2). With ground-truth forward flows f,
        to_prev[t] = -f[t-1] and to_next[t] = f[t].
        """
        b, tt = clips.shape[:2]
        to_prev = [None] * tt
        to_next = [None] * tt
        if flows is not None:
            flows = np.asarray(flows, dtype=np.float64)
            expect = (b, tt - 1, 2) + clips.shape[3:]
            if flows.shape != expect:
                raise DimensionError(f"flows shape {flows.shape}, expected {expect}")
            for t in range(1, tt):
                to_prev[t] = self._downsample_flow(-flows[:, t - 1])
            for t in range(tt - 1):
                to_next[t] = self._downsample_flow(flows[:, t])
            return to_prev, to_next
        if flow_mode not in FLOW_MODES:
            raise ValueError(f"unknown flow mode {flow_mode!r}, expected one of {FLOW_MODES}")
        hq = clips.shape[3] // self.config.down_denominator
        wq = clips.shape[4] // self.config.down_denominator
        if flow_mode == "zero":
            zero = np.zeros((b, 2, hq, wq))
            for t in range(1, tt):
                to_prev[t] = zero
            for t in range(tt - 1):
                to_next[t] = zero
            return to_prev, to_next
        for t in range(1, tt):
            to_prev[t] = self._downsample_flow(np.stack(
                [estimate_flow(clips[i, t], clips[i, t - 1]) for i in range(b)]))
        for t in range(tt - 1):
            to_next[t] = self._downsample_flow(np.stack(
                [estimate_flow(clips[i, t], clips[i, t + 1]) for i in range(b)]))
        return to_prev, to_next

    # -- forward ----------------------------------------------------------

    def forward_batch(self, clips: np.ndarray, flows=None, flow_mode: str = "zero"):
        """Graph forward over a (B, T, C, H, W) batch; returns per-frame output
        Vars. ``flows`` is an optional (B, T-1, 2, H, W) forward-flow array."""
        if clips.ndim != 5:
            raise DimensionError(f"batch must be (B, T, C, H, W), got {clips.shape}")
        if clips.shape[2] != self.config.in_channels:
            raise DimensionError(
                f"clip has {clips.shape[2]} channels, model expects "
                f"{self.config.in_channels}")
        b, tt, _, h, w = clips.shape
        self._check_extents(h, w)
        to_prev, to_next = self._pair_flows(clips, flows, flow_mode)
        pfeats = [self._path_features(clips, t) for t in range(tt)]
        hq, wq = h // self.config.down_denominator, w // self.config.down_denominator
        zero_state = ad.constant(np.zeros((b, self.config.channels, hq, wq),
                                          dtype=self.dtype))
        r_fwd = []
        state = None
        for t in range(tt):
            warped = zero_state if state is None \
                else ad.bilinear_warp_stopgrad(state, to_prev[t])
            state = self.recurrent(pfeats[t], warped)
            r_fwd.append(state)
        r_bwd = [None] * tt
        state = None
        for t in range(tt - 1, -1, -1):
            warped = zero_state if state is None \
                else ad.bilinear_warp_stopgrad(state, to_next[t])
            state = self.recurrent(pfeats[t], warped)
            r_bwd[t] = state
        outputs = []
        for t in range(tt):
            residual = self.upsampler(r_fwd[t], r_bwd[t])
            outputs.append(ad.add(ad.constant(clips[:, t].astype(self.dtype)), residual))
        return outputs

    def forward_video(self, clip: VideoClip, flows=None,
                      flow_mode: str = "block") -> VideoClip:
        """Deblur a clip; per-frame output is input + upsampled residual,
        clamped to the valid value range."""
        batch = clip.data[None]
        batch_flows = None if flows is None else np.asarray(flows)[None]
        outputs = self.forward_batch(batch, batch_flows, flow_mode)
        stacked = np.stack([o.value[0] for o in outputs])
        return VideoClip(np.clip(stacked, 0.0, 1.0), clip.frame_rate)

    # -- public per-module views -------------------------------------------

    def _require_path(self, path_index: int) -> ExtractionPath:
        if not self.paths:
            raise PreconditionError(f"the {self.config.variant!r} variant has no "
                                    "extraction paths")
        return self.paths[path_index]

    def _window_from_clip(self, window: VideoClip) -> np.ndarray:
        if len(window) != self.config.window_len:
            raise DimensionError(
                f"window length {len(window)} != {self.config.window_len}")
        return window.data[None].transpose(0, 2, 1, 3, 4)

    def coefficient_generator(self, window: VideoClip, path_index: int = 0) -> CoefficientVector:
        """Non-negative mixing weights for one frame window. The 'direct'
        variant predicts raw kernel entries of either sign, so it has no
        coefficient vector; use :meth:`dynamic_kernels` for it instead."""
        if self.config.variant == "direct":
            raise PreconditionError(
                "the 'direct' variant predicts kernel entries, not "
                "non-negative coefficients")
        path = self._require_path(path_index)
        win = self._window_from_clip(window)
        flat = win.transpose(0, 2, 1, 3, 4).reshape(1, -1, win.shape[3], win.shape[4])
        alpha = path.coefficients(ad.constant(flat.astype(self.dtype)))
        return CoefficientVector(alpha.value[0].astype(np.float64))

    def hf_extract(self, window: VideoClip, path_index: int = 0) -> ExtractionOutput:
        """Run one extraction path on a window."""
        path = self._require_path(path_index)
        win = self._window_from_clip(window)
        h, h_rot, combined, alpha = path.extract(win, self.dtype)
        a = alpha.value
        kernel, rotated = path.kernels_from(a)
        return ExtractionOutput(
            h=h.value[0].astype(np.float64),
            h_rot=h_rot.value[0].astype(np.float64),
            combined=combined.value[0].astype(np.float64),
            coefficients=a[0].astype(np.float64),
            kernel=kernel[0],
            rotated_kernel=rotated[0],
        )

    def preprocess(self, features: np.ndarray, path_index: int = 0) -> np.ndarray:
        """Run a preprocessor on (C, H, W) features; returns the downsampled map."""
        arr = np.asarray(features, dtype=self.dtype)
        if arr.ndim != 3:
            raise DimensionError(f"features must be (C, H, W), got {arr.shape}")
        self._check_extents(arr.shape[1], arr.shape[2])
        out = self.pre[path_index](ad.constant(arr[None]))
        return out.value[0].astype(np.float64)

    def dynamic_kernels(self, window: VideoClip):
        """Mixed kernels of every path for one window: a list of
        (kernel, rotated_kernel, coefficients) triples."""
        out = []
        for i in range(len(self.paths)):
            ext = self.hf_extract(window, i)
            out.append((ext.kernel, ext.rotated_kernel, ext.coefficients))
        return out


def build_variant(config: ModelConfig, seed: int = 0, dtype=np.float64) -> DeblurNet:
    """Construct a network for the configured variant."""
    return DeblurNet(config, seed=seed, dtype=dtype)


# -- cost model -------------------------------------------------------------

@dataclass
class MacReport:
    total_macs: int
    per_frame_macs: float
    parameters: int
    clip_len: int
    resolution: tuple


def count_macs(config: ModelConfig, resolution=(64, 64), clip_len=None,
               seed: int = 0) -> MacReport:
    """Analytic conv+dense multiply-accumulate count for one forward pass.

    Counts Cin*Cout*Hk*Wk*Hout*Wout per conv layer (and fin*fout per dense
    layer) over the unrolled per-frame graph; elementwise ops, pooling and
    warping are excluded. Parameters are counted exactly, biases included.
    """
    clip_len = config.window_len if clip_len is None else clip_len
    net = DeblurNet(config, seed=seed, dtype=np.float32)
    h, w = resolution
    clips = np.zeros((1, clip_len, config.in_channels, h, w), dtype=np.float32)
    with ad.mac_counter() as tally:
        net.forward_batch(clips, flows=None, flow_mode="zero")
    return MacReport(
        total_macs=tally.macs,
        per_frame_macs=tally.macs / clip_len,
        parameters=net.store.parameter_count(),
        clip_len=clip_len,
        resolution=(h, w),
    )


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(path, net: DeblurNet, state: TrainState = None) -> None:
    """Parameters (and optimizer moments) in a VTEN1 container plus a JSON
    sidecar '<path>.json' describing the architecture."""
    tensors = [(f"param/{name}", var.value) for name, var in net.store.items()]
    if state is not None:
        tensors.append(("trainstate/scalars",
                        np.array([float(state.step), float(state.learning_rate)])))
        for key, val in state.m.items():
            tensors.append((f"adam.m/{key}", val))
        for key, val in state.v.items():
            tensors.append((f"adam.v/{key}", val))
    write_tensors(path, tensors)
    meta = {
        "model": dataclasses.asdict(net.config),
        "dtype": net.store.dtype.name,
        "schedule": dataclasses.asdict(state.schedule) if state is not None else None,
    }
    with open(f"{path}.json", "w") as fh:
        json.dump(meta, fh, indent=2, default=list)


def load_checkpoint(path):
    """Rebuild (net, state) from :func:`save_checkpoint` output."""
    with open(f"{path}.json") as fh:
        meta = json.load(fh)
    model_kwargs = dict(meta["model"])
    model_kwargs["coeff_hidden"] = tuple(model_kwargs.get("coeff_hidden", (8, 16)))
    config = ModelConfig(**model_kwargs)
    net = DeblurNet(config, seed=0, dtype=np.dtype(meta.get("dtype", "float64")))
    tensors = read_tensors(path)
    for name, var in net.store.items():
        key = f"param/{name}"
        if key not in tensors:
            raise FormatError(f"{path}: checkpoint is missing parameter {name!r}")
        stored = tensors[key]
        if stored.shape != var.value.shape:
            raise FormatError(
                f"{path}: parameter {name!r} has shape {stored.shape}, "
                f"expected {var.value.shape}")
        var.value = stored.astype(net.store.dtype)
    state = None
    if meta.get("schedule") is not None:
        state = TrainState(schedule=ScheduleConfig(**meta["schedule"]))
        scalars = tensors.get("trainstate/scalars")
        if scalars is not None:
            state.step = int(scalars[0])
            state.learning_rate = float(scalars[1])
        for name, arr in tensors.items():
            if name.startswith("adam.m/"):
                state.m[name[len("adam.m/"):]] = arr.astype(np.float64)
            elif name.startswith("adam.v/"):
                state.v[name[len("adam.v/"):]] = arr.astype(np.float64)
    return net, state
