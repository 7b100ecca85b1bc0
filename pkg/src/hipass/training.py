"""Training loop: Adam with cosine-restart schedule, Charbonnier frame loss,
geometric augmentation with matching flow-vector transforms."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ScheduleConfig, TrainState
from .errors import PreconditionError
from .kernels import verify_high_pass
from .metrics import psnr
from .model import DeblurNet, ModelConfig, build_variant
from .tensorops import VideoClip

AUGMENTS = ("none", "hflip", "vflip", "rot90")


@dataclass
class TrainingSchedule:
    """Optimization knobs; the defaults are the desk-scale run."""

    iterations: int = 2000
    batch_size: int = 2
    seq_len: int = 5
    initial_lr: float = 2e-4
    min_lr: float = 1e-7
    restart_period: int = None   # None -> one cosine arc over all iterations
    charbonnier_eps: float = 1e-3
    val_interval: int = 250
    val_count: int = 16
    seed: int = 0
    augment: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise PreconditionError("iterations must be >= 1")
        if self.batch_size < 1:
            raise PreconditionError("batch_size must be >= 1")
        if self.seq_len < 1:
            raise PreconditionError("seq_len must be >= 1")
        if self.restart_period is None:
            self.restart_period = self.iterations

    def schedule_config(self) -> ScheduleConfig:
        return ScheduleConfig(initial_lr=self.initial_lr, min_lr=self.min_lr,
                              restart_period=self.restart_period)


@dataclass
class TrainResult:
    net: DeblurNet
    state: TrainState
    log: list = field(default_factory=list)
    val_psnr_final: float = float("nan")
    baseline_psnr: float = float("nan")
    train_seconds: float = 0.0


def augment_clip(frames: np.ndarray, flows, kind: str):
    """Apply a geometric transform to a (T, C, H, W) stack and its
    (T-1, 2, H, W) forward flows (pass None to transform frames only),
    keeping the two consistent.

    Mirroring flips the matching flow component's sign; a 90-degree
    counterclockwise rotation maps displacement (u, v) to (v, -u).
    """
    if kind == "none":
        return frames, flows
    if kind == "hflip":
        out = np.ascontiguousarray(frames[..., ::-1])
        if flows is None:
            return out, None
        flo = flows[..., ::-1].copy()
        flo[:, 0] = -flo[:, 0]
        return out, flo
    if kind == "vflip":
        out = np.ascontiguousarray(frames[..., ::-1, :])
        if flows is None:
            return out, None
        flo = flows[..., ::-1, :].copy()
        flo[:, 1] = -flo[:, 1]
        return out, flo
    if kind == "rot90":
        if frames.shape[-2] != frames.shape[-1]:
            raise PreconditionError("rot90 augmentation needs square frames")
        out = np.ascontiguousarray(np.rot90(frames, k=1, axes=(-2, -1)))
        if flows is None:
            return out, None
        rot = np.rot90(flows, k=1, axes=(-2, -1))
        flo = np.stack([rot[:, 1], -rot[:, 0]], axis=1)
        return out, np.ascontiguousarray(flo)
    raise ValueError(f"unknown augmentation {kind!r}, expected one of {AUGMENTS}")


def _prepare(samples, seq_len: int, dtype):
    """Cast dataset samples to plain training arrays once, up front."""
    packed = []
    for s in samples:
        blur = s.blurry.data.astype(dtype)
        sharp = s.sharp.data.astype(dtype)
        if len(blur) < seq_len:
            raise PreconditionError(
                f"sample has {len(blur)} frames, schedule wants {seq_len}")
        packed.append((blur, sharp, s.flow_gt.astype(np.float64)))
    return packed


def _assemble_batch(packed, rng, schedule: TrainingSchedule):
    blurs, sharps, flows = [], [], []
    choices = rng.integers(0, len(packed), size=schedule.batch_size)
    for idx in choices:
        blur, sharp, flow = packed[idx]
        extra = len(blur) - schedule.seq_len
        t0 = int(rng.integers(0, extra + 1)) if extra else 0
        b = blur[t0:t0 + schedule.seq_len]
        s = sharp[t0:t0 + schedule.seq_len]
        f = flow[t0:t0 + schedule.seq_len - 1]
        if schedule.augment:
            kinds = AUGMENTS if b.shape[-2] == b.shape[-1] else AUGMENTS[:3]
            kind = kinds[rng.integers(0, len(kinds))]
            b, f = augment_clip(b, f, kind)
            s, _ = augment_clip(s, None, kind)
        blurs.append(b)
        sharps.append(s)
        flows.append(f)
    return np.stack(blurs), np.stack(sharps), np.stack(flows)


def _validate(net: DeblurNet, val_packed) -> float:
    scores = []
    for blur, sharp, flow in val_packed:
        outs = net.forward_batch(blur[None], flow[None], flow_mode="zero")
        pred = np.clip(np.stack([o.value[0] for o in outs]), 0.0, 1.0)
        scores.append(psnr(pred, sharp))
    return float(np.mean(scores))


def _kernels_high_pass(net: DeblurNet, blur: np.ndarray) -> bool:
    span = net.config.span
    mid = len(blur) // 2
    window = blur[mid - span:mid + span + 1].astype(np.float64)
    win = np.clip(window, 0.0, 1.0)
    triples = net.dynamic_kernels(VideoClip(win, 24.0))
    return all(bool(verify_high_pass(k)) and bool(verify_high_pass(r))
               for k, r, _ in triples)


def train(samples, config: ModelConfig, schedule: TrainingSchedule) -> TrainResult:
    """Train a fresh network of the given variant on dataset samples.

    The last ``val_count`` samples are held out for validation; the log gets
    one entry per iteration ({iter, loss, lr}, extended with val_psnr and,
    for mixing-based variants, a kernels_high_pass flag at checkpoints).
    Aborts with a divergence error on a non-finite loss.
    """
    if not samples:
        raise PreconditionError("no training samples")
    n_val = min(schedule.val_count, max(len(samples) - 1, 0))
    dtype = np.float32
    packed = _prepare(samples, schedule.seq_len, dtype)
    train_packed = packed[:len(packed) - n_val] if n_val else packed
    val_packed = packed[len(packed) - n_val:] if n_val else []

    net = build_variant(config, seed=schedule.seed, dtype=dtype)
    params = net.parameters()
    state = TrainState(schedule=schedule.schedule_config())
    rng = np.random.default_rng(schedule.seed)

    baseline = float(np.mean([psnr(np.clip(b, 0, 1), s)
                              for b, s, _ in val_packed])) if val_packed else float("nan")

    log = []
    t_start = time.perf_counter()
    for it in range(schedule.iterations):
        blur, sharp, flow = _assemble_batch(train_packed, rng, schedule)
        ad.zero_grads(params)
        outs = net.forward_batch(blur, flow, flow_mode="zero")
        losses = [ad.charbonnier_loss(outs[t], sharp[:, t], schedule.charbonnier_eps)
                  for t in range(len(outs))]
        loss = ad.fold_mean(losses)
        ad.check_finite_loss(float(loss.value), it)
        loss.backward()
        lr = ad.adam_step(state, params)
        state.learning_rate = lr
        entry = {"iter": it, "loss": float(loss.value), "lr": lr}
        last = it == schedule.iterations - 1
        if val_packed and (last or (it + 1) % schedule.val_interval == 0):
            entry["val_psnr"] = _validate(net, val_packed)
            if net.paths and net.kernel_basis is not None:
                entry["kernels_high_pass"] = _kernels_high_pass(
                    net, train_packed[0][0])
        log.append(entry)

    seconds = time.perf_counter() - t_start
    final = next((e["val_psnr"] for e in reversed(log) if "val_psnr" in e),
                 float("nan"))
    return TrainResult(net=net, state=state, log=log, val_psnr_final=final,
                       baseline_psnr=baseline, train_seconds=seconds)
