"""Training loop: augmentation consistency, determinism, logging,
divergence handling."""

import numpy as np
import pytest

from hipass.blursim import BlurConfig, build_dataset
from hipass.errors import DivergenceError, PreconditionError
from hipass.metrics import psnr
from hipass.model import ModelConfig
from hipass.tensorops import bilinear_warp
from hipass.training import (AUGMENTS, TrainingSchedule, augment_clip, train)

SMALL = dict(channels=4, n_res_blocks=1, upsample_channels=2,
             coeff_hidden=(4, 6))


def _samples(n=6, res=(16, 16), frames=4, seed=0):
    return build_dataset(n, res, frames, BlurConfig(b=3, stride=1,
                                                    crf="identity"),
                         seed=seed, max_speed=1.0, backdrop=True)


def _sched(**kw):
    base = dict(iterations=3, batch_size=2, seq_len=3, val_interval=2,
                val_count=2, seed=0)
    base.update(kw)
    return TrainingSchedule(**base)


# -- augmentation ----------------------------------------------------------------

def test_augment_involutions():
    rng = np.random.default_rng(0)
    frames = rng.uniform(0.0, 1.0, size=(3, 1, 6, 6))
    flows = rng.uniform(-1.0, 1.0, size=(2, 2, 6, 6))
    for kind in ("hflip", "vflip"):
        f2, fl2 = augment_clip(*augment_clip(frames, flows, kind), kind)
        np.testing.assert_array_equal(f2, frames)
        np.testing.assert_array_equal(fl2, flows)
    f4, fl4 = frames, flows
    for _ in range(4):
        f4, fl4 = augment_clip(f4, fl4, "rot90")
    np.testing.assert_array_equal(f4, frames)
    np.testing.assert_array_equal(fl4, flows)
    same_f, same_fl = augment_clip(frames, flows, "none")
    np.testing.assert_array_equal(same_f, frames)
    np.testing.assert_array_equal(same_fl, flows)


def test_augment_component_mapping():
    # constant flow (u, v): mirrors negate the matching component, a 90-degree
    # counterclockwise rotation maps (u, v) to (v, -u)
    frames = np.zeros((2, 1, 4, 4))
    frames[:, 0, 1, 2] = 1.0
    flows = np.empty((1, 2, 4, 4))
    flows[:, 0] = 0.7   # u, horizontal
    flows[:, 1] = -0.3  # v, vertical
    fh, flh = augment_clip(frames, flows, "hflip")
    assert fh[0, 0, 1, 1] == 1.0
    assert np.all(flh[:, 0] == -0.7) and np.all(flh[:, 1] == -0.3)
    fv, flv = augment_clip(frames, flows, "vflip")
    assert fv[0, 0, 2, 2] == 1.0
    assert np.all(flv[:, 0] == 0.7) and np.all(flv[:, 1] == 0.3)
    fr, flr = augment_clip(frames, flows, "rot90")
    assert fr[0, 0, 1, 1] == 1.0
    assert np.all(flr[:, 0] == -0.3) and np.all(flr[:, 1] == -0.7)


def test_augment_warp_equivariance():
    # warping the augmented next frame with the augmented flow must equal
    # augmenting the warped frame: the flow transform matches the sampler
    rng = np.random.default_rng(1)
    h = w = 12
    prev = rng.uniform(0.0, 1.0, size=(h, w))
    nxt = rng.uniform(0.0, 1.0, size=(h, w))
    flow = 1.2 * np.stack([
        np.sin(2 * np.pi * np.arange(w) / w)[None, :].repeat(h, 0),
        np.cos(2 * np.pi * np.arange(h) / h)[:, None].repeat(w, 1),
    ])
    frames = np.stack([prev, nxt])[:, None]
    flows = flow[None]
    warped = bilinear_warp(nxt, flow)
    for kind in AUGMENTS:
        frames_a, flows_a = augment_clip(frames, flows, kind)
        route_a = bilinear_warp(frames_a[1, 0], flows_a[0])
        route_b = augment_clip(warped[None, None], None, kind)[0][0, 0]
        np.testing.assert_allclose(route_a[3:-3, 3:-3], route_b[3:-3, 3:-3],
                                   atol=1e-12)


def test_augment_rejects_bad_input():
    frames = np.zeros((2, 1, 4, 6))
    with pytest.raises(PreconditionError):
        augment_clip(frames, None, "rot90")
    with pytest.raises(ValueError):
        augment_clip(frames, None, "transpose")


# -- the loop -----------------------------------------------------------------------

def test_training_is_deterministic():
    samples = _samples()
    runs = []
    for _ in range(2):
        res = train(samples, ModelConfig(**SMALL), _sched())
        runs.append(res)
    a, b = runs
    assert a.log == b.log
    for name, var in a.net.store.items():
        np.testing.assert_array_equal(var.value, b.net.store[name].value)
    assert a.val_psnr_final == b.val_psnr_final


def test_log_structure_and_schedule():
    samples = _samples()
    sched = _sched(iterations=4, val_interval=2)
    res = train(samples, ModelConfig(**SMALL), sched)
    assert len(res.log) == 4
    lrs = []
    for it, entry in enumerate(res.log):
        assert entry["iter"] == it
        assert np.isfinite(entry["loss"]) and entry["loss"] > 0.0
        lrs.append(entry["lr"])
        has_val = (it + 1) % sched.val_interval == 0 or it == 3
        assert ("val_psnr" in entry) == has_val
        if has_val:
            assert np.isfinite(entry["val_psnr"])
            assert entry["kernels_high_pass"] is True
    assert lrs[0] == sched.initial_lr
    assert all(x > y for x, y in zip(lrs, lrs[1:]))  # single cosine arc
    assert np.isfinite(res.baseline_psnr)
    assert res.val_psnr_final == res.log[-1]["val_psnr"]
    assert res.train_seconds > 0.0


def test_identity_variant_log_has_no_kernel_flag():
    samples = _samples()
    res = train(samples, ModelConfig(variant="identity", **SMALL), _sched())
    assert "val_psnr" in res.log[-1]
    assert all("kernels_high_pass" not in e for e in res.log)


def test_baseline_psnr_matches_holdout():
    samples = _samples()
    sched = _sched()
    res = train(samples, ModelConfig(**SMALL), sched)
    val = samples[len(samples) - sched.val_count:]
    expected = float(np.mean([
        psnr(np.clip(s.blurry.data.astype(np.float32), 0, 1),
             s.sharp.data.astype(np.float32)) for s in val]))
    assert res.baseline_psnr == expected


def test_divergence_aborts():
    samples = _samples(n=3)
    sched = _sched(iterations=10, val_interval=1000, val_count=1,
                   initial_lr=1e8, min_lr=1e8)
    with np.errstate(invalid="ignore", over="ignore"):
        with pytest.raises(DivergenceError):
            train(samples, ModelConfig(**SMALL), sched)


def test_input_validation():
    with pytest.raises(PreconditionError):
        train([], ModelConfig(**SMALL), _sched())
    samples = _samples(frames=3)
    with pytest.raises(PreconditionError):
        train(samples, ModelConfig(**SMALL), _sched(seq_len=5))
