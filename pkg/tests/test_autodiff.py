"""Reverse-mode engine: finite-difference checks per primitive, optimizer
behavior, schedule shape, MAC tallies."""

import numpy as np
import pytest

from hipass import DivergenceError
from hipass import autodiff as ad


def _param(rng, shape, name="p", lo=0.2, hi=1.2):
    """A parameter kept away from relu/abs kinks: magnitudes in [lo, hi]."""
    vals = rng.uniform(lo, hi, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return ad.parameter(vals, name)


def _check(build_loss, params, tol=1e-4):
    report = ad.grad_check(build_loss, params, h=1e-5, tolerance=tol)
    assert report.passed, [(e.name, e.max_rel_err) for e in report.entries]
    return report


def test_arithmetic_primitives():
    rng = np.random.default_rng(0)
    a = _param(rng, (3, 4), "a")
    b = _param(rng, (3, 4), "b")
    _check(lambda: ad.sum_(ad.add(a, b)), [a, b])
    _check(lambda: ad.sum_(ad.sub(a, b)), [a, b])
    _check(lambda: ad.sum_(ad.mul(a, b)), [a, b])
    _check(lambda: ad.sum_(ad.scale(a, -2.5)), [a])
    _check(lambda: ad.sum_(ad.neg(a)), [a])


def test_add_broadcasting_gradients():
    rng = np.random.default_rng(1)
    x = _param(rng, (2, 3, 4), "x")
    bias = _param(rng, (3, 1), "bias")
    _check(lambda: ad.sum_(ad.add(x, bias)), [x, bias])


def test_nonlinearities():
    rng = np.random.default_rng(2)
    x = _param(rng, (4, 4), "x")
    _check(lambda: ad.sum_(ad.relu(x)), [x])
    _check(lambda: ad.sum_(ad.leaky_relu(x, 0.1)), [x])
    _check(lambda: ad.sum_(ad.softplus(x)), [x])
    _check(lambda: ad.sum_(ad.abs_(x)), [x])


def test_softplus_stability_and_center():
    big = ad.constant(np.array([800.0, -800.0, 0.0]))
    out = ad.softplus(big).value
    assert np.isfinite(out).all()
    assert out[0] == pytest.approx(800.0)
    assert out[1] == pytest.approx(0.0, abs=1e-12)
    x = ad.parameter(np.zeros(1), "x")
    y = ad.softplus(x)
    y.backward(np.ones(1))
    assert x.grad[0] == pytest.approx(0.5)  # sigmoid(0)


def test_reductions_and_concat():
    rng = np.random.default_rng(3)
    a = _param(rng, (2, 2, 3, 3), "a")
    b = _param(rng, (2, 1, 3, 3), "b")
    _check(lambda: ad.mean_(ad.concat([a, b], axis=1)), [a, b])
    _check(lambda: ad.sum_(ad.fold_mean([ad.mul(a, a), ad.add(a, a), a])), [a])


def test_conv2d_layer_gradients():
    rng = np.random.default_rng(4)
    x = _param(rng, (1, 2, 5, 5), "x")
    w = _param(rng, (3, 2, 3, 3), "w")
    b = _param(rng, (3,), "b")
    _check(lambda: ad.sum_(ad.conv2d_layer(x, w, b)), [x, w, b])
    _check(lambda: ad.sum_(ad.conv2d_layer(x, w, b, stride=2)), [x, w, b])
    _check(lambda: ad.sum_(ad.conv2d_layer(x, w, None, pad=0)), [x, w])


def test_conv2d_layer_forward_matches_correlation():
    # the layer is cross-correlation: an impulse kernel at (0, 0) samples the
    # top-left of each same-padded window
    x = ad.constant(np.arange(16.0).reshape(1, 1, 4, 4))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 0, 0] = 1.0
    out = ad.conv2d_layer(x, ad.constant(w), None).value
    want = np.zeros((4, 4))
    want[1:, 1:] = x.value[0, 0, :3, :3]
    np.testing.assert_array_equal(out[0, 0], want)


def test_dense_and_pool_gradients():
    rng = np.random.default_rng(5)
    x = _param(rng, (2, 6), "x")
    w = _param(rng, (6, 3), "w")
    b = _param(rng, (3,), "b")
    _check(lambda: ad.sum_(ad.dense(x, w, b)), [x, w, b])
    feat = _param(rng, (2, 3, 4, 4), "feat")
    _check(lambda: ad.sum_(ad.global_avg_pool(feat)), [feat])


def test_pixel_shuffle_layer_gradients():
    rng = np.random.default_rng(6)
    x = _param(rng, (1, 8, 3, 2), "x")
    _check(lambda: ad.sum_(ad.pixel_shuffle_layer(x, 2)), [x])


def test_warp_gradients_and_stopgrad_contract():
    rng = np.random.default_rng(7)
    x = _param(rng, (1, 2, 5, 5), "x")
    flow = rng.normal(0, 1.0, size=(1, 2, 5, 5))
    _check(lambda: ad.sum_(ad.bilinear_warp_stopgrad(x, flow)), [x])
    with pytest.raises(Exception):
        ad.bilinear_warp_stopgrad(x, ad.constant(flow))


def test_lincomb_gradients_and_constant_responses():
    rng = np.random.default_rng(8)
    alpha = _param(rng, (2, 3), "alpha")
    responses = rng.normal(size=(2, 3, 1, 4, 4))
    _check(lambda: ad.sum_(ad.lincomb(alpha, responses)), [alpha])
    out = ad.lincomb(alpha, responses)
    np.testing.assert_allclose(
        out.value, np.einsum("bm,bmchw->bchw", alpha.value, responses), atol=1e-12)


def test_charbonnier_gradients_and_floor():
    rng = np.random.default_rng(9)
    pred = _param(rng, (2, 3, 3), "pred")
    target = rng.normal(size=(2, 3, 3))
    _check(lambda: ad.charbonnier_loss(pred, target, eps=1e-3), [pred])
    same = ad.charbonnier_loss(ad.constant(target), target, eps=1e-3)
    assert float(same.value) == pytest.approx(1e-3, abs=1e-15)


def test_backward_accumulates_through_reuse():
    x = ad.parameter(np.array([3.0]), "x")
    y = ad.add(ad.mul(x, x), x)  # d/dx = 2x + 1
    y.backward(np.ones(1))
    assert x.grad[0] == pytest.approx(7.0)


def test_constants_get_no_grad():
    c = ad.constant(np.ones((2, 2)))
    p = ad.parameter(np.ones((2, 2)), "p")
    out = ad.sum_(ad.mul(c, p))
    out.backward()
    assert c.grad is None
    assert p.grad is not None


def test_grad_check_reports_frozen_params():
    p = ad.parameter(np.ones(2), "p")
    c = ad.constant(np.ones(2), "c")
    report = ad.grad_check(lambda: ad.sum_(ad.mul(p, p)), [p, c])
    assert report.passed
    frozen = [e for e in report.entries if e.frozen]
    assert len(frozen) == 1


def test_mac_counter_pinned_conv():
    # 3x3 conv, 1 -> 1 channels, 8x8 same-padded input: 1*1*3*3*8*8 = 576
    x = ad.constant(np.zeros((1, 1, 8, 8)))
    w = ad.constant(np.zeros((1, 1, 3, 3)))
    with ad.mac_counter() as tally:
        ad.conv2d_layer(x, w, None)
    assert tally.macs == 576


def test_mac_counter_pinned_dense():
    # dense 4 -> 2 on one row: 8 MACs
    x = ad.constant(np.zeros((1, 4)))
    w = ad.constant(np.zeros((4, 2)))
    b = ad.constant(np.zeros(2))
    with ad.mac_counter() as tally:
        ad.dense(x, w, b)
    assert tally.macs == 8


def test_mac_counter_pinned_lincomb_and_nesting():
    alpha = ad.constant(np.zeros((1, 2)))
    responses = np.zeros((1, 2, 1, 4, 4))
    with ad.mac_counter() as outer:
        ad.lincomb(alpha, responses)
        with ad.mac_counter() as inner:
            ad.dense(ad.constant(np.zeros((1, 4))), ad.constant(np.zeros((4, 2))))
        assert inner.macs == 8
    assert outer.macs == responses.size


def test_mac_counter_scales_with_stride_and_batch():
    w = ad.constant(np.zeros((2, 3, 3, 3)))
    with ad.mac_counter() as t1:
        ad.conv2d_layer(ad.constant(np.zeros((1, 3, 8, 8))), w, None)
    with ad.mac_counter() as t2:
        ad.conv2d_layer(ad.constant(np.zeros((2, 3, 8, 8))), w, None)
    with ad.mac_counter() as t3:
        ad.conv2d_layer(ad.constant(np.zeros((1, 3, 8, 8))), w, None, stride=2)
    assert t2.macs == 2 * t1.macs
    assert t3.macs == t1.macs // 4


def test_cosine_schedule_shape():
    cfg = ad.ScheduleConfig(initial_lr=1e-3, min_lr=1e-5, restart_period=100)
    assert ad.cosine_restart_lr(0, cfg) == pytest.approx(1e-3)
    assert ad.cosine_restart_lr(50, cfg) == pytest.approx((1e-3 + 1e-5) / 2)
    assert ad.cosine_restart_lr(100, cfg) == pytest.approx(1e-3)  # restart
    arc = [ad.cosine_restart_lr(s, cfg) for s in range(100)]
    assert all(a > b for a, b in zip(arc, arc[1:]))
    assert min(arc) >= 1e-5


def test_adam_first_step_is_signed_lr():
    cfg = ad.ScheduleConfig(initial_lr=1e-2, min_lr=1e-2, restart_period=10)
    state = ad.TrainState(schedule=cfg)
    p = ad.parameter(np.array([1.0, -2.0]), "p")
    p.grad = np.array([0.3, -0.7])
    lr = ad.adam_step(state, [p])
    assert lr == pytest.approx(1e-2)
    # bias-corrected mhat/vhat give update ~ -lr * sign(grad) on step 1
    np.testing.assert_allclose(p.value, [1.0 - 1e-2, -2.0 + 1e-2], atol=1e-6)
    assert state.step == 1


def test_adam_minimizes_quadratic():
    target = np.array([0.3, -1.2, 2.0])
    p = ad.parameter(np.zeros(3), "p")
    cfg = ad.ScheduleConfig(initial_lr=5e-2, min_lr=1e-3, restart_period=400)
    state = ad.TrainState(schedule=cfg)
    for _ in range(400):
        ad.zero_grads([p])
        diff = ad.sub(p, ad.constant(target))
        loss = ad.sum_(ad.mul(diff, diff))
        loss.backward()
        ad.adam_step(state, [p])
    np.testing.assert_allclose(p.value, target, atol=1e-3)


def test_adam_none_grad_keeps_fresh_param():
    state = ad.TrainState(schedule=ad.ScheduleConfig())
    p = ad.parameter(np.array([1.5]), "p")
    ad.adam_step(state, [p])  # grad is None -> zero update on fresh moments
    assert p.value[0] == pytest.approx(1.5)


def test_optimization_is_deterministic():
    def run():
        rng = np.random.default_rng(42)
        p = ad.parameter(rng.normal(size=4), "p")
        state = ad.TrainState(schedule=ad.ScheduleConfig(restart_period=50))
        for _ in range(50):
            ad.zero_grads([p])
            loss = ad.sum_(ad.mul(p, p))
            loss.backward()
            ad.adam_step(state, [p])
        return p.value
    np.testing.assert_array_equal(run(), run())


def test_check_finite_loss_raises():
    ad.check_finite_loss(0.5, 3)
    with pytest.raises(DivergenceError):
        ad.check_finite_loss(float("nan"), 4)
    with pytest.raises(DivergenceError):
        ad.check_finite_loss(float("inf"), 5)
