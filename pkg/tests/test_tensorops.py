"""Array primitives against the loop oracles in helpers.py."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hipass import (DimensionError, Frame, PreconditionError, VideoClip,
                    bilinear_warp, conv2d, conv3d_temporal, dft2d, idft2d,
                    pixel_shuffle, pixel_unshuffle, rotate90)
from helpers import bilinear_warp_loops, conv2d_loops, conv3d_loops, dft2d_loops

PADDINGS = ("same-zero", "same-replicate", "same-wrap", "valid")


def test_conv2d_matches_loop_oracle_across_paddings():
    rng = np.random.default_rng(11)
    for trial in range(12):
        h, w = rng.integers(5, 11, size=2)
        k = rng.choice([1, 3, 5])
        img = rng.normal(size=(h, w))
        ker = rng.normal(size=(k, k))
        for pad in PADDINGS:
            got = conv2d(img, ker, pad)
            want = conv2d_loops(img, ker, pad)
            np.testing.assert_allclose(got, want, atol=1e-12, err_msg=f"{pad} k={k}")


def test_conv2d_channelwise_and_rectangular_kernel():
    rng = np.random.default_rng(3)
    img = rng.normal(size=(3, 7, 8))
    ker = rng.normal(size=(3, 5))
    got = conv2d(img, ker, "same-replicate")
    for c in range(3):
        np.testing.assert_allclose(got[c], conv2d_loops(img[c], ker, "same-replicate"),
                                   atol=1e-12)


def test_conv2d_identity_kernel():
    rng = np.random.default_rng(0)
    img = rng.normal(size=(6, 6))
    ident = np.zeros((3, 3))
    ident[1, 1] = 1.0
    np.testing.assert_array_equal(conv2d(img, ident, "same-zero"), img)


def test_conv2d_rejects_even_kernels():
    with pytest.raises(DimensionError):
        conv2d(np.zeros((5, 5)), np.zeros((2, 3)))


def test_conv2d_rejects_unknown_padding():
    with pytest.raises(ValueError):
        conv2d(np.zeros((5, 5)), np.zeros((3, 3)), "reflect")


def test_conv3d_temporal_matches_loop_oracle():
    rng = np.random.default_rng(21)
    for trial in range(8):
        win = rng.normal(size=(2, 3, 6, 7))
        ker = rng.normal(size=(3, 3, 3))
        for pad in ("same-zero", "same-replicate"):
            got = conv3d_temporal(win, ker, pad)
            np.testing.assert_allclose(got, conv3d_loops(win, ker, pad), atol=1e-12)


def test_conv3d_temporal_tap_order_is_frame_order():
    # kernel [[0], [-1], [1]] on (x0, x1, x2) must produce x2 - x1
    rng = np.random.default_rng(5)
    win = rng.normal(size=(3, 4, 4))
    ker = np.array([0.0, -1.0, 1.0]).reshape(3, 1, 1)
    np.testing.assert_allclose(conv3d_temporal(win, ker), win[2] - win[1], atol=1e-12)


def test_conv3d_temporal_tap_count_mismatch():
    with pytest.raises(DimensionError):
        conv3d_temporal(np.zeros((2, 4, 4)), np.zeros((3, 3, 3)))


def test_dft2d_matches_loop_oracle():
    rng = np.random.default_rng(9)
    img = rng.normal(size=(5, 6))
    np.testing.assert_allclose(dft2d(img), dft2d_loops(img), atol=1e-9)


def test_dft_constant_concentrates_at_origin():
    spec = dft2d(np.full((4, 5), 0.3))
    assert abs(spec[0, 0] - 0.3 * 20) < 1e-12
    spec[0, 0] = 0
    assert np.abs(spec).max() < 1e-12


def test_idft_inverts_dft():
    rng = np.random.default_rng(2)
    img = rng.normal(size=(6, 4))
    back = idft2d(dft2d(img))
    np.testing.assert_allclose(back.real, img, atol=1e-12)
    assert np.abs(back.imag).max() < 1e-12


def test_dft_convolution_theorem_with_wrap_padding():
    # circular convolution in space == pointwise product of spectra
    rng = np.random.default_rng(14)
    img = rng.normal(size=(8, 8))
    ker = rng.normal(size=(3, 3))
    spatial = conv2d(img, ker, "same-wrap")
    embedded = np.zeros((8, 8))
    # place the flipped kernel so its center lands at the origin
    for i in range(3):
        for j in range(3):
            embedded[(i - 1) % 8, (j - 1) % 8] = ker[i, j]
    spectral = idft2d(dft2d(img) * dft2d(embedded)).real
    np.testing.assert_allclose(spatial, spectral, atol=1e-9)


def test_rotate90_quarter_turn_example():
    np.testing.assert_array_equal(rotate90(np.array([[1.0, 2.0], [3.0, 4.0]])),
                                  np.array([[2.0, 4.0], [1.0, 3.0]]))


def test_rotate90_four_times_is_identity():
    rng = np.random.default_rng(1)
    k = rng.normal(size=(3, 5, 5))
    out = k
    for _ in range(4):
        out = rotate90(out)
    np.testing.assert_array_equal(out, k)


def test_bilinear_warp_zero_flow_is_identity():
    rng = np.random.default_rng(8)
    img = rng.normal(size=(2, 6, 7))
    np.testing.assert_allclose(bilinear_warp(img, np.zeros((2, 6, 7))), img, atol=1e-12)


def test_bilinear_warp_integer_shift_matches_indexing():
    rng = np.random.default_rng(4)
    img = rng.normal(size=(1, 8, 8))
    flow = np.zeros((2, 8, 8))
    flow[0] = 2.0  # sample from x + 2
    out = bilinear_warp(img, flow)
    np.testing.assert_allclose(out[0, :, :6], img[0, :, 2:], atol=1e-12)


def test_bilinear_warp_matches_loop_oracle():
    rng = np.random.default_rng(33)
    img = rng.normal(size=(2, 7, 6))
    flow = rng.normal(0, 2.0, size=(2, 7, 6))
    np.testing.assert_allclose(bilinear_warp(img, flow),
                               bilinear_warp_loops(img, flow), atol=1e-12)


def test_pixel_shuffle_block_ordering():
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1)
    np.testing.assert_array_equal(pixel_shuffle(x, 2)[0],
                                  np.array([[1.0, 2.0], [3.0, 4.0]]))


def test_pixel_shuffle_roundtrip():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(8, 3, 5))
    np.testing.assert_array_equal(pixel_unshuffle(pixel_shuffle(x, 2), 2), x)


def test_pixel_shuffle_rejects_indivisible_channels():
    with pytest.raises(DimensionError):
        pixel_shuffle(np.zeros((3, 4, 4)), 2)


def test_frame_validation():
    Frame(np.zeros((1, 4, 4)))
    Frame(np.zeros((4, 4)))  # promoted to one channel
    with pytest.raises(DimensionError):
        Frame(np.zeros((2, 4, 4)))
    with pytest.raises(PreconditionError):
        Frame(np.full((1, 4, 4), 1.5))
    with pytest.raises(PreconditionError):
        Frame(np.full((1, 4, 4), np.nan))


def test_clip_validation_and_accessors():
    clip = VideoClip(np.zeros((3, 1, 4, 4)), 30.0)
    assert len(clip) == 3
    assert clip.frame(1).values.shape == (1, 4, 4)
    with pytest.raises(DimensionError):
        VideoClip(np.zeros((0, 1, 4, 4)))
    with pytest.raises(PreconditionError):
        VideoClip(np.zeros((2, 1, 4, 4)), frame_rate=0.0)


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 2 ** 31 - 1))
def test_conv2d_is_linear(seed):
    rng = np.random.default_rng(seed)
    img1 = rng.normal(size=(6, 6))
    img2 = rng.normal(size=(6, 6))
    ker = rng.normal(size=(3, 3))
    a, b = rng.normal(size=2)
    lhs = conv2d(a * img1 + b * img2, ker)
    rhs = a * conv2d(img1, ker) + b * conv2d(img2, ker)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3))
def test_pixel_shuffle_inverse_property(seed, scale):
    rng = np.random.default_rng(seed)
    c = int(rng.integers(1, 4)) * scale * scale
    x = rng.normal(size=(c, int(rng.integers(1, 5)), int(rng.integers(1, 5))))
    np.testing.assert_array_equal(pixel_unshuffle(pixel_shuffle(x, scale), scale), x)
