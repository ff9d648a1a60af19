import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpoxsldnet import kernels
from mpoxsldnet.kernels import (ConvGeometry, ShapeError, conv2d_backward,
                                conv2d_forward, conv_output_shape,
                                maxpool2d_backward, maxpool2d_forward,
                                pool_output_shape)
from oracles import (central_difference, conv2d_naive, max_relative_error,
                     maxpool2d_naive)

FIG10_INPUT = np.array([[1, 3, 2, 1],
                        [4, 6, 6, 8],
                        [3, 1, 1, 0],
                        [1, 2, 2, 4]], dtype=np.float32).reshape(1, 4, 4, 1)


# ---------------------------------------------------------------------------
# convolution forward

def test_conv_windowed_sums_5x5_ones_kernel():
    x = np.arange(25, dtype=np.float32).reshape(1, 5, 5, 1)
    w = np.ones((3, 3, 1, 1), dtype=np.float32)
    y = conv2d_forward(x, w, np.zeros(1, np.float32))
    assert y.shape == (1, 3, 3, 1)
    expected = np.array([[x[0, i:i + 3, j:j + 3, 0].sum() for j in range(3)]
                         for i in range(3)], dtype=np.float32)
    assert np.array_equal(y[0, :, :, 0], expected)


def test_conv_identity_kernel_same_padding():
    rng = np.random.default_rng(0)
    x = rng.random((2, 6, 7, 3), dtype=np.float32)
    w = np.zeros((3, 3, 3, 3), dtype=np.float32)
    for c in range(3):
        w[1, 1, c, c] = 1.0
    y = conv2d_forward(x, w, np.zeros(3, np.float32), padding=1)
    assert np.array_equal(y, x)


def test_conv_matches_naive_oracle_random_case():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 4, 4, 2)).astype(np.float64)
    w = rng.standard_normal((3, 3, 2, 3)).astype(np.float64)
    b = rng.standard_normal(3).astype(np.float64)
    got = conv2d_forward(x, w, b)
    want = conv2d_naive(x, w, b)
    assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_conv_rejects_channel_mismatch_naming_dimension():
    x = np.zeros((1, 4, 4, 2), np.float32)
    w = np.zeros((3, 3, 5, 3), np.float32)
    with pytest.raises(ShapeError, match="channel"):
        conv2d_forward(x, w, np.zeros(3, np.float32))


def test_conv_rejects_bad_bias():
    x = np.zeros((1, 4, 4, 2), np.float32)
    w = np.zeros((3, 3, 2, 3), np.float32)
    with pytest.raises(ShapeError, match="bias"):
        conv2d_forward(x, w, np.zeros(4, np.float32))


# ---------------------------------------------------------------------------
# output-shape formula

def test_output_shape_examples():
    assert conv_output_shape(ConvGeometry(5, 5, 1, 1))[0] == 3
    assert conv_output_shape(ConvGeometry(224, 224, 3, 16, padding=1))[0] == 224
    assert conv_output_shape(ConvGeometry(224, 224, 3, 16, stride=2))[0] == 111


def test_output_shape_rejects_nonpositive():
    with pytest.raises(ShapeError):
        conv_output_shape(ConvGeometry(2, 2, 1, 1, kernel=(3, 3)))


def test_same_geometry_preserves_dims():
    g = ConvGeometry.same(37, 23, 4, 8)
    assert conv_output_shape(g) == (37, 23)


@settings(max_examples=100)
@given(size=st.integers(3, 64), k=st.integers(1, 5), pad=st.integers(0, 3),
       stride=st.integers(1, 3))
def test_output_shape_counts_window_positions(size, k, pad, stride):
    # independent check: count the window start positions that fit
    padded = size + 2 * pad
    expected = len(range(0, padded - k + 1, stride))
    if expected <= 0:
        return
    g = ConvGeometry(size, size, 1, 1, kernel=(k, k), stride=stride, padding=pad)
    assert conv_output_shape(g) == (expected, expected)


# ---------------------------------------------------------------------------
# convolution backward

def test_conv_backward_zero_upstream():
    rng = np.random.default_rng(2)
    x = rng.random((1, 5, 5, 2)).astype(np.float32)
    w = rng.random((3, 3, 2, 4)).astype(np.float32)
    gx, gw, gb = conv2d_backward(x, w, np.zeros((1, 3, 3, 4), np.float32))
    assert not gx.any() and not gw.any() and not gb.any()


def test_conv_backward_single_window_grad_w_equals_input():
    rng = np.random.default_rng(3)
    x = rng.random((1, 3, 3, 1)).astype(np.float64)
    w = rng.random((3, 3, 1, 1)).astype(np.float64)
    _, gw, gb = conv2d_backward(x, w, np.ones((1, 1, 1, 1), np.float64))
    assert np.array_equal(gw[:, :, 0, 0], x[0, :, :, 0])
    assert gb[0] == 1.0


def test_conv_backward_matches_finite_differences():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 5, 5, 2))
    w = rng.standard_normal((3, 3, 2, 3))
    b = rng.standard_normal(3)
    up = rng.standard_normal((2, 5, 5, 3))  # same padding keeps dims

    gx, gw, gb = conv2d_backward(x, w, up, padding=1)

    fd_x = central_difference(lambda v: float(
        (conv2d_forward(v, w, b, padding=1) * up).sum()), x, h=1e-3)
    fd_w = central_difference(lambda v: float(
        (conv2d_forward(x, v, b, padding=1) * up).sum()), w, h=1e-3)
    fd_b = central_difference(lambda v: float(
        (conv2d_forward(x, w, v, padding=1) * up).sum()), b, h=1e-3)
    assert max_relative_error(gx, fd_x) < 1e-4
    assert max_relative_error(gw, fd_w) < 1e-4
    assert max_relative_error(gb, fd_b) < 1e-4


def test_conv_backward_rejects_mismatched_grad():
    x = np.zeros((1, 5, 5, 2), np.float32)
    w = np.zeros((3, 3, 2, 3), np.float32)
    with pytest.raises(ShapeError):
        conv2d_backward(x, w, np.zeros((1, 4, 4, 3), np.float32))


# ---------------------------------------------------------------------------
# pooling

def test_pool_window_maxima_4x4():
    out, _ = maxpool2d_forward(FIG10_INPUT)
    assert np.array_equal(out[0, :, :, 0],
                          np.array([[6, 8], [3, 4]], dtype=np.float32))


def test_pool_constant_input():
    x = np.full((1, 6, 6, 2), 3.25, dtype=np.float32)
    out, _ = maxpool2d_forward(x)
    assert np.array_equal(out, np.full((1, 3, 3, 2), 3.25, dtype=np.float32))


def test_pool_chain_224_to_3():
    dims = [224]
    for _ in range(6):
        dims.append(pool_output_shape(dims[-1]))
    assert dims == [224, 112, 56, 28, 14, 7, 3]


def test_pool_matches_naive_oracle():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 7, 9, 3)).astype(np.float32)
    out, _ = maxpool2d_forward(x)
    assert np.array_equal(out, maxpool2d_naive(x))


def test_pool_backward_routes_to_window_winners():
    out, ctx = maxpool2d_forward(FIG10_INPUT)
    grad = maxpool2d_backward(ctx, np.ones_like(out))
    expected = np.zeros((4, 4), dtype=np.float32)
    expected[1, 1] = 1  # 6
    expected[1, 3] = 1  # 8
    expected[2, 0] = 1  # 3
    expected[3, 3] = 1  # 4
    assert np.array_equal(grad[0, :, :, 0], expected)


def test_pool_backward_zero_upstream():
    out, ctx = maxpool2d_forward(FIG10_INPUT)
    assert not maxpool2d_backward(ctx, np.zeros_like(out)).any()


def test_pool_tie_goes_to_lowest_flat_index():
    x = np.full((1, 2, 2, 1), 7.0, dtype=np.float32)
    out, ctx = maxpool2d_forward(x)
    grad = maxpool2d_backward(ctx, np.full((1, 1, 1, 1), 2.5, dtype=np.float32))
    assert grad[0, 0, 0, 0] == 2.5
    assert grad.sum() == 2.5


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(2, 9), st.integers(2, 9),
       st.integers(1, 3), st.integers(1, 3))
def test_pool_mass_conservation(seed, h, w, n, c):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, h, w, c)).astype(np.float32)
    out, ctx = maxpool2d_forward(x)
    up = rng.standard_normal(out.shape).astype(np.float32)
    grad = maxpool2d_backward(ctx, up)
    assert grad.sum(dtype=np.float64) == pytest.approx(up.sum(dtype=np.float64), abs=0)


# ---------------------------------------------------------------------------
# oracle equivalence and linearity properties

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_conv_oracle_equivalence_64bit_exact(seed):
    rng = np.random.default_rng(seed)
    n, h, w = rng.integers(1, 3), rng.integers(3, 8), rng.integers(3, 8)
    cin, cout = rng.integers(1, 4), rng.integers(1, 4)
    k = int(rng.choice([1, 3]))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, 2))
    if (h - k + 2 * pad) // stride + 1 <= 0 or (w - k + 2 * pad) // stride + 1 <= 0:
        return
    x = rng.standard_normal((n, h, w, cin))
    wgt = rng.standard_normal((k, k, cin, cout))
    b = rng.standard_normal(cout)
    got = conv2d_forward(x, wgt, b, stride=stride, padding=pad)
    want = conv2d_naive(x, wgt, b, stride=stride, padding=pad)
    assert np.allclose(got, want, rtol=0, atol=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.floats(-4.0, 4.0))
def test_conv_linearity_in_input(seed, a):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, 5, 5, 2)).astype(np.float32)
    w = rng.standard_normal((3, 3, 2, 2)).astype(np.float32)
    a = np.float32(a)
    lhs = conv2d_forward(a * x, w, stride=1, padding=1)
    rhs = a * conv2d_forward(x, w, stride=1, padding=1)
    # near-zero elements come from float32 cancellation, so measure error
    # relative to the tensor scale
    scale = max(float(np.abs(rhs).max()), 1e-6)
    assert max_relative_error(lhs, rhs, floor=scale) < 1e-5


# ---------------------------------------------------------------------------
# matmul and elementwise helpers

def test_matmul_identity_neutral():
    a = np.array([[1, 2], [3, 4]], dtype=np.float32)
    assert np.array_equal(kernels.matmul(a, np.eye(2, dtype=np.float32)), a)


def test_matmul_hand_case():
    a = np.array([[1, 2], [3, 4]], dtype=np.float32)
    b = np.array([[5], [6]], dtype=np.float32)
    assert np.array_equal(kernels.matmul(a, b),
                          np.array([[17], [39]], dtype=np.float32))


def test_matmul_default_head_shape():
    a = np.zeros((1, 4608), np.float32)
    b = np.zeros((4608, 256), np.float32)
    assert kernels.matmul(a, b).shape == (1, 256)


def test_matmul_rejects_dim_mismatch():
    with pytest.raises(ShapeError):
        kernels.matmul(np.zeros((2, 3), np.float32), np.zeros((4, 2), np.float32))


def test_elementwise_helpers():
    a = np.array([1.0, 2.0], np.float32)
    b = np.array([3.0, 5.0], np.float32)
    assert np.array_equal(kernels.add(a, b), np.array([4.0, 7.0], np.float32))
    assert np.array_equal(kernels.multiply(a, b), np.array([3.0, 10.0], np.float32))
    assert np.array_equal(kernels.scale(a, 2.0), np.array([2.0, 4.0], np.float32))
    assert kernels.reduce_sum(b) == 8.0
    assert kernels.reduce_mean(b) == 4.0
    m = np.arange(6, dtype=np.float32).reshape(2, 3)
    assert kernels.transpose(m).shape == (3, 2)
    with pytest.raises(ShapeError):
        kernels.add(a, np.zeros(3, np.float32))


def test_all_finite_predicate():
    assert kernels.all_finite(np.ones(4))
    assert not kernels.all_finite(np.array([1.0, np.nan]))
    assert not kernels.all_finite(np.array([np.inf]))
