import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian, naive_conv
from lipgram.conv import (
    ConvKernel,
    conv_adjoint,
    conv_apply,
    conv_power_iteration,
    exact_conv_spectrum,
    extract_blocks,
    gram_conv,
    gram_conv_subsampled,
    materialize_conv_operator,
)
from lipgram.dense import gram_rescaled, svd_exact
from lipgram.errors import NumericalError, ShapeError
from lipgram.linalg import dft2, singular_values


def kernel(seed, c_out, c_in, k, n, padding="circular"):
    filt = np.random.default_rng(seed).standard_normal((c_out, c_in, k, k))
    return ConvKernel(filt, n, padding)


def delta(c, k=1):
    filt = np.zeros((c, c, k, k))
    for i in range(c):
        filt[i, i, 0, 0] = 1.0
    return filt


def sigma1(mat):
    return float(singular_values(mat)[0])


# ConvKernel validation


def test_kernel_validation():
    with pytest.raises(ShapeError):
        ConvKernel(np.ones((1, 1, 5, 5)), 4)
    with pytest.raises(ValueError):
        ConvKernel(np.ones((1, 1, 3, 3)), 4, padding="reflect")
    with pytest.raises(ValueError):
        ConvKernel(np.ones((1, 1, 3, 3)), 4, stride=0)
    with pytest.raises(ShapeError):
        ConvKernel(np.ones((1, 1, 3, 2)), 4)
    with pytest.raises(TypeError):
        ConvKernel(np.ones((1, 1, 1, 1), dtype=complex), 4)
    k = ConvKernel(np.ones((2, 3, 3, 3)), 5)
    assert (k.c_out, k.c_in, k.k, k.n) == (2, 3, 3, 5)


def test_spectral_ops_reject_stride_and_zero_padding():
    k = ConvKernel(np.ones((1, 1, 3, 3)), 6, stride=2)
    for fn in (extract_blocks, exact_conv_spectrum, lambda x: gram_conv(x, 3)):
        with pytest.raises(ValueError):
            fn(k)
    with pytest.raises(ValueError):
        gram_conv(ConvKernel(np.ones((1, 1, 3, 3)), 6, "zero"), 3)
    with pytest.raises(ValueError):
        conv_power_iteration(k, 3)


# block extraction


def test_blocks_scalar_kernel():
    spec = extract_blocks(ConvKernel(np.full((1, 1, 1, 1), 2.5), 4))
    assert spec.blocks.shape == (16, 1, 1)
    assert np.allclose(spec.blocks, 2.5, atol=1e-15)


def test_blocks_delta_identity():
    spec = extract_blocks(ConvKernel(delta(2), 4))
    assert np.allclose(spec.blocks, np.eye(2), atol=1e-15)


def test_blocks_match_direct_dft():
    kern = kernel(0, 2, 3, 3, 6)
    spec = extract_blocks(kern)
    a = np.arange(3)
    for u in range(6):
        for v in range(6):
            phase = np.exp(-2j * np.pi * (u * a[:, None] + v * a[None, :]) / 6)
            ref = np.einsum("oipq,pq->oi", kern.filter, phase)
            assert np.max(np.abs(spec.block(u, v) - ref)) <= 1e-12
    assert spec.frequency(5 * 6 + 2) == (5, 2)


def test_blocks_match_dft2_of_padded(rng):
    kern = ConvKernel(rng.standard_normal((3, 2, 3, 3)), 7)
    padded = np.zeros((3, 2, 7, 7))
    padded[..., :3, :3] = kern.filter
    ref = dft2(padded).transpose(2, 3, 0, 1).reshape(49, 3, 2)
    assert np.allclose(extract_blocks(kern).blocks, ref, atol=1e-12)


# spatial operator


@pytest.mark.parametrize("padding", ["circular", "zero"])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_conv_apply_matches_naive_loops(padding, k, rng):
    kern = ConvKernel(rng.standard_normal((2, 3, k, k)), 5, padding)
    x = rng.standard_normal((3, 5, 5))
    assert np.allclose(conv_apply(kern, x), naive_conv(kern.filter, x, padding), atol=1e-12)


@pytest.mark.parametrize("padding", ["circular", "zero"])
def test_adjoint_is_conjugate_transpose(padding, rng):
    for k in (1, 2, 3):
        kern = ConvKernel(rng.standard_normal((2, 3, k, k)), 4, padding)
        w = materialize_conv_operator(kern)
        cols = np.eye(w.shape[0]).reshape(-1, 2, 4, 4)
        wt = conv_adjoint(kern, cols).reshape(w.shape[0], -1)
        assert np.max(np.abs(wt - w)) <= 1e-12


def test_conv_apply_batched(rng):
    kern = kernel(1, 2, 2, 3, 5, "zero")
    x = rng.standard_normal((4, 2, 5, 5))
    out = conv_apply(kern, x)
    for i in range(4):
        assert np.allclose(out[i], conv_apply(kern, x[i]))


# materialized operator


def test_materialize_scalar():
    w = materialize_conv_operator(ConvKernel(np.full((1, 1, 1, 1), 3.0), 2))
    assert np.array_equal(w, 3 * np.eye(4))


def test_materialize_first_column_is_kernel(rng):
    filt = rng.standard_normal((1, 1, 3, 3))
    w = materialize_conv_operator(ConvKernel(filt, 3))
    assert w.shape == (9, 9)
    assert np.allclose(w[:, 0], filt.ravel())
    # block-circulant: every column is a circular shift of the first
    for a in range(3):
        for b in range(3):
            shifted = np.roll(filt[0, 0], (a, b), axis=(0, 1))
            assert np.allclose(w[:, a * 3 + b], shifted.ravel())


def test_materialize_guard():
    with pytest.raises(ShapeError):
        materialize_conv_operator(ConvKernel(np.ones((5, 1, 1, 1)), 29))


def test_materialized_matches_exact(rng):
    kern = kernel(2, 2, 2, 3, 4)
    assert sigma1(materialize_conv_operator(kern)) == pytest.approx(exact_conv_spectrum(kern).value, rel=1e-10)


# gram_conv / exact


def test_gram_conv_k1_equals_dense_gram():
    m = np.random.default_rng(3).standard_normal((3, 2))
    kern = ConvKernel(m[:, :, None, None], 5)
    for n_iter in (1, 3, 7):
        assert gram_conv(kern, n_iter).value == pytest.approx(gram_rescaled(m, n_iter).value, rel=1e-14)


def test_gram_conv_all_ones():
    rep = gram_conv(ConvKernel(np.ones((1, 1, 3, 3)), 8), 6)
    assert rep.value == pytest.approx(9.0, abs=1e-10)
    assert rep.argmax_block == (0, 0)


def test_gram_conv_matches_materialized():
    kern = kernel(4, 2, 3, 3, 6)
    w = materialize_conv_operator(kern)
    assert w.shape == (72, 108)
    assert gram_conv(kern, 12).value == pytest.approx(sigma1(w), rel=1e-8)


def test_exact_delta_identity():
    for n in (1, 4, 7):
        assert exact_conv_spectrum(ConvKernel(delta(3), n)).value == 1.0


def test_exact_k1_is_channel_sigma(rng):
    m = rng.standard_normal((2, 4))
    assert exact_conv_spectrum(ConvKernel(m[:, :, None, None], 3)).value == pytest.approx(
        svd_exact(m).value, rel=1e-14
    )


def test_exact_matches_materialized_3x2():
    kern = kernel(5, 3, 2, 3, 5)
    assert exact_conv_spectrum(kern).value == pytest.approx(sigma1(materialize_conv_operator(kern)), rel=1e-10)


def test_gram_conv_trace_upper_bounds_and_converges():
    rng = np.random.default_rng(6)
    for _ in range(6):
        c_out, c_in, k = rng.integers(1, 5, size=3)
        n = int(rng.integers(k, 17))
        kern = ConvKernel(rng.standard_normal((c_out, c_in, k, k)), n)
        exact = exact_conv_spectrum(kern).value
        rep = gram_conv(kern, 12)
        assert all(v >= exact * (1 - 1e-9) for v in rep.trace)
        assert rep.value == pytest.approx(exact, rel=1e-8)


def test_gram_conv_argmax_is_consistent():
    kern = kernel(7, 3, 3, 3, 6)
    g, e = gram_conv(kern, 12), exact_conv_spectrum(kern)
    blocks = extract_blocks(kern)
    assert svd_exact(blocks.block(*e.argmax_block)).value == pytest.approx(e.value, rel=1e-14)
    assert svd_exact(blocks.block(*g.argmax_block)).value == pytest.approx(e.value, rel=1e-8)


def test_report_dict():
    d = gram_conv(kernel(0, 1, 1, 2, 3), 2).to_dict()
    assert d["method"] == "gram_conv" and len(d["trace"]) == 2 and len(d["argmax_block"]) == 2


@given(st.integers(0, 2**32 - 1), st.integers(0, 4), st.integers(0, 4))
@settings(max_examples=30, deadline=None)
def test_shift_invariance(seed, a, b):
    kern = kernel(seed, 2, 2, 3, 6)
    padded = np.zeros((2, 2, 6, 6))
    padded[..., :3, :3] = kern.filter
    shifted = np.roll(padded, (a, b), axis=(-2, -1))
    big = ConvKernel(padded, 6)
    moved = ConvKernel(shifted, 6)
    for fn in (exact_conv_spectrum, lambda x: gram_conv(x, 8)):
        assert fn(moved).value == pytest.approx(fn(big).value, rel=1e-10)
    assert exact_conv_spectrum(big).value == pytest.approx(exact_conv_spectrum(kern).value, rel=1e-12)


def test_transpose_symmetry():
    rng = np.random.default_rng(8)
    for _ in range(5):
        kern = ConvKernel(rng.standard_normal((3, 2, 3, 3)), 6)
        flipped = kern.filter.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
        other = ConvKernel(flipped.copy(), 6)
        assert exact_conv_spectrum(other).value == pytest.approx(exact_conv_spectrum(kern).value, rel=1e-10)


# power iteration on the spatial operator


@pytest.mark.parametrize("padding", ["circular", "zero"])
def test_power_k1_either_padding(padding, rng):
    m = rng.standard_normal((3, 2))
    kern = ConvKernel(m[:, :, None, None], 4, padding)
    assert conv_power_iteration(kern, 500).value == pytest.approx(svd_exact(m).value, rel=1e-8)


def test_power_delta_zero_padding():
    assert conv_power_iteration(ConvKernel(delta(2), 5, "zero"), 3).value == pytest.approx(1.0, abs=1e-14)


def test_power_zero_padding_matches_toeplitz():
    kern = kernel(0, 2, 2, 3, 6, "zero")
    w = materialize_conv_operator(kern)
    assert w.shape == (72, 72)
    assert conv_power_iteration(kern, 2000).value == pytest.approx(sigma1(w), rel=1e-6)


def test_power_near_degenerate_top_pair_stays_below():
    # sigma2/sigma1 ~ 0.9993 here: 2000 iterations are not enough to converge,
    # but the estimate never overshoots
    kern = kernel(9, 2, 2, 3, 6, "zero")
    sv = singular_values(materialize_conv_operator(kern))
    assert sv[1] / sv[0] > 0.999
    value = conv_power_iteration(kern, 2000).value
    assert value <= sv[0] * (1 + 1e-12)
    assert value >= sv[1]


def test_power_circular_matches_exact():
    kern = kernel(10, 2, 3, 3, 5)
    assert conv_power_iteration(kern, 2000).value == pytest.approx(exact_conv_spectrum(kern).value, rel=1e-6)


def test_power_zero_kernel():
    rep = conv_power_iteration(ConvKernel(np.zeros((2, 2, 3, 3)), 4, "zero"), 5)
    assert rep.value == 0.0


def test_power_null_space_error():
    # constant input direction killed by a zero-sum kernel; force it by patching rng output
    filt = np.zeros((1, 1, 2, 2))
    filt[0, 0, 0, 0], filt[0, 0, 0, 1] = 1.0, -1.0
    kern = ConvKernel(filt, 4)

    class Fixed:
        def standard_normal(self, shape):
            return np.ones(shape)

    import lipgram.conv as conv

    orig = conv.np.random.default_rng
    try:
        conv.np.random.default_rng = lambda seed: Fixed()
        with pytest.raises(NumericalError):
            conv_power_iteration(kern, 3)
    finally:
        conv.np.random.default_rng = orig


# n0 sub-sampling


def test_subsampled_n0_equals_n():
    kern = kernel(11, 2, 2, 3, 8)
    assert gram_conv_subsampled(kern, 8, 6).value == gram_conv(kern, 6).value


def test_subsampled_k1_factor_one():
    kern = kernel(12, 2, 3, 1, 16)
    assert gram_conv_subsampled(kern, 4, 8).value == pytest.approx(gram_conv(kern, 8).value, rel=1e-14)


def test_subsampled_bounds_full_size():
    kern = kernel(13, 2, 2, 3, 32)
    full = gram_conv(kern, 8).value
    sub = gram_conv_subsampled(kern, 8, 8).value
    assert sub >= full
    assert sub / full <= 1 + 2 * 1 / 8 + 1e-12


def test_subsampled_errors():
    kern = kernel(0, 1, 1, 3, 8)
    with pytest.raises(ShapeError):
        gram_conv_subsampled(kern, 2, 4)
    with pytest.raises(ShapeError):
        gram_conv_subsampled(kern, 9, 4)
