import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from photonic_accel.devices import NoiseContext
from photonic_accel.engine import Executor, layer_norm
from photonic_accel.kernels import (
    QuantSpec, bpd_dot, coherent_sum, default_engine, dequantize, dequantize_product, exact_softmax,
    integer_matmul, lut_exp, lut_softmax, matmul_photonic, matmul_tile_counts, noncoherent_multiply,
    quantize, quantized_matmul, soa_activation,
)
from photonic_accel.trace import ScheduleTrace

cfg = default_engine(4, 4)


def test_noncoherent_multiply_events():
    t = ScheduleTrace()
    out = noncoherent_multiply(np.array([1, 2, 3]), np.array([4, 5, 6]), cfg, t)
    assert out.tolist() == [4, 10, 18]
    assert (t.count("dac_write"), t.count("mr_tune_eo"), t.count("vcsel_emit")) == (6, 6, 3)
    with pytest.raises(ValueError):
        noncoherent_multiply(np.ones(3), np.ones(2), cfg)
    with pytest.raises(ValueError):
        noncoherent_multiply(np.ones(5), np.ones(5), cfg)


def test_coherent_sum_basic_and_empty():
    t = ScheduleTrace()
    assert coherent_sum(np.array([1, 2, 3]), cfg, t) == 6
    assert coherent_sum(np.array([]), cfg, t) == 0
    assert t.annotation_count("empty_coherent_sum") == 1
    cols = coherent_sum(np.arange(6).reshape(3, 2), cfg)
    assert np.array_equal(cols, [6, 9])


def test_bpd_dot_signed():
    assert bpd_dot(np.array([1.0, 2.0]), np.array([3.0, -4.0]), cfg) == -5.0
    assert bpd_dot(np.array([0.0, 0.0]), np.array([3.0, -4.0]), cfg) == 0.0


@given(a=arrays(np.int64, 4, elements=st.integers(-127, 127)), w=arrays(np.int64, 4, elements=st.integers(-127, 127)))
def test_bpd_dot_matches_integer_dot(a, w):
    assert bpd_dot(a, w, cfg) == int(a @ w)


def test_soa_activation():
    t = ScheduleTrace()
    assert soa_activation(-2.0, "relu", t) == 0.0
    assert soa_activation(0.0, "sigmoid") == 0.5
    assert soa_activation(0.0, "tanh") == 0.0
    assert t.count("soa_pass") == 1
    with pytest.raises(ValueError):
        soa_activation(1.0, "gelu")


def test_quantize_examples():
    s = QuantSpec(8, 0.5)
    assert quantize(np.array([0.0]), s).tolist() == [0]
    assert quantize(np.array([127 * 0.5, 1000.0, -1000.0]), s).tolist() == [127, 127, -127]
    with pytest.raises(ValueError):
        quantize(np.array([np.nan]), s)
    with pytest.raises(ValueError):
        QuantSpec(8, 0.0)


def test_quantize_roundtrip_exhaustive_grid():
    s = QuantSpec(8, 0.037)
    x = np.linspace(-127 * s.scale, 127 * s.scale, 200001)
    err = np.abs(dequantize(quantize(x, s), s) - x)
    assert err.max() <= s.scale / 2 + 1e-15


@given(bits=st.integers(2, 16), x=arrays(float, 16, elements=st.floats(-1e3, 1e3)))
def test_quantize_codes_in_symmetric_range(bits, x):
    s = QuantSpec.calibrate(x, bits)
    q = quantize(x, s)
    assert np.all(np.abs(q) <= 2 ** (bits - 1) - 1)


def test_integer_matmul_oracle(rng):
    a = rng.integers(-127, 128, (8, 8))
    b = rng.integers(-127, 128, (8, 8))
    ref = [[sum(int(a[i, k]) * int(b[k, j]) for k in range(8)) for j in range(8)] for i in range(8)]
    assert integer_matmul(a, b).tolist() == ref


@pytest.mark.parametrize("shape", [(1, 1, 1), (3, 4, 4), (5, 9, 7), (16, 64, 16), (2, 13, 1)])
def test_photonic_matmul_equals_quantized(shape, rng):
    m, k, n = shape
    A = rng.normal(size=(m, k))
    B = rng.normal(size=(k, n))
    t = ScheduleTrace()
    out = matmul_photonic(A, B, cfg, t)
    assert np.array_equal(out, quantized_matmul(A, B))
    counts = matmul_tile_counts(m, k, n, cfg)
    for kind in ("dac_write", "mr_tune_eo", "vcsel_emit", "bpd_read", "adc_read"):
        assert t.count(kind) == counts[kind]


def test_photonic_matmul_close_to_float(rng):
    A = rng.normal(size=(6, 10))
    B = rng.normal(size=(10, 5))
    out = matmul_photonic(A, B, cfg)
    assert np.max(np.abs(out - A @ B)) / np.max(np.abs(A @ B)) < 0.05


def test_photonic_matmul_dimension_mismatch():
    with pytest.raises(ValueError):
        matmul_photonic(np.ones((2, 3)), np.ones((4, 2)), cfg)


def test_noise_seeded_reproducible(rng):
    noisy = default_engine(4, 4, noise=NoiseContext(heterodyne_enabled=True, rng_seed=5))
    A = rng.normal(size=(5, 7))
    B = rng.normal(size=(7, 3))
    a = matmul_photonic(A, B, noisy)
    b = matmul_photonic(A, B, noisy)
    assert np.array_equal(a, b)
    other = default_engine(4, 4, noise=NoiseContext(heterodyne_enabled=True, rng_seed=6))
    assert np.max(np.abs(a - quantized_matmul(A, B))) / np.max(np.abs(a)) < 0.1
    assert not np.array_equal(a, matmul_photonic(A, B, other))


def test_lut_exp_accuracy():
    x = np.linspace(-16, 0, 100001)
    assert np.max(np.abs(lut_exp(x) - np.exp(x))) < 1e-5
    assert lut_exp(np.array([0.0]))[0] == 1.0
    assert lut_exp(np.array([-np.inf]))[0] == pytest.approx(np.exp(-16), rel=1e-3)


def test_lut_softmax_examples():
    assert np.allclose(lut_softmax(np.zeros(4)), 0.25)
    out = lut_softmax(np.array([0.0, -np.inf, 1.0]))
    assert out[1] < 1e-6
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        lut_softmax(np.array([np.nan, 1.0]))


@settings(max_examples=200)
@given(v=arrays(float, (3, 8), elements=st.floats(-10, 10)))
def test_lut_softmax_close_to_exact(v):
    out = lut_softmax(v)
    assert np.max(np.abs(out - exact_softmax(v))) <= 1e-3
    assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-6)


@given(v=arrays(float, 8, elements=st.floats(-10, 10)), c=st.floats(-5, 5))
def test_lut_softmax_shift_invariant(v, c):
    assert np.allclose(lut_softmax(v), lut_softmax(v + c), atol=1e-4)


def test_layer_norm_textbook(rng):
    x = rng.normal(size=(4, 6))
    g = rng.normal(size=6)
    b = rng.normal(size=6)
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    ref = (x - mu) / np.sqrt(var + 1e-5) * g + b
    assert np.allclose(layer_norm(x, g, b), ref, atol=1e-12)


def test_executor_modes_agree_on_matmul(rng):
    A = rng.normal(size=(3, 5))
    B = rng.normal(size=(5, 2))
    f = Executor("float_ref").matmul(A, B)
    q = Executor("quant_ref", cfg).matmul(A, B)
    p = Executor("photonic", cfg, ScheduleTrace()).matmul(A, B)
    assert np.allclose(f, A @ B)
    assert np.array_equal(p, q)
    with pytest.raises(ValueError):
        Executor("analog")


def test_dequantize_product_scales():
    acc = np.array([[10, -4]])
    out = dequantize_product(acc, QuantSpec(8, 0.5), QuantSpec(8, 0.25))
    assert out.tolist() == [[1.25, -0.5]]
