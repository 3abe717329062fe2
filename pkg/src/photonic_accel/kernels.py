"""Photonic compute primitives and their quantized-digital counterparts.

Every kernel takes an optional :class:`ScheduleTrace` and appends the device
events it would cause on hardware. Values crossing the DAC/ADC boundary use
symmetric per-tensor quantization; with noise disabled, products and sums
are carried out on integer codes so the photonic path is bit-identical to
the integer reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .devices import MRDevice, NoiseContext, WavelengthGrid, crosstalk_profile, design_bank
from .trace import ScheduleTrace

ACTIVATIONS = ("relu", "sigmoid", "tanh")


@dataclass(frozen=True)
class QuantSpec:
    bits: int = 8
    scale: float = 1.0

    def __post_init__(self):
        if self.bits < 2:
            raise ValueError("bits must be at least 2")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")

    @property
    def qmax(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @classmethod
    def calibrate(cls, x, bits: int = 8) -> "QuantSpec":
        """Scale chosen so the largest magnitude maps to the top code."""
        x = np.asarray(x, dtype=float)
        peak = float(np.max(np.abs(x))) if x.size else 0.0
        if not math.isfinite(peak):
            raise ValueError("cannot calibrate on non-finite values")
        qmax = 2 ** (bits - 1) - 1
        return cls(bits, peak / qmax if peak > 0 else 1.0)


def quantize(x, spec: QuantSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("quantize: non-finite input")
    codes = np.rint(x / spec.scale)
    return np.clip(codes, -spec.qmax, spec.qmax).astype(np.int64)


def dequantize(codes, spec: QuantSpec) -> np.ndarray:
    return np.asarray(codes, dtype=np.int64).astype(float) * spec.scale


def dequantize_product(acc, sa: QuantSpec, sb: QuantSpec) -> np.ndarray:
    """Integer (or ADC-rounded) accumulator of code products back to values."""
    return np.asarray(acc).astype(float) * (sa.scale * sb.scale)


@dataclass(frozen=True)
class PhotonicEngineConfig:
    bank_rows_k: int
    bank_cols_n: int
    grid: WavelengthGrid
    noise: NoiseContext = field(default_factory=NoiseContext)
    quant: QuantSpec = field(default_factory=QuantSpec)
    modulation_rate_ghz: float = 50.0
    device: MRDevice = field(default_factory=lambda: MRDevice(5.0, 48, 2.368, 8000.0))

    def __post_init__(self):
        if self.bank_rows_k != self.grid.channel_count:
            raise ValueError("bank_rows_k must equal grid.channel_count (one wavelength per row)")
        if self.bank_cols_n < 1:
            raise ValueError("bank_cols_n must be positive")
        if not self.modulation_rate_ghz > 0:
            raise ValueError("modulation_rate_ghz must be positive")

    @property
    def bits(self) -> int:
        return self.quant.bits

    @property
    def step_ns(self) -> float:
        return 1.0 / self.modulation_rate_ghz

    @cached_property
    def channel_crosstalk(self) -> np.ndarray:
        return crosstalk_profile(self.grid, design_bank(self.grid, self.device))


def default_engine(channels: int = 8, cols: int = 8, **kw) -> PhotonicEngineConfig:
    grid = WavelengthGrid(1550.0, 1.6, channels, max(18.0, 1.6 * channels + 1.0))
    return PhotonicEngineConfig(channels, cols, grid, **kw)


def _rng(cfg: PhotonicEngineConfig, rng):
    return rng if rng is not None else cfg.noise.rng()


def _heterodyne(cfg: PhotonicEngineConfig, rng, shape) -> np.ndarray:
    """Per-channel multiplicative perturbation factors; channel = last axis."""
    xt = cfg.channel_crosstalk
    n = shape[-1]
    chan = xt[np.arange(n) % len(xt)]
    return 1.0 + rng.uniform(-1.0, 1.0, size=shape) * chan


def noncoherent_multiply(a, w, cfg: PhotonicEngineConfig, trace: Optional[ScheduleTrace] = None, rng=None) -> np.ndarray:
    """Elementwise products on distinct wavelengths (one MR pair per channel)."""
    a = np.asarray(a)
    w = np.asarray(w)
    if a.shape != w.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {w.shape}")
    if len(a) > cfg.bank_rows_k:
        raise ValueError(f"vector of length {len(a)} exceeds bank rows {cfg.bank_rows_k}")
    out = a * w
    if cfg.noise.heterodyne_enabled:
        out = out * _heterodyne(cfg, _rng(cfg, rng), out.shape)
    if trace is not None:
        n = len(a)
        trace.emit("dac_write", 2 * n, 2 * n * cfg.bits)
        trace.emit("mr_tune_eo", 2 * n)
        trace.emit("vcsel_emit", n)
        trace.latency(cfg.step_ns)
    return out


def coherent_sum(values, cfg: PhotonicEngineConfig, trace: Optional[ScheduleTrace] = None, rng=None):
    """Same-wavelength interference sum.

    A 2-D input sums along axis 0, one independent summation per column
    (one feature lane per column). Integer inputs stay exact when homodyne
    noise is off.
    """
    v = np.asarray(values)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape[0] == 0:
        if trace is not None:
            trace.annotate("empty_coherent_sum")
        return 0 if v.ndim <= 1 else np.zeros(v.shape[1:], dtype=v.dtype)
    total = v.sum(axis=0)
    if cfg.noise.homodyne_enabled and cfg.noise.homodyne_amplitude > 0:
        sign = _rng(cfg, rng).choice((-1.0, 1.0), size=np.shape(total))
        total = total * (1.0 + sign * cfg.noise.homodyne_amplitude)
    if trace is not None:
        lanes = 1 if v.ndim == 1 else int(np.prod(v.shape[1:]))
        trace.emit("vcsel_emit", v.size)
        trace.emit("bpd_read", lanes)
    if np.ndim(total) == 0:
        return total.item()
    return total


def bpd_dot(a, w_signed, cfg: PhotonicEngineConfig, trace: Optional[ScheduleTrace] = None, rng=None):
    """Signed dot product: positive-arm sum minus negative-arm sum."""
    a = np.asarray(a)
    w = np.asarray(w_signed)
    if a.shape != w.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {w.shape}")
    wp = np.maximum(w, 0)
    wn = np.maximum(-w, 0)
    pos = a * wp
    neg = a * wn
    if cfg.noise.heterodyne_enabled:
        f = _heterodyne(cfg, _rng(cfg, rng), a.shape)
        pos = pos * f
        neg = neg * f
    if trace is not None:
        trace.emit("bpd_read", 1)
    return (pos.sum() - neg.sum()).item()


def soa_activation(x, kind: str, trace: Optional[ScheduleTrace] = None):
    if kind not in ACTIVATIONS:
        raise ValueError(f"unsupported activation {kind!r}")
    arr = np.asarray(x, dtype=float)
    if kind == "relu":
        out = np.maximum(arr, 0.0)
    elif kind == "sigmoid":
        out = 1.0 / (1.0 + np.exp(-arr))
    else:
        out = np.tanh(arr)
    if trace is not None:
        trace.emit("soa_pass", arr.size)
    return out.item() if out.ndim == 0 else out


# exp(-t) for t in [0, 16] as the product of a coarse and a fine table lookup
LUT_SIZE = 1024
LUT_RANGE = 16.0
_COARSE_STEP = LUT_RANGE / LUT_SIZE
_FINE_STEP = _COARSE_STEP / (LUT_SIZE - 1)
EXP_COARSE = np.exp(-_COARSE_STEP * np.arange(LUT_SIZE))
EXP_FINE = np.exp(-_FINE_STEP * np.arange(LUT_SIZE))


def lut_exp(x) -> np.ndarray:
    """exp(x) for x <= 0 via two table lookups and one multiply; clamps at -16."""
    t = -np.clip(np.asarray(x, dtype=float), -LUT_RANGE, 0.0)
    hi = np.minimum(np.floor(t / _COARSE_STEP).astype(np.int64), LUT_SIZE - 1)
    rem = t - hi * _COARSE_STEP
    lo = np.minimum(np.rint(rem / _FINE_STEP).astype(np.int64), LUT_SIZE - 1)
    return EXP_COARSE[hi] * EXP_FINE[lo]


def lut_softmax(v, trace: Optional[ScheduleTrace] = None, bits: int = 8) -> np.ndarray:
    """Row-wise softmax using exp lookup tables (last axis).

    ``-inf`` entries (attention masks) fall into the table's clamp.
    """
    x = np.asarray(v, dtype=float)
    if np.any(np.isnan(x)) or np.any(x == np.inf):
        raise ValueError("lut_softmax: entries must be finite or -inf")
    m = np.max(x, axis=-1, keepdims=True)
    e = lut_exp(x - m)
    out = e / e.sum(axis=-1, keepdims=True)
    if trace is not None:
        n = x.shape[-1]
        rows = x.size // n if n else 0
        trace.emit("adc_read", x.size, x.size * bits)
        # per element: subtract, two lookups, multiply, divide; per row: n-1 adds
        trace.emit("digital_op", 5 * x.size + rows * max(n - 1, 0))
    return out


def exact_softmax(v) -> np.ndarray:
    x = np.asarray(v, dtype=float)
    e = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def integer_matmul(qa, qb) -> np.ndarray:
    return np.asarray(qa, dtype=np.int64) @ np.asarray(qb, dtype=np.int64)


def quantized_matmul(A, B, bits: int = 8) -> np.ndarray:
    """Digital reference: per-tensor int quantization, integer product, dequantize."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {B.shape}")
    sa = QuantSpec.calibrate(A, bits)
    sb = QuantSpec.calibrate(B, bits)
    return dequantize_product(integer_matmul(quantize(A, sa), quantize(B, sb)), sa, sb)


def matmul_tile_counts(m: int, kd: int, nc: int, cfg: PhotonicEngineConfig) -> dict:
    """Closed-form event counts emitted by :func:`matmul_photonic`."""
    kt = -(-kd // cfg.bank_rows_k)
    nt = -(-nc // cfg.bank_cols_n)
    return {
        "tiles": kt * nt,
        "passes": m * kt * nt,
        "dac_write": kd * nc + m * kd * nt,
        "mr_tune_eo": kd * nc + m * kd * nt,
        "vcsel_emit": m * kd * nt,
        "bpd_read": m * nc * kt,
        "adc_read": m * nc,
    }


def matmul_photonic(
    A,
    B,
    cfg: PhotonicEngineConfig,
    trace: Optional[ScheduleTrace] = None,
    rng=None,
    banks: Sequence[str] = ("bank0",),
) -> np.ndarray:
    """Matrix product tiled over K x N MR bank passes.

    Each tile holds a K x N block of B on its weight MRs; every row of A is
    streamed through as a K-wavelength input vector and each column's partial
    sum is read by a balanced photodetector. Partial sums accumulate in a
    wide integer register and are converted once per output element.
    Passes are spread round-robin over the named bank arrays.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {B.shape}")
    bits = cfg.bits
    sa = QuantSpec.calibrate(A, bits)
    sb = QuantSpec.calibrate(B, bits)
    qa = quantize(A, sa)
    qb = quantize(B, sb)
    m, kd = qa.shape
    nc = qb.shape[1]
    K, N = cfg.bank_rows_k, cfg.bank_cols_n
    noisy = cfg.noise.heterodyne_enabled
    gen = _rng(cfg, rng) if noisy else None
    acc = np.zeros((m, nc), dtype=float if noisy else np.int64)
    for k0 in range(0, kd, K):
        ks = slice(k0, min(k0 + K, kd))
        a_tile = qa[:, ks]
        kl = a_tile.shape[1]
        for n0 in range(0, nc, N):
            ns = slice(n0, min(n0 + N, nc))
            w = qb[ks, ns]
            nl = w.shape[1]
            if noisy:
                f = _heterodyne(cfg, gen, (m, kl))
                acc[:, ns] += np.einsum("mk,kn->mn", a_tile * f, w.astype(float))
            else:
                wp = np.maximum(w, 0)
                wn = np.maximum(-w, 0)
                acc[:, ns] += a_tile @ wp - a_tile @ wn
            if trace is not None:
                trace.emit("dac_write", kl * nl, kl * nl * bits)
                trace.emit("mr_tune_eo", kl * nl)
                trace.emit("dac_write", m * kl, m * kl * bits)
                trace.emit("mr_tune_eo", m * kl)
                trace.emit("vcsel_emit", m * kl)
                trace.emit("bpd_read", m * nl)
    if noisy:
        acc = np.rint(acc)
    if trace is not None:
        trace.emit("adc_read", m * nc, m * nc * bits)
        passes = matmul_tile_counts(m, kd, nc, cfg)["passes"]
        nb = max(len(banks), 1)
        for i, name in enumerate(banks):
            trace.annotate(f"bank:{name}", passes // nb + (1 if i < passes % nb else 0))
        trace.latency(-(-passes // nb) * cfg.step_ns)
    return dequantize_product(acc, sa, sb)
