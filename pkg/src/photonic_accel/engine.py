"""Execution modes shared by the transformer and GNN mappers.

``float_ref`` is plain float64 arithmetic. ``quant_ref`` is the digital
integer reference: the same quantization points, LUT softmax and integer
accumulation as the photonic path, but no tiling and no trace. ``photonic``
runs the kernels and records a :class:`ScheduleTrace`.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import kernels as K
from .kernels import PhotonicEngineConfig, default_engine
from .trace import ScheduleTrace

MODES = ("float_ref", "quant_ref", "photonic")
LN_EPS = 1e-5


class Executor:
    def __init__(self, mode: str, cfg: Optional[PhotonicEngineConfig] = None, trace: Optional[ScheduleTrace] = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        self.mode = mode
        self.cfg = cfg or default_engine()
        self.trace = trace if trace is not None else ScheduleTrace()
        self.rng = self.cfg.noise.rng()

    @property
    def photonic(self) -> bool:
        return self.mode == "photonic"

    @property
    def quantized(self) -> bool:
        return self.mode != "float_ref"

    @property
    def bits(self) -> int:
        return self.cfg.bits

    @property
    def t(self) -> Optional[ScheduleTrace]:
        return self.trace if self.photonic else None

    def matmul(self, A, B, banks: Sequence[str] = ("bank0",)) -> np.ndarray:
        if self.mode == "float_ref":
            A = np.asarray(A, dtype=float)
            B = np.asarray(B, dtype=float)
            if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
                raise ValueError(f"dimension mismatch: {A.shape} @ {B.shape}")
            return A @ B
        if self.mode == "quant_ref":
            return K.quantized_matmul(A, B, self.bits)
        return K.matmul_photonic(A, B, self.cfg, self.trace, self.rng, banks)

    def softmax(self, S) -> np.ndarray:
        if self.mode == "float_ref":
            return K.exact_softmax(S)
        return K.lut_softmax(S, self.t, self.bits)

    def activation(self, x, kind: str):
        if kind == "softmax":
            return self.softmax(x)
        return K.soa_activation(x, kind, self.t)

    def add(self, a, b) -> np.ndarray:
        """Residual addition (coherent summation in photonic mode)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.photonic:
            self.trace.emit("dac_write", 2 * a.size, 2 * a.size * self.bits)
            flat = K.coherent_sum(np.stack([a.ravel(), b.ravel()]), self.cfg, self.trace, self.rng)
            self.trace.latency(self.cfg.step_ns)
            return np.asarray(flat).reshape(a.shape)
        return np.stack([a.ravel(), b.ravel()]).sum(axis=0).reshape(a.shape)

    def layer_norm(self, x, scale, shift) -> np.ndarray:
        return layer_norm(x, scale, shift, self.t, self.bits, self.cfg.step_ns)


def layer_norm(x, scale, shift, trace: Optional[ScheduleTrace] = None, bits: int = 8, step_ns: float = 0.02) -> np.ndarray:
    """Layer normalization over the last axis.

    Mean and variance are computed digitally; the multiplicative scale is
    applied by one MR per element and the shift is added digitally.
    """
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    normed = (x - mu) / np.sqrt(var + LN_EPS)
    out = normed * np.asarray(scale, dtype=float) + np.asarray(shift, dtype=float)
    if trace is not None:
        n = x.size
        trace.emit("adc_read", n, n * bits)
        trace.emit("digital_op", 4 * n)
        trace.emit("dac_write", n, n * bits)
        trace.emit("mr_tune_eo", n)
        trace.emit("digital_op", n)
        trace.latency(step_ns if n else 0.0)
    return out
