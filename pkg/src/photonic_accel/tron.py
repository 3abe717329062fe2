"""Transformer inference mapped onto photonic kernels.

Attention scores use the reordered product Q.K^T = (Q.W_K^T).X^T so the key
matrix is never materialized: W_K^T (pre-divided by sqrt(d_k)) and X^T are
prepared offline and both chained products stay on MR bank arrays. Each
attention head owns seven bank arrays:

    bank0, bank1  Q = X.W_Q
    bank2         P = Q.(W_K^T / sqrt(d_k))
    bank3         S = P.X^T
    bank4, bank5  V = X.W_V
    bank6         softmax(S).V

The row-vector convention is used throughout: activations are
(seq_len, d_model) matrices multiplied on the right by weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import Executor
from .kernels import PhotonicEngineConfig
from .trace import ScheduleTrace, stage_scope

VARIANTS = ("encoder_only", "decoder_only", "encoder_decoder", "vit")
BANKS_PER_HEAD = 7


@dataclass(frozen=True)
class TransformerModelSpec:
    n_layers: int
    n_heads: int
    d_model: int
    d_k: int
    d_ff: int
    seq_len: int
    variant: str = "encoder_only"
    d_out: Optional[int] = None  # vit classifier width; defaults to d_model

    def problems(self) -> list:
        out = []
        for name in ("n_heads", "d_model", "d_k", "d_ff", "seq_len"):
            if not (isinstance(getattr(self, name), int) and getattr(self, name) >= 1):
                out.append(f"{name}: must be an integer >= 1")
        if not (isinstance(self.n_layers, int) and self.n_layers >= 0):
            out.append("n_layers: must be an integer >= 0")
        if self.variant not in VARIANTS:
            out.append(f"variant: {self.variant!r} not in {VARIANTS}")
        if not out and self.d_model != self.n_heads * self.d_k:
            out.append(f"d_model: {self.d_model} != n_heads*d_k = {self.n_heads}*{self.d_k}")
        if self.d_out is not None and self.variant != "vit":
            out.append("d_out: only meaningful for the vit variant")
        return out

    def validate(self) -> "TransformerModelSpec":
        p = self.problems()
        if p:
            raise ValueError("invalid transformer spec: " + "; ".join(p))
        return self

    @property
    def head_width(self) -> int:
        return self.d_out if self.d_out is not None else self.d_model

    @classmethod
    def from_dict(cls, d: dict) -> "TransformerModelSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown transformer spec fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if d["d_out"] is None:
            del d["d_out"]
        return d


@dataclass
class HeadWeights:
    W_Q: np.ndarray
    W_K: np.ndarray
    W_V: np.ndarray


@dataclass
class LayerWeights:
    heads: list
    W_O: np.ndarray
    W_1: np.ndarray
    W_2: np.ndarray
    ln1_scale: np.ndarray
    ln1_shift: np.ndarray
    ln2_scale: np.ndarray
    ln2_shift: np.ndarray
    cross_heads: Optional[list] = None
    W_O_cross: Optional[np.ndarray] = None
    ln_cross_scale: Optional[np.ndarray] = None
    ln_cross_shift: Optional[np.ndarray] = None


@dataclass
class TransformerWeights:
    encoder: list = field(default_factory=list)
    decoder: list = field(default_factory=list)
    mlp_head: Optional[np.ndarray] = None

    @classmethod
    def random(cls, spec: TransformerModelSpec, seed: int = 0) -> "TransformerWeights":
        spec.validate()
        rng = np.random.default_rng(seed)

        def mat(r, c):
            return rng.normal(0.0, 1.0 / math.sqrt(r), size=(r, c))

        def heads():
            return [HeadWeights(mat(spec.d_model, spec.d_k), mat(spec.d_model, spec.d_k), mat(spec.d_model, spec.d_k))
                    for _ in range(spec.n_heads)]

        def layer(cross: bool):
            d = spec.d_model
            lw = LayerWeights(
                heads(), mat(d, d), mat(d, spec.d_ff), mat(spec.d_ff, d),
                1.0 + 0.1 * rng.normal(size=d), 0.1 * rng.normal(size=d),
                1.0 + 0.1 * rng.normal(size=d), 0.1 * rng.normal(size=d),
            )
            if cross:
                lw.cross_heads = heads()
                lw.W_O_cross = mat(d, d)
                lw.ln_cross_scale = 1.0 + 0.1 * rng.normal(size=d)
                lw.ln_cross_shift = 0.1 * rng.normal(size=d)
            return lw

        n_enc, n_dec, cross = _stack_sizes(spec)
        enc = [layer(False) for _ in range(n_enc)]
        dec = [layer(cross) for _ in range(n_dec)]
        head = mat(spec.d_model, spec.head_width) if spec.variant == "vit" else None
        return cls(enc, dec, head)

    def to_named(self) -> dict:
        out = {}
        for stack, layers in (("encoder", self.encoder), ("decoder", self.decoder)):
            for i, lw in enumerate(layers):
                p = f"{stack}.{i}"
                for h, hw in enumerate(lw.heads):
                    for n in ("W_Q", "W_K", "W_V"):
                        out[f"{p}.head.{h}.{n}"] = getattr(hw, n)
                for n in ("W_O", "W_1", "W_2"):
                    out[f"{p}.{n}"] = getattr(lw, n)
                out[f"{p}.ln1.scale"], out[f"{p}.ln1.shift"] = lw.ln1_scale, lw.ln1_shift
                out[f"{p}.ln2.scale"], out[f"{p}.ln2.shift"] = lw.ln2_scale, lw.ln2_shift
                if lw.cross_heads is not None:
                    for h, hw in enumerate(lw.cross_heads):
                        for n in ("W_Q", "W_K", "W_V"):
                            out[f"{p}.cross.head.{h}.{n}"] = getattr(hw, n)
                    out[f"{p}.cross.W_O"] = lw.W_O_cross
                    out[f"{p}.cross.ln.scale"] = lw.ln_cross_scale
                    out[f"{p}.cross.ln.shift"] = lw.ln_cross_shift
        if self.mlp_head is not None:
            out["mlp_head"] = self.mlp_head
        return out

    @classmethod
    def from_named(cls, spec: TransformerModelSpec, named: dict) -> "TransformerWeights":
        spec.validate()
        named = {k: np.asarray(v, dtype=float) for k, v in named.items()}
        used = set()

        def get(key):
            if key not in named:
                raise KeyError(f"missing weight tensor {key!r}")
            used.add(key)
            return named[key]

        def heads(p):
            return [HeadWeights(get(f"{p}.{h}.W_Q"), get(f"{p}.{h}.W_K"), get(f"{p}.{h}.W_V"))
                    for h in range(spec.n_heads)]

        n_enc, n_dec, cross = _stack_sizes(spec)
        stacks = {}
        for stack, n in (("encoder", n_enc), ("decoder", n_dec)):
            layers = []
            for i in range(n):
                p = f"{stack}.{i}"
                lw = LayerWeights(
                    heads(f"{p}.head"), get(f"{p}.W_O"), get(f"{p}.W_1"), get(f"{p}.W_2"),
                    get(f"{p}.ln1.scale"), get(f"{p}.ln1.shift"), get(f"{p}.ln2.scale"), get(f"{p}.ln2.shift"),
                )
                if stack == "decoder" and cross:
                    lw.cross_heads = heads(f"{p}.cross.head")
                    lw.W_O_cross = get(f"{p}.cross.W_O")
                    lw.ln_cross_scale = get(f"{p}.cross.ln.scale")
                    lw.ln_cross_shift = get(f"{p}.cross.ln.shift")
                layers.append(lw)
            stacks[stack] = layers
        head = get("mlp_head") if spec.variant == "vit" else None
        extra = set(named) - used
        if extra:
            raise ValueError(f"unexpected weight tensors: {sorted(extra)[:5]}")
        w = cls(stacks["encoder"], stacks["decoder"], head)
        p = w.problems(spec)
        if p:
            raise ValueError("; ".join(p))
        return w

    def problems(self, spec: TransformerModelSpec) -> list:
        out = []
        d, dk, dff = spec.d_model, spec.d_k, spec.d_ff
        n_enc, n_dec, cross = _stack_sizes(spec)
        if len(self.encoder) != n_enc or len(self.decoder) != n_dec:
            out.append(f"layers: expected {n_enc} encoder / {n_dec} decoder, got {len(self.encoder)} / {len(self.decoder)}")
            return out
        for name, arr in self.to_named().items():
            if name == "mlp_head":
                want = (d, spec.head_width)
            elif ".head." in name:
                want = (d, dk)
            elif name.endswith(("W_O",)):
                want = (d, d)
            elif name.endswith("W_1"):
                want = (d, dff)
            elif name.endswith("W_2"):
                want = (dff, d)
            else:
                want = (d,)
            if np.shape(arr) != want:
                out.append(f"{name}: shape {np.shape(arr)} != {want}")
        return out


def _stack_sizes(spec: TransformerModelSpec):
    """(encoder layers, decoder layers, decoder has cross-attention)."""
    n = spec.n_layers
    return {
        "encoder_only": (n, 0, False),
        "vit": (n, 0, False),
        "decoder_only": (0, n, False),
        "encoder_decoder": (n, n, True),
    }[spec.variant]


@dataclass
class OfflineOperands:
    X: np.ndarray
    X_T: np.ndarray
    W_KT_scaled: list


def prepare_offline_operands(X, heads, spec: Optional[TransformerModelSpec] = None,
                             trace: Optional[ScheduleTrace] = None, bits: int = 8) -> OfflineOperands:
    """Store X, X^T and every head's W_K^T / sqrt(d_k) in the operand buffer."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be a matrix, got shape {X.shape}")
    wkt = []
    for h, hw in enumerate(heads):
        wk = np.asarray(hw.W_K, dtype=float)
        if wk.ndim != 2 or wk.shape[0] != X.shape[1]:
            raise ValueError(f"head {h}: W_K shape {wk.shape} incompatible with X {X.shape}")
        if spec is not None and wk.shape[1] != spec.d_k:
            raise ValueError(f"head {h}: W_K has {wk.shape[1]} columns, spec d_k = {spec.d_k}")
        wkt.append(wk.T / math.sqrt(wk.shape[1]))
    ops = OfflineOperands(X, X.T.copy(), wkt)
    if trace is not None:
        n = 2 * X.size + sum(w.size for w in wkt)
        trace.emit("mem_write", n, n * bits)
    return ops


def _banks(label: str, *idx):
    return tuple(f"{label}.bank{i}" for i in idx)


def attention_scores_decomposed(X, head: HeadWeights, ops: OfflineOperands, ex: Executor,
                                head_index: int = 0, label: str = "H0") -> np.ndarray:
    """Scaled scores (Q.W_K^T/sqrt(d_k)).X^T with Q = X.W_Q.

    ``X`` supplies the queries; ``ops.X`` supplies the keys (they differ only
    in cross-attention).
    """
    X = np.asarray(X, dtype=float)
    if ex.photonic:
        n = head.W_Q.size + ops.W_KT_scaled[head_index].size + ops.X_T.size
        ex.trace.emit("mem_read", n, n * ex.bits)
    Q = ex.matmul(X, head.W_Q, _banks(label, 0, 1))
    P = ex.matmul(Q, ops.W_KT_scaled[head_index], _banks(label, 2))
    return ex.matmul(P, ops.X_T, _banks(label, 3))


def attention_head(X, head: HeadWeights, ops: OfflineOperands, ex: Executor, head_index: int = 0,
                   mask: Optional[np.ndarray] = None, label: str = "H0") -> np.ndarray:
    """softmax(Q.K^T / sqrt(d_k)).V for one head."""
    S = attention_scores_decomposed(X, head, ops, ex, head_index, label)
    if mask is not None:
        S = S + mask
    A = ex.softmax(S)
    if ex.photonic:
        ex.trace.emit("mem_read", head.W_V.size, head.W_V.size * ex.bits)
    V = ex.matmul(ops.X, head.W_V, _banks(label, 4, 5))
    return ex.matmul(A, V, _banks(label, 6))


def causal_mask(n: int) -> np.ndarray:
    m = np.zeros((n, n))
    m[np.triu_indices(n, 1)] = -np.inf
    return m


def mha_forward(X, layer: LayerWeights, ex: Executor, label: str = "L0", mask=None, memory=None,
                cross: bool = False, norm: bool = True) -> np.ndarray:
    """Multi-head attention block: heads, concat, linear, residual add, LN.

    With ``cross`` the block uses the layer's cross-attention weights and
    draws keys/values from ``memory``.
    """
    X = np.asarray(X, dtype=float)
    heads = layer.cross_heads if cross else layer.heads
    W_O = layer.W_O_cross if cross else layer.W_O
    ln = (layer.ln_cross_scale, layer.ln_cross_shift) if cross else (layer.ln1_scale, layer.ln1_shift)
    src = X if memory is None else np.asarray(memory, dtype=float)
    tag = f"{label}.{'xattn' if cross else 'mha'}"
    with stage_scope(ex.t, tag):
        ops = prepare_offline_operands(src, heads, None, ex.t, ex.bits)
    outs = []
    for h, hw in enumerate(heads):
        with stage_scope(ex.t, f"{tag}.H{h}"):
            outs.append(attention_head(X, hw, ops, ex, h, mask, f"{tag}.H{h}"))
    with stage_scope(ex.t, f"{tag}.out"):
        cat = np.concatenate(outs, axis=1)
        if ex.photonic:
            ex.trace.emit("mem_read", W_O.size, W_O.size * ex.bits)
        Y = ex.matmul(cat, W_O, (f"{tag}.linear0", f"{tag}.linear1"))
        R = ex.add(X, Y)
        return ex.layer_norm(R, *ln) if norm else R


def ffn_forward(x, layer: LayerWeights, ex: Executor, label: str = "L0") -> np.ndarray:
    """relu(x.W_1).W_2, biasless."""
    with stage_scope(ex.t, f"{label}.ffn"):
        if ex.photonic:
            n = layer.W_1.size + layer.W_2.size
            ex.trace.emit("mem_read", n, n * ex.bits)
        h = ex.matmul(x, layer.W_1, (f"{label}.ffn.bank0",))
        h = ex.activation(h, "relu")
        return ex.matmul(h, layer.W_2, (f"{label}.ffn.bank1",))


def add_norm(x, y, scale, shift, ex: Executor, label: str) -> np.ndarray:
    with stage_scope(ex.t, f"{label}.addnorm"):
        return ex.layer_norm(ex.add(x, y), scale, shift)


def encoder_layer(X, layer: LayerWeights, ex: Executor, label: str = "enc0") -> np.ndarray:
    H = mha_forward(X, layer, ex, label)
    return add_norm(H, ffn_forward(H, layer, ex, label), layer.ln2_scale, layer.ln2_shift, ex, label)


def decoder_layer(X, layer: LayerWeights, ex: Executor, label: str = "dec0", memory=None) -> np.ndarray:
    H = mha_forward(X, layer, ex, label, mask=causal_mask(len(X)))
    if memory is not None:
        H = mha_forward(H, layer, ex, label, memory=memory, cross=True)
    return add_norm(H, ffn_forward(H, layer, ex, label), layer.ln2_scale, layer.ln2_shift, ex, label)


def run_transformer(spec: TransformerModelSpec, weights: TransformerWeights, X, mode: str,
                    cfg: Optional[PhotonicEngineConfig] = None, Y=None):
    """Run the full stack; returns ``(output, trace)``.

    ``Y`` is the decoder input for ``encoder_decoder`` models (defaults to X).
    The trace is empty unless ``mode == "photonic"``.
    """
    spec.validate()
    p = weights.problems(spec)
    if p:
        raise ValueError("; ".join(p))
    X = np.asarray(X, dtype=float)
    if X.shape != (spec.seq_len, spec.d_model):
        raise ValueError(f"input shape {X.shape} != (seq_len, d_model) = {(spec.seq_len, spec.d_model)}")
    ex = Executor(mode, cfg)
    out = X
    if spec.variant in ("encoder_only", "vit", "encoder_decoder"):
        for i, lw in enumerate(weights.encoder):
            out = encoder_layer(out, lw, ex, f"enc{i}")
    if spec.variant == "vit" and weights.mlp_head is not None:
        with stage_scope(ex.t, "mlp_head"):
            if ex.photonic:
                ex.trace.emit("mem_read", weights.mlp_head.size, weights.mlp_head.size * ex.bits)
            out = ex.matmul(out, weights.mlp_head, ("mlp_head.bank0",))
    if spec.variant == "decoder_only":
        for i, lw in enumerate(weights.decoder):
            out = decoder_layer(out, lw, ex, f"dec{i}")
    if spec.variant == "encoder_decoder":
        memory = out
        out = X if Y is None else np.asarray(Y, dtype=float)
        for i, lw in enumerate(weights.decoder):
            out = decoder_layer(out, lw, ex, f"dec{i}", memory=memory)
    return out, ex.trace
