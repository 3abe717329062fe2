"""GNN inference on V execution lanes: aggregate, combine, update.

Graphs are undirected: each edge-list line ``u v [w]`` creates the incidence
in both directions. Aggregation is driven by a buffer-and-partition
schedule: output vertices are grouped V at a time and their neighbour sets
are fetched N input vertices per round. Results never depend on the
schedule: quantized modes accumulate integer code products, and float mode
collects every contribution before an exactly rounded ``math.fsum``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels as K
from .engine import Executor
from .kernels import PhotonicEngineConfig, QuantSpec, dequantize_product, quantize
from .trace import stage_scope

AGGREGATORS = ("sum", "mean", "max")
GNN_ACTIVATIONS = ("relu", "sigmoid", "tanh", "softmax")


@dataclass
class Graph:
    vertex_count: int
    neighbors: list  # per-vertex sorted neighbour index arrays
    features: np.ndarray
    edge_weights: Optional[list] = None  # per-vertex arrays aligned with neighbors

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        if len(self.neighbors) != self.vertex_count:
            raise ValueError("neighbors must have one entry per vertex")
        if self.features.shape[0] != self.vertex_count:
            raise ValueError(f"feature rows {self.features.shape[0]} != vertex_count {self.vertex_count}")
        for v, nb in enumerate(self.neighbors):
            if len(nb) and (min(nb) < 0 or max(nb) >= self.vertex_count):
                raise ValueError(f"vertex {v}: neighbour index out of range")

    @classmethod
    def from_edges(cls, vertex_count: int, edges, features, weights=None) -> "Graph":
        """Build an undirected graph; duplicate edges keep their first weight."""
        adj = [dict() for _ in range(vertex_count)]
        for i, (u, v) in enumerate(edges):
            u, v = int(u), int(v)
            for x in (u, v):
                if not 0 <= x < vertex_count:
                    raise ValueError(f"edge {i}: vertex {x} out of range [0, {vertex_count})")
            w = 1.0 if weights is None else float(weights[i])
            adj[u].setdefault(v, w)
            adj[v].setdefault(u, w)
        nbrs = [np.array(sorted(a), dtype=np.int64) for a in adj]
        ew = None
        if weights is not None:
            ew = [np.array([adj[v][u] for u in nbrs[v]], dtype=float) for v in range(vertex_count)]
        return cls(vertex_count, nbrs, features, ew)

    @property
    def f_in(self) -> int:
        return self.features.shape[1]

    def degree(self) -> np.ndarray:
        return np.array([len(n) for n in self.neighbors], dtype=np.int64)

    def edges(self) -> list:
        return [(v, int(u)) for v in range(self.vertex_count) for u in self.neighbors[v]]

    def weight(self, v: int, i: int) -> float:
        return 1.0 if self.edge_weights is None else float(self.edge_weights[v][i])

    def with_features(self, features) -> "Graph":
        return Graph(self.vertex_count, self.neighbors, features, self.edge_weights)

    def permuted(self, perm) -> "Graph":
        """Relabel vertex ``v`` as ``perm[v]``."""
        perm = np.asarray(perm)
        n = self.vertex_count
        nb = [None] * n
        ew = None if self.edge_weights is None else [None] * n
        for v in range(n):
            new = perm[self.neighbors[v]]
            order = np.argsort(new, kind="stable")
            nb[perm[v]] = new[order]
            if ew is not None:
                ew[perm[v]] = self.edge_weights[v][order]
        feats = np.empty_like(self.features)
        feats[perm] = self.features
        return Graph(n, nb, feats, ew)


def load_graph(edge_list_path, features_path) -> Graph:
    """Read an edge list (``src dst [weight]``, ``#`` comments) and a feature CSV."""
    features = read_matrix_csv(features_path)
    n = features.shape[0]
    edges, weights, any_weight = [], [], False
    with open(edge_list_path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) not in (2, 3):
                raise ValueError(f"{edge_list_path}:{lineno}: expected 'src dst [weight]', got {raw.strip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise ValueError(f"{edge_list_path}:{lineno}: malformed line {raw.strip()!r}") from None
            for x in (u, v):
                if not 0 <= x < n:
                    raise ValueError(f"{edge_list_path}:{lineno}: vertex {x} out of range for {n} feature rows")
            any_weight |= len(parts) == 3
            edges.append((u, v))
            weights.append(w)
    return Graph.from_edges(n, edges, features, weights if any_weight else None)


def read_matrix_csv(path) -> np.ndarray:
    """Row-major numeric CSV; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    try:
        data = [[float(c) for c in r] for r in rows]
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.array(data, dtype=float)


@dataclass(frozen=True)
class GnnLayerSpec:
    f_in: int
    f_out: int
    aggregator: str = "sum"
    activation: str = "relu"
    self_loops: bool = False
    gcn_norm: bool = False


@dataclass
class GnnModelSpec:
    layers: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def problems(self, f_in: Optional[int] = None) -> list:
        out = []
        if len(self.weights) != len(self.layers):
            out.append(f"weights: {len(self.weights)} matrices for {len(self.layers)} layers")
        prev = f_in
        for i, ls in enumerate(self.layers):
            if ls.aggregator not in AGGREGATORS:
                out.append(f"layers[{i}].aggregator: {ls.aggregator!r} not in {AGGREGATORS}")
            if ls.activation not in GNN_ACTIVATIONS:
                out.append(f"layers[{i}].activation: {ls.activation!r} not in {GNN_ACTIVATIONS}")
            if prev is not None and ls.f_in != prev:
                out.append(f"layers[{i}].f_in: {ls.f_in} does not chain with previous width {prev}")
            prev = ls.f_out
            if i < len(self.weights) and np.shape(self.weights[i]) != (ls.f_in, ls.f_out):
                out.append(f"weights[{i}]: shape {np.shape(self.weights[i])} != {(ls.f_in, ls.f_out)}")
        return out

    def validate(self, f_in: Optional[int] = None) -> "GnnModelSpec":
        p = self.problems(f_in)
        if p:
            raise ValueError("invalid GNN spec: " + "; ".join(p))
        return self

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "GnnModelSpec":
        """``layers`` entries may hold ``weights`` inline or a ``weights_csv`` path."""
        layers, weights = [], []
        for i, ld in enumerate(d["layers"]):
            ld = dict(ld)
            w = ld.pop("weights", None)
            wpath = ld.pop("weights_csv", None)
            layers.append(GnnLayerSpec(**ld))
            if w is not None:
                weights.append(np.asarray(w, dtype=float).reshape(layers[-1].f_in, layers[-1].f_out))
            elif wpath is not None:
                p = Path(wpath) if base_dir is None else Path(base_dir) / wpath
                weights.append(read_matrix_csv(p))
            else:
                raise ValueError(f"layers[{i}]: needs 'weights' or 'weights_csv'")
        return cls(layers, weights)

    def to_dict(self) -> dict:
        return {"layers": [dict(vars(ls), weights=np.asarray(w).tolist()) for ls, w in zip(self.layers, self.weights)]}


@dataclass(frozen=True)
class GhostConfig:
    lanes_v: int = 8
    partition_n: int = 64
    engine: Optional[PhotonicEngineConfig] = None

    def __post_init__(self):
        if self.lanes_v < 1 or self.partition_n < 1:
            raise ValueError("lanes_v and partition_n must be >= 1")


@dataclass(frozen=True)
class Round:
    outputs: tuple
    inputs: tuple


@dataclass
class PartitionSchedule:
    rounds: list
    lanes_v: int
    partition_n: int
    self_loops: bool = False

    def incidences(self, graph: Graph) -> list:
        """Every (output vertex, neighbour) pair processed, in schedule order."""
        out = []
        for r in self.rounds:
            ins = set(r.inputs)
            for v in r.outputs:
                for u in layer_neighbors(graph, v, self.self_loops):
                    if int(u) in ins:
                        out.append((v, int(u)))
        return out


def layer_neighbors(graph: Graph, v: int, self_loops: bool) -> np.ndarray:
    nb = graph.neighbors[v]
    if self_loops and not np.any(nb == v):
        nb = np.sort(np.append(nb, v))
    return nb


def partition_graph(graph: Graph, config: GhostConfig, self_loops: bool = False) -> PartitionSchedule:
    """Buffer-and-partition blocking.

    Output vertices are grouped V at a time in index order; each group's
    neighbour union is split into input blocks of N. Groups are issued in
    descending total degree (stable), a longest-processing-time balance.
    A group with no neighbours still gets one round with an empty input block.
    """
    V, N = config.lanes_v, config.partition_n
    groups = []
    for start in range(0, graph.vertex_count, V):
        outs = tuple(range(start, min(start + V, graph.vertex_count)))
        nbrs = [layer_neighbors(graph, v, self_loops) for v in outs]
        union = sorted(set().union(*(set(map(int, nb)) for nb in nbrs))) if nbrs else []
        load = sum(len(nb) for nb in nbrs)
        blocks = [tuple(union[i:i + N]) for i in range(0, len(union), N)] or [()]
        groups.append((load, start, [Round(outs, b) for b in blocks]))
    groups.sort(key=lambda g: (-g[0], g[1]))
    return PartitionSchedule([r for g in groups for r in g[2]], V, N, self_loops)


def edge_coefficients(graph: Graph, layer: GnnLayerSpec) -> list:
    """Per-vertex gather coefficients aligned with ``layer_neighbors``.

    Edge weight (default 1), times deg^-1/2 deg^-1/2 when ``gcn_norm`` is set;
    degrees are weighted and include the self-loop when enabled.
    """
    coefs = []
    for v in range(graph.vertex_count):
        nb = layer_neighbors(graph, v, layer.self_loops)
        w = np.ones(len(nb))
        base = graph.neighbors[v]
        pos = np.searchsorted(base, nb)
        for i, u in enumerate(nb):
            if pos[i] < len(base) and base[pos[i]] == u:
                w[i] = graph.weight(v, pos[i])
        coefs.append(w)
    if layer.gcn_norm:
        deg = np.array([c.sum() for c in coefs])
        inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
        for v in range(graph.vertex_count):
            nb = layer_neighbors(graph, v, layer.self_loops)
            coefs[v] = coefs[v] * inv[v] * inv[nb]
    return coefs


def dense_operator(graph: Graph, layer: GnnLayerSpec) -> np.ndarray:
    """Aggregation as a dense matrix: row v holds v's gather coefficients."""
    A = np.zeros((graph.vertex_count, graph.vertex_count))
    for v, c in enumerate(edge_coefficients(graph, layer)):
        A[v, layer_neighbors(graph, v, layer.self_loops)] = c
    return A


def aggregate(graph: Graph, features, layer: GnnLayerSpec, schedule: PartitionSchedule, ex: Executor,
              label: str = "L0") -> np.ndarray:
    """Reduce each vertex's neighbourhood to one feature vector.

    Empty neighbourhoods give the zero vector (mean divides by max(degree, 1)).
    """
    X = np.asarray(features, dtype=float)
    n, f = X.shape
    coefs = edge_coefficients(graph, layer)
    nbrs = [layer_neighbors(graph, v, layer.self_loops) for v in range(n)]
    deg = np.array([len(nb) for nb in nbrs])

    if ex.quantized:
        sx = QuantSpec.calibrate(X, ex.bits)
        xv = quantize(X, sx)
        flat = np.concatenate(coefs) if coefs else np.zeros(0)
        if np.all(flat == 1.0):
            sc, cv = QuantSpec(ex.bits, 1.0), [np.ones(len(c), dtype=np.int64) for c in coefs]
        else:
            sc = QuantSpec.calibrate(flat, ex.bits)
            cv = [quantize(c, sc) for c in coefs]
    else:
        xv, cv = X, coefs

    if ex.mode == "quant_ref":
        acc = _aggregate_direct(xv, nbrs, cv, layer.aggregator, f)
    else:
        acc = _aggregate_scheduled(graph, xv, nbrs, cv, layer, schedule, ex, label, f)

    if ex.quantized:
        out = dequantize_product(acc, sx, sc)
    else:
        out = np.asarray(acc, dtype=float)
    if layer.aggregator == "mean":
        out = out / np.maximum(deg, 1)[:, None]
        if ex.photonic:
            ex.trace.emit("digital_op", n * f, stage=f"{label}.aggregate")
    return out


def _aggregate_direct(xv, nbrs, cv, agg, f):
    acc = np.zeros((len(nbrs), f), dtype=np.int64)
    for v, nb in enumerate(nbrs):
        if len(nb) == 0:
            continue
        prod = cv[v][:, None] * xv[nb]
        acc[v] = prod.max(axis=0) if agg == "max" else prod.sum(axis=0)
    return acc


def _aggregate_scheduled(graph, xv, nbrs, cv, layer, schedule, ex, label, f):
    n = len(nbrs)
    quant = ex.quantized
    use_max = layer.aggregator == "max"
    parts = [[] for _ in range(n)]
    cfg = ex.cfg
    t = ex.t
    passes = -(-f // cfg.bank_rows_k)
    nonunit = any(np.any(c != 1) for c in cv)
    for ri, rnd in enumerate(schedule.rounds):
        stage = f"{label}.aggregate.r{ri}"
        ins = np.asarray(rnd.inputs, dtype=np.int64)
        with stage_scope(t, stage):
            if t is not None:
                t.emit("mem_read", len(ins) * f, len(ins) * f * ex.bits)
                t.annotate("reduce_unit_activation", schedule.lanes_v)
                t.annotate("idle_lane", schedule.lanes_v - len(rnd.outputs))
            for lane, v in enumerate(rnd.outputs):
                nb = nbrs[v]
                sel = np.isin(nb, ins)
                if not np.any(sel):
                    if t is not None:
                        t.annotate("idle_lane")
                    continue
                prod = cv[v][sel][:, None] * xv[nb[sel]]
                if t is not None:
                    k = prod.shape[0] * f
                    t.emit("dac_write", k, k * ex.bits)
                    t.emit("mr_tune_eo", k)
                    if nonunit:
                        t.emit("digital_op", k)
                    t.latency(passes * cfg.step_ns, lane=lane)
                if use_max:
                    part = prod.max(axis=0)
                    if t is not None:
                        t.emit("vcsel_emit", prod.size)
                        t.emit("digital_op", prod.size)
                elif ex.photonic:
                    part = K.coherent_sum(prod, cfg, t, ex.rng)
                else:
                    part = prod
                parts[v].append(np.atleast_2d(part))
    acc = np.zeros((n, f), dtype=np.int64 if quant and not _noisy(ex) else float)
    for v in range(n):
        if not parts[v]:
            continue
        stacked = np.concatenate(parts[v], axis=0)
        if use_max:
            acc[v] = stacked.max(axis=0)
        elif quant:
            acc[v] = stacked.sum(axis=0)
        else:
            acc[v] = [math.fsum(col) for col in stacked.T]
    return acc


def _noisy(ex: Executor) -> bool:
    return ex.photonic and ex.cfg.noise.homodyne_enabled and ex.cfg.noise.homodyne_amplitude > 0


def combine(aggregated, weights, ex: Executor, lanes_v: int = 1, label: str = "L0") -> np.ndarray:
    """Per-vertex matrix-vector transform on MR bank arrays.

    Vertices are processed V at a time; the weight DACs are shared across the
    lanes of a round, so each round writes every weight column once.
    """
    H = np.asarray(aggregated, dtype=float)
    W = np.asarray(weights, dtype=float)
    if H.ndim != 2 or W.ndim != 2 or H.shape[1] != W.shape[0]:
        raise ValueError(f"shape mismatch: aggregated {H.shape}, weights {W.shape}")
    if not ex.photonic:
        return ex.matmul(H, W)
    cfg, t, bits = ex.cfg, ex.trace, ex.bits
    sa = QuantSpec.calibrate(H, bits)
    sb = QuantSpec.calibrate(W, bits)
    qa, qw = quantize(H, sa), quantize(W, sb)
    n, f_in = qa.shape
    f_out = qw.shape[1]
    kt = -(-f_in // cfg.bank_rows_k)
    nt = -(-f_out // cfg.bank_cols_n)
    noisy = cfg.noise.heterodyne_enabled
    acc = np.zeros((n, f_out), dtype=float if noisy else np.int64)
    for ri, start in enumerate(range(0, n, lanes_v)):
        with stage_scope(t, f"{label}.combine.r{ri}"):
            t.emit("dac_write", f_out, f_out * f_in * bits)
            t.emit("mr_tune_eo", f_in * f_out)
            for lane, v in enumerate(range(start, min(start + lanes_v, n))):
                for j in range(f_out):
                    acc[v, j] = _chunked_dot(qa[v], qw[:, j], cfg, ex.rng)
                t.emit("vcsel_emit", f_in * nt)
                t.emit("bpd_read", f_out * kt)
                t.emit("adc_read", f_out, f_out * bits)
                t.latency(kt * nt * cfg.step_ns, lane=lane)
    if noisy:
        acc = np.rint(acc)
    return dequantize_product(acc, sa, sb)


def _chunked_dot(a, w, cfg, rng):
    K_ = cfg.bank_rows_k
    total = 0
    for k0 in range(0, len(a), K_):
        total += K.bpd_dot(a[k0:k0 + K_], w[k0:k0 + K_], cfg, None, rng)
    return total


def update(combined, layer: GnnLayerSpec, ex: Executor, label: str = "L0") -> np.ndarray:
    if layer.activation not in GNN_ACTIVATIONS:
        raise ValueError(f"unsupported activation {layer.activation!r}")
    with stage_scope(ex.t, f"{label}.update"):
        out = ex.activation(np.asarray(combined, dtype=float), layer.activation)
        if ex.photonic and layer.activation != "softmax":
            ex.trace.latency(ex.cfg.step_ns)
        return out


def run_gnn(graph: Graph, model: GnnModelSpec, config: GhostConfig, mode: str):
    """Run every layer (aggregate -> combine -> update); returns ``(features, trace)``."""
    model.validate(graph.f_in)
    ex = Executor(mode, config.engine)
    X = graph.features
    for li, (layer, W) in enumerate(zip(model.layers, model.weights)):
        label = f"L{li}"
        sched = partition_graph(graph, config, layer.self_loops)
        H = aggregate(graph, X, layer, sched, ex, label)
        C = combine(H, W, ex, config.lanes_v, label)
        X = update(C, layer, ex, label)
    return X, ex.trace
