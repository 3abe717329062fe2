"""Regenerate the bundled example workloads under src/photonic_accel/data/examples/.

Everything is drawn from fixed seeds, so rerunning produces identical files.
"""

import json
from pathlib import Path

import networkx as nx
import numpy as np

from photonic_accel.config import HardwareConfig, save_weights_bin, write_matrix_csv
from photonic_accel.tron import TransformerModelSpec, TransformerWeights

ROOT = Path(__file__).resolve().parents[1] / "src" / "photonic_accel" / "data" / "examples"


def dump(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def transformer(name, spec: TransformerModelSpec, seed: int):
    d = ROOT / name
    dump(d / "spec.json", spec.to_dict())
    w = TransformerWeights.random(spec, seed)
    save_weights_bin(w.to_named(), d / "weights.bin")
    X = np.random.default_rng(seed + 1).normal(size=(spec.seq_len, spec.d_model))
    write_matrix_csv(d / "input.csv", X.astype(np.float32))


def karate(name, seed: int):
    d = ROOT / name
    d.mkdir(parents=True, exist_ok=True)
    g = nx.karate_club_graph()
    lines = ["# Zachary karate club, undirected, src dst"] + [f"{u} {v}" for u, v in sorted(g.edges())]
    (d / "graph.txt").write_text("\n".join(lines) + "\n")
    rng = np.random.default_rng(seed)
    write_matrix_csv(d / "features.csv", rng.normal(size=(34, 8)).astype(np.float32))
    layers = [
        {"f_in": 8, "f_out": 16, "aggregator": "sum", "activation": "relu", "self_loops": True, "gcn_norm": False},
        {"f_in": 16, "f_out": 4, "aggregator": "sum", "activation": "softmax", "self_loops": True, "gcn_norm": False},
    ]
    for i, ls in enumerate(layers):
        w = rng.normal(0, 1 / np.sqrt(ls["f_in"]), size=(ls["f_in"], ls["f_out"])).astype(np.float32)
        write_matrix_csv(d / f"W{i}.csv", w)
        ls["weights_csv"] = f"W{i}.csv"
    dump(d / "spec.json", {"layers": layers})


def main():
    dump(ROOT / "hardware.json", HardwareConfig().to_dict())
    transformer("tiny_transformer", TransformerModelSpec(1, 2, 8, 4, 16, 4, "encoder_only"), 11)
    transformer("encoder_2l", TransformerModelSpec(2, 4, 64, 16, 128, 16, "encoder_only"), 21)
    karate("karate_gcn", 31)
    dump(ROOT / "sweep_q.json", {
        "base": {"hardware": "hardware.json"},
        "grid": {"hardware.q_factor": [1500, 2000, 2500, 3000]},
    })
    dump(ROOT / "sweep_tiny.json", {
        "base": {
            "hardware": "hardware.json",
            "workload": {"spec": "tiny_transformer/spec.json", "weights": "tiny_transformer/weights.bin",
                         "input": "tiny_transformer/input.csv", "mode": "photonic", "seed": 7},
        },
        "grid": {"hardware.bank_cols_n": [4, 8], "hardware.channel_count": [4, 8, 16]},
    })


if __name__ == "__main__":
    main()
