"""Hardware configuration and file formats (JSON configs, CSV matrices, weight blobs)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .costs import CostTable
from .devices import MRDevice, NoiseContext, WavelengthGrid, design_bank
from .ghost import read_matrix_csv
from .kernels import PhotonicEngineConfig, QuantSpec


@dataclass
class HardwareConfig:
    radius_um: float = 5.0
    order_m: int = 48
    n_eff: float = 2.368
    q_factor: float = 8000.0
    extinction_floor: float = 0.0
    base_wavelength_nm: float = 1550.0
    channel_spacing_nm: float = 1.6
    channel_count: int = 8
    fsr_nm: float = 18.0
    bank_cols_n: int = 8
    bits: int = 8
    heterodyne_enabled: bool = False
    homodyne_enabled: bool = False
    homodyne_amplitude: float = 0.01
    detector_sensitivity: float = 0.9
    tuning_offsets_nm: Optional[list] = None

    @classmethod
    def from_dict(cls, d: dict) -> "HardwareConfig":
        d = {k: v for k, v in d.items() if not k.startswith("_")}
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown hardware fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if d["tuning_offsets_nm"] is None:
            del d["tuning_offsets_nm"]
        return d

    def problems(self) -> list:
        """Diagnostics as ``field: message`` strings; empty when valid."""
        out = []
        positive = ("radius_um", "n_eff", "q_factor", "base_wavelength_nm", "channel_spacing_nm", "fsr_nm")
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"{name}: must be a positive number, got {v!r}")
        for name in ("order_m", "channel_count", "bank_cols_n"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                out.append(f"{name}: must be an integer >= 1, got {v!r}")
        if not (isinstance(self.bits, int) and 2 <= self.bits <= 16):
            out.append(f"bits: must be an integer in [2, 16], got {self.bits!r}")
        if not 0 <= self.extinction_floor < 1:
            out.append(f"extinction_floor: must lie in [0, 1), got {self.extinction_floor!r}")
        if not 0 <= self.homodyne_amplitude < 1:
            out.append(f"homodyne_amplitude: must lie in [0, 1), got {self.homodyne_amplitude!r}")
        if not 0 < self.detector_sensitivity <= 1:
            out.append(f"detector_sensitivity: must lie in (0, 1], got {self.detector_sensitivity!r}")
        if self.tuning_offsets_nm is not None and len(self.tuning_offsets_nm) != self.channel_count:
            out.append(f"tuning_offsets_nm: expected {self.channel_count} entries, got {len(self.tuning_offsets_nm)}")
        if not out:
            span = (self.channel_count - 1) * self.channel_spacing_nm
            if not span < self.fsr_nm:
                out.append(f"fsr_nm: channel span (channel_count-1)*channel_spacing_nm = {span:.9g} nm does not fit in FSR {self.fsr_nm:.9g} nm")
        return out

    def device(self) -> MRDevice:
        return MRDevice(self.radius_um, self.order_m, self.n_eff, self.q_factor, self.extinction_floor)

    def grid(self) -> WavelengthGrid:
        return WavelengthGrid(self.base_wavelength_nm, self.channel_spacing_nm, self.channel_count, self.fsr_nm)

    def noise(self, seed: int = 0) -> NoiseContext:
        return NoiseContext(self.heterodyne_enabled, self.homodyne_enabled, self.homodyne_amplitude,
                            int(seed), self.detector_sensitivity)

    def bank(self) -> list:
        """Channel devices; each is fabricated off its channel by its tuning offset and tuned back onto it."""
        devs = design_bank(self.grid(), self.device())
        offs = self.tuning_offsets_nm or [0.0] * self.channel_count
        out = []
        for d, off in zip(devs, offs):
            lam = d.radius_um * 2 * math.pi * d.n_eff / d.order_m - off / 1000.0
            r = lam * d.order_m / (2 * math.pi * d.n_eff)
            out.append(replace(d, radius_um=r, tuning_offset_nm=float(off)))
        return out

    def engine(self, cost: Optional[CostTable] = None, seed: int = 0) -> PhotonicEngineConfig:
        rate = cost.modulation_rate_ghz if cost is not None else 50.0
        return PhotonicEngineConfig(self.channel_count, self.bank_cols_n, self.grid(), self.noise(seed),
                                    QuantSpec(self.bits), rate, self.device())


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON ({e})") from None


def load_hardware(path=None) -> HardwareConfig:
    return HardwareConfig() if path is None else HardwareConfig.from_dict(read_json(path))


def write_matrix_csv(path, M, header: Optional[list] = None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in M:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def fmt(x) -> str:
    """Fixed decimal formatting used by every report file (9 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".9g")


def rounded(x):
    """The value a reader recovers from :func:`fmt`."""
    if isinstance(x, (bool, np.bool_, int, np.integer, str)) or x is None:
        return x
    return float(fmt(x))


def save_weights_bin(named: dict, path):
    """Little-endian float32 blob plus a ``.json`` shape manifest beside it."""
    path = Path(path)
    tensors = []
    with open(path, "wb") as fh:
        for name in sorted(named):
            arr = np.asarray(named[name], dtype="<f4")
            fh.write(arr.tobytes(order="C"))
            tensors.append({"name": name, "shape": list(arr.shape)})
    manifest = {"dtype": "float32", "byte_order": "little", "tensors": tensors}
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_weights_bin(path) -> dict:
    path = Path(path)
    mpath = path.with_suffix(".json")
    if not mpath.exists():
        raise ValueError(f"{path}: shape manifest {mpath} not found")
    manifest = read_json(mpath)
    raw = np.fromfile(path, dtype="<f4")
    out, off = {}, 0
    for t in manifest["tensors"]:
        n = int(np.prod(t["shape"])) if t["shape"] else 1
        if off + n > raw.size:
            raise ValueError(f"{path}: blob too short for tensor {t['name']!r}")
        out[t["name"]] = raw[off:off + n].reshape(t["shape"]).astype(float)
        off += n
    if off != raw.size:
        raise ValueError(f"{path}: {raw.size - off} trailing values not described by {mpath}")
    return out


def load_weights_dir(path) -> dict:
    """One CSV per tensor (``<name>.csv``); single-row CSVs load as vectors."""
    out = {}
    for p in sorted(Path(path).glob("*.csv")):
        m = read_matrix_csv(p)
        out[p.stem] = m[0] if m.shape[0] == 1 and (p.stem.endswith(("scale", "shift"))) else m
    return out


def load_weights(path) -> dict:
    p = Path(path)
    if p.is_dir():
        return load_weights_dir(p)
    return load_weights_bin(p)
