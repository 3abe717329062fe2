"""Analytic microring (MR) device models, WDM grids, hybrid tuning and crosstalk.

Units: ring radius in micrometres, wavelengths in nanometres unless a name
says otherwise. ``resonant_wavelength`` returns micrometres to match the
radius unit; ``resonant_wavelength_nm`` is the same quantity in nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .costs import CostTable


@dataclass(frozen=True)
class MRDevice:
    radius_um: float
    order_m: int
    n_eff: float
    q_factor: float
    extinction_floor: float = 0.0
    tuning_offset_nm: float = 0.0

    def __post_init__(self):
        if not self.radius_um > 0:
            raise ValueError("radius_um must be positive")
        if int(self.order_m) != self.order_m or self.order_m < 1:
            raise ValueError("order_m must be a positive integer")
        if not self.n_eff > 0:
            raise ValueError("n_eff must be positive")
        if not self.q_factor > 0:
            raise ValueError("q_factor must be positive")
        if not 0.0 <= self.extinction_floor < 1.0:
            raise ValueError("extinction_floor must lie in [0, 1)")
        lam = resonant_wavelength(self)
        if not (math.isfinite(lam) and lam > 0):
            raise ValueError("resonant wavelength must be finite and positive")


@dataclass(frozen=True)
class WavelengthGrid:
    """WDM channel plan.

    Construction only checks positivity; whether the channels fit inside one
    free spectral range is a design rule reported by :func:`validate_bank`.
    """

    base_wavelength_nm: float
    channel_spacing_nm: float
    channel_count: int
    fsr_nm: float

    def __post_init__(self):
        if not self.base_wavelength_nm > 0:
            raise ValueError("base_wavelength_nm must be positive")
        if not self.channel_spacing_nm > 0:
            raise ValueError("channel_spacing_nm must be positive")
        if int(self.channel_count) != self.channel_count or self.channel_count < 1:
            raise ValueError("channel_count must be a positive integer")
        if not self.fsr_nm > 0:
            raise ValueError("fsr_nm must be positive")

    @property
    def span_nm(self) -> float:
        return (self.channel_count - 1) * self.channel_spacing_nm

    def fits_fsr(self) -> bool:
        return self.span_nm < self.fsr_nm

    def wavelengths(self) -> np.ndarray:
        return self.base_wavelength_nm + self.channel_spacing_nm * np.arange(self.channel_count)


@dataclass(frozen=True)
class TuningPlan:
    eo_shift: float
    to_shift: float
    energy: float
    latency: float
    feasible: bool


@dataclass(frozen=True)
class NoiseContext:
    heterodyne_enabled: bool = False
    homodyne_enabled: bool = False
    homodyne_amplitude: float = 0.0
    rng_seed: int = 0
    detector_sensitivity: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.homodyne_amplitude < 1.0:
            raise ValueError("homodyne_amplitude must lie in [0, 1)")
        if not 0.0 < self.detector_sensitivity <= 1.0:
            raise ValueError("detector_sensitivity must lie in (0, 1]")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    @property
    def enabled(self) -> bool:
        return self.heterodyne_enabled or self.homodyne_enabled

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(int(self.rng_seed))


@dataclass(frozen=True)
class Violation:
    rule: str
    channel: Optional[int]
    detail: str


def resonant_wavelength(device: MRDevice) -> float:
    """Resonant wavelength in micrometres, tuning offset included."""
    return 2.0 * math.pi * device.radius_um * device.n_eff / device.order_m + device.tuning_offset_nm / 1000.0


def resonant_wavelength_nm(device: MRDevice) -> float:
    return resonant_wavelength(device) * 1000.0


def half_linewidth_nm(device: MRDevice) -> float:
    return resonant_wavelength_nm(device) / (2.0 * device.q_factor)


def through_transmission(device: MRDevice, wavelength_nm):
    """Through-port power transmission of an all-pass Lorentzian notch.

    Accepts a scalar or an array of wavelengths (nm).
    """
    lam0 = resonant_wavelength_nm(device)
    d = lam0 / (2.0 * device.q_factor)
    det = np.asarray(wavelength_nm, dtype=float) - lam0
    if np.any(np.asarray(wavelength_nm) <= 0):
        raise ValueError("wavelength must be positive")
    t = 1.0 - (1.0 - device.extinction_floor) * d * d / (det * det + d * d)
    return float(t) if t.ndim == 0 else t


def design_bank(grid: WavelengthGrid, template: MRDevice) -> list:
    """One device per channel, radius chosen so each ring rests on its channel.

    Order, index, Q and extinction come from ``template``; tuning offsets are
    zero.
    """
    out = []
    for lam in grid.wavelengths():
        r = (lam / 1000.0) * template.order_m / (2.0 * math.pi * template.n_eff)
        out.append(replace(template, radius_um=float(r), tuning_offset_nm=0.0))
    return out


def plan_tuning(device: MRDevice, target_shift: float, cost: CostTable) -> TuningPlan:
    """Split a resonance shift (nm) between electro-optic and thermo-optic tuning.

    EO handles shifts up to its range; beyond that EO runs at full range and TO
    covers the excess. TO energy is discounted by the thermal eigenmode
    decomposition factor ``cost.ted_discount``.
    """
    mag = abs(float(target_shift))
    if mag == 0.0:
        return TuningPlan(0.0, 0.0, 0.0, 0.0, True)
    if mag > cost.eo_range_nm + cost.to_range_nm:
        return TuningPlan(0.0, 0.0, 0.0, 0.0, False)
    sign = math.copysign(1.0, target_shift)
    eo = min(mag, cost.eo_range_nm)
    to = mag - eo
    energy = cost.eo_energy_pj_per_nm * eo + cost.ted_discount * cost.to_energy_pj_per_nm * to
    latency = cost.eo_latency_ns if eo > 0 else 0.0
    if to > 0:
        latency = max(latency, cost.to_latency_ns)
    return TuningPlan(sign * eo, sign * to, energy, latency, True)


def _check_bank(grid: WavelengthGrid, devices: Sequence[MRDevice]):
    if len(devices) != grid.channel_count:
        raise ValueError(f"expected {grid.channel_count} devices (one per channel), got {len(devices)}")


def heterodyne_crosstalk(grid: WavelengthGrid, devices: Sequence[MRDevice], victim_channel: int) -> float:
    """Power fraction leaking from the other channels into the victim ring.

    Sums the victim's Lorentzian tail ``1 - T(lambda_j)`` at every aggressor
    wavelength within one FSR of the victim.
    """
    _check_bank(grid, devices)
    if not 0 <= victim_channel < grid.channel_count:
        raise IndexError(f"victim_channel {victim_channel} out of range [0, {grid.channel_count})")
    lams = grid.wavelengths()
    victim = devices[victim_channel]
    total = 0.0
    for j, lam in enumerate(lams):
        if j == victim_channel or abs(lam - lams[victim_channel]) > grid.fsr_nm:
            continue
        total += 1.0 - through_transmission(victim, lam)
    return total


def crosstalk_profile(grid: WavelengthGrid, devices: Sequence[MRDevice]) -> np.ndarray:
    return np.array([heterodyne_crosstalk(grid, devices, i) for i in range(grid.channel_count)])


def validate_bank(
    grid: WavelengthGrid,
    devices: Sequence[MRDevice],
    noise: NoiseContext,
    cost: Optional[CostTable] = None,
) -> list:
    """Check an MR bank against its design rules; an empty list means valid.

    Rules: ``fsr`` (channel lies outside the first FSR), ``snr`` (modulation
    depth minus crosstalk does not clear the detector sensitivity), ``tuning``
    (the device's tuning offset cannot be reached). Homodyne amplitude counts
    against the SNR margin only when homodyne noise is enabled.
    """
    _check_bank(grid, devices)
    cost = cost or CostTable()
    out = []
    lams = grid.wavelengths()
    for i, lam in enumerate(lams):
        if lam - lams[0] >= grid.fsr_nm:
            out.append(Violation("fsr", i, f"channel at {lam:.6g} nm is {lam - lams[0]:.6g} nm from channel 0, FSR {grid.fsr_nm:.6g} nm"))
    xt = crosstalk_profile(grid, devices)
    for i, dev in enumerate(devices):
        margin = (1.0 - dev.extinction_floor) - xt[i]
        if noise.homodyne_enabled:
            margin -= noise.homodyne_amplitude
        if not margin > noise.detector_sensitivity:
            out.append(Violation("snr", i, f"net signal {margin:.6g} does not exceed sensitivity {noise.detector_sensitivity:.6g} (crosstalk {xt[i]:.6g})"))
    for i, dev in enumerate(devices):
        plan = plan_tuning(dev, dev.tuning_offset_nm, cost)
        if not plan.feasible:
            out.append(Violation("tuning", i, f"tuning offset {dev.tuning_offset_nm:.6g} nm exceeds EO+TO range {cost.eo_range_nm + cost.to_range_nm:.6g} nm"))
    return out
