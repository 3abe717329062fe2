"""Device cost table: per-event energies, tuning parameters, memory costs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

from .trace import EVENT_KINDS


@dataclass(frozen=True)
class EventCost:
    energy_pj: float = 0.0
    energy_fj_per_bit: float = 0.0

    def __post_init__(self):
        if self.energy_pj < 0 or self.energy_fj_per_bit < 0:
            raise ValueError("event energies must be non-negative")

    def energy(self, count: int, payload_bits: int) -> float:
        """Energy in pJ for ``count`` events carrying ``payload_bits`` bits."""
        return count * self.energy_pj + payload_bits * self.energy_fj_per_bit / 1000.0


@dataclass(frozen=True)
class CostTable:
    events: Mapping[str, EventCost] = field(default_factory=dict)
    modulation_rate_ghz: float = 50.0
    link_energy_fj_per_bit: float = 70.0
    eo_range_nm: float = 0.5
    to_range_nm: float = 9.0
    eo_energy_pj_per_nm: float = 0.1
    eo_latency_ns: float = 0.02
    to_energy_pj_per_nm: float = 27.5
    to_latency_ns: float = 4000.0
    ted_discount: float = 0.5

    def __post_init__(self):
        scalars = (
            self.modulation_rate_ghz, self.link_energy_fj_per_bit, self.eo_range_nm,
            self.to_range_nm, self.eo_energy_pj_per_nm, self.eo_latency_ns,
            self.to_energy_pj_per_nm, self.to_latency_ns,
        )
        if any(v < 0 for v in scalars):
            raise ValueError("cost table entries must be non-negative")
        if self.modulation_rate_ghz <= 0:
            raise ValueError("modulation_rate_ghz must be positive")
        if not 0 < self.ted_discount <= 1:
            raise ValueError("ted_discount must lie in (0, 1]")

    def missing_kinds(self) -> list:
        return [k for k in EVENT_KINDS if k not in self.events]

    def cost_of(self, kind: str) -> EventCost:
        try:
            return self.events[kind]
        except KeyError:
            raise KeyError(f"cost table has no entry for event kind {kind!r}") from None

    def scaled(self, factor: float) -> "CostTable":
        """Copy with every per-event energy multiplied by ``factor``."""
        ev = {k: EventCost(c.energy_pj * factor, c.energy_fj_per_bit * factor) for k, c in self.events.items()}
        return replace(self, events=ev)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["events"] = {k: asdict(v) for k, v in sorted(self.events.items())}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CostTable":
        d = {k: v for k, v in d.items() if not k.startswith("_")}
        events = {}
        for kind, entry in d.pop("events", {}).items():
            if kind not in EVENT_KINDS:
                raise ValueError(f"events.{kind}: unknown event kind")
            entry = {k: v for k, v in entry.items() if not k.startswith("_")}
            events[kind] = EventCost(**entry)
        unknown = set(d) - {f for f in cls.__dataclass_fields__ if f != "events"}
        if unknown:
            raise ValueError(f"unknown cost table fields: {sorted(unknown)}")
        return cls(events=events, **d)


def load_cost_table(path=None) -> CostTable:
    """Load a cost table JSON; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("photonic_accel.data").joinpath("default_cost.json").read_text()
    else:
        text = Path(path).read_text()
    return CostTable.from_dict(json.loads(text))


def default_cost_table() -> CostTable:
    return load_cost_table(None)
