"""Schedule traces: the ordered record of device-level events a run emits.

Kernels append events; the perf model turns them into energy and latency.
Traces are append-only and compose by concatenation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional

EVENT_KINDS = (
    "dac_write",
    "adc_read",
    "mr_tune_eo",
    "mr_tune_to",
    "vcsel_emit",
    "bpd_read",
    "soa_pass",
    "mem_read",
    "mem_write",
    "digital_op",
)

TRACE_CSV_HEADER = ("index", "stage", "event_kind", "count", "payload_bits")


@dataclass(frozen=True)
class Event:
    kind: str
    count: int
    payload_bits: int = 0
    stage: str = ""

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.count < 0 or self.payload_bits < 0:
            raise ValueError("event count and payload_bits must be non-negative")


@dataclass(frozen=True)
class StageLatency:
    """Latency of one pipeline step.

    Entries sharing a ``stage`` label with a ``lane`` set run concurrently:
    the stage takes the slowest lane. Entries with ``lane=None`` are serial.
    """

    stage: str
    ns: float
    lane: Optional[int] = None


@dataclass(frozen=True)
class Annotation:
    """Zero-cost bookkeeping record (idle lanes, empty sums, bank usage)."""

    label: str
    count: int = 1
    stage: str = ""


@dataclass
class ScheduleTrace:
    events: list = field(default_factory=list)
    stage_latencies: list = field(default_factory=list)
    annotations: list = field(default_factory=list)
    stage: str = ""

    def emit(self, kind: str, count: int, payload_bits: int = 0, stage: Optional[str] = None):
        if count == 0 and payload_bits == 0:
            return
        self.events.append(Event(kind, int(count), int(payload_bits), self.stage if stage is None else stage))

    def latency(self, ns: float, stage: Optional[str] = None, lane: Optional[int] = None):
        if ns < 0:
            raise ValueError("negative latency")
        self.stage_latencies.append(StageLatency(self.stage if stage is None else stage, float(ns), lane))

    def annotate(self, label: str, count: int = 1, stage: Optional[str] = None):
        self.annotations.append(Annotation(label, int(count), self.stage if stage is None else stage))

    def extend(self, other: "ScheduleTrace") -> "ScheduleTrace":
        self.events.extend(other.events)
        self.stage_latencies.extend(other.stage_latencies)
        self.annotations.extend(other.annotations)
        return self

    def __add__(self, other: "ScheduleTrace") -> "ScheduleTrace":
        return ScheduleTrace(
            self.events + other.events,
            self.stage_latencies + other.stage_latencies,
            self.annotations + other.annotations,
        )

    def __len__(self):
        return len(self.events)

    def count(self, kind: str) -> int:
        return sum(e.count for e in self.events if e.kind == kind)

    def annotation_count(self, label: str) -> int:
        return sum(a.count for a in self.annotations if a.label == label)

    def stages(self) -> list:
        """Stage labels in first-appearance order across events and latencies."""
        seen = {}
        for e in self.events:
            seen.setdefault(e.stage, None)
        for s in self.stage_latencies:
            seen.setdefault(s.stage, None)
        return list(seen)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_CSV_HEADER)
        for i, e in enumerate(self.events):
            w.writerow((i, e.stage, e.kind, e.count, e.payload_bits))
        return buf.getvalue()

    @classmethod
    def from_csv_rows(cls, rows: Iterable[dict]) -> "ScheduleTrace":
        t = cls()
        for r in rows:
            t.events.append(Event(r["event_kind"], int(r["count"]), int(r["payload_bits"]), r["stage"]))
        return t


class stage_scope:
    """Context manager that sets the default stage label of a trace."""

    def __init__(self, trace: Optional[ScheduleTrace], label: str):
        self.trace = trace
        self.label = label
        self._prev = ""

    def __enter__(self):
        if self.trace is not None:
            self._prev = self.trace.stage
            self.trace.stage = self.label
        return self.trace

    def __exit__(self, *exc):
        if self.trace is not None:
            self.trace.stage = self._prev
        return False
