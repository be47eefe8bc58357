"""Discrete-event kernel with a total, deterministic (time, sequence) order."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from ..errors import InvariantViolation

TX_START = "tx-start"
TX_END = "tx-end"
RX_DELIVER = "rx-deliver"
BEACON = "beacon"
MOBILITY_STEP = "mobility-step"
CONSENSUS_EPOCH = "consensus-epoch"
STORAGE_EPOCH = "storage-epoch"
STORAGE_AUDIT = "storage-audit"
METRICS_FLUSH = "metrics-flush"
TRAFFIC_TICK = "traffic-tick"
SELFTX_STEP = "selftx-step"
FLOOD_DELIVER = "flood-deliver"
FETCH_DONE = "fetch-done"


@dataclass(frozen=True)
class Event:
    time_s: float
    sequence: int
    kind: str
    payload: dict = field(default_factory=dict)


class EventKernel:
    """Binary-heap event queue; pops in (time, sequence) order, never schedules
    into the past."""

    def __init__(self) -> None:
        self.now: float = 0.0
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0

    def schedule(self, time_s: float, kind: str, **payload) -> Event:
        if time_s < self.now:
            raise InvariantViolation(
                f"event {kind!r} scheduled at {time_s} before now={self.now}"
            )
        event = Event(time_s=time_s, sequence=self._seq, kind=kind, payload=payload)
        self._seq += 1
        heapq.heappush(self._heap, (time_s, event.sequence, event))
        return event

    def pop(self) -> Event | None:
        if not self._heap:
            return None
        time_s, _, event = heapq.heappop(self._heap)
        self.now = time_s
        return event

    def __len__(self) -> int:
        return len(self._heap)
