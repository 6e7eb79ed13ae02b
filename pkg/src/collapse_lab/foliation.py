"""The preferred foliation: a global event order and one stochastic source.

Every stochastic reduction in a run draws from a single counter-based
stream, consumed strictly in schedule order.  Ensembles split the master
seed into per-run substreams keyed by (master_seed, run_index), so results
are bit-reproducible regardless of how runs are distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import CausalityError, InputError

_CHUNK = 4096

EVENT_KINDS = ("unitary", "reduction", "measurement")


class GlobalStream:
    """Sequential uniform draws from one Philox counter-based substream.

    The logical draw sequence depends only on (master_seed, stream_index)
    and on how many draws have been consumed; internal buffering never
    changes it.  `peek`/`advance` let hot loops prefetch without consuming.
    """

    def __init__(self, master_seed: int, stream_index: int = 0):
        if not 0 <= int(master_seed) < 2**64:
            raise InputError("master seed must fit in an unsigned 64-bit integer")
        if not 0 <= int(stream_index) < 2**64:
            raise InputError("stream index must fit in an unsigned 64-bit integer")
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        self._gen = np.random.Generator(
            np.random.Philox(key=np.array([self.master_seed, self.stream_index], dtype=np.uint64))
        )
        self._buf = np.empty(0)
        self._pos = 0
        self.counter = 0  # uniforms consumed so far

    def substream(self, run_index: int) -> "GlobalStream":
        """Independent stream for one ensemble run, keyed (master_seed, run_index + 1)."""
        if run_index < 0:
            raise InputError("run index cannot be negative")
        return GlobalStream(self.master_seed, run_index + 1)

    def _available(self) -> int:
        return self._buf.size - self._pos

    def _ensure(self, k: int) -> None:
        short = k - self._available()
        if short > 0:
            fresh = self._gen.random(max(short, _CHUNK))
            self._buf = np.concatenate([self._buf[self._pos:], fresh])
            self._pos = 0

    def peek(self, k: int) -> np.ndarray:
        """Next k uniforms without consuming them."""
        self._ensure(k)
        return self._buf[self._pos : self._pos + k]

    def advance(self, k: int) -> None:
        """Consume k previously peeked uniforms."""
        if k < 0 or k > self._available():
            raise InputError("cannot advance past the peeked horizon")
        self._pos += k
        self.counter += k

    def draw_uniform(self) -> float:
        self._ensure(1)
        value = float(self._buf[self._pos])
        self._pos += 1
        self.counter += 1
        return value

    def draw_bit(self) -> bool:
        """Fair binary draw: True means transfer toward the interacting branch."""
        return self.draw_uniform() < 0.5


@dataclass(frozen=True, eq=False)
class EventRecord:
    """One globally ordered event on the foliation."""

    time: float
    site: int
    kind: str
    payload: Any = None
    spacelike_group: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InputError(f"event kind must be one of {EVENT_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.time):
            raise InputError("event time must be finite")


@dataclass(frozen=True, eq=False)
class FoliationSchedule:
    """Events sorted by (time, site) with optional happens-before edges.

    Dependencies are (earlier, later) index pairs into the sorted order and
    must agree with it; they mark causal links that any reordering has to
    respect.
    """

    events: tuple[EventRecord, ...]
    dependencies: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        ordering = sorted(range(len(self.events)), key=lambda i: self._key(self.events[i]))
        events = tuple(self.events[i] for i in ordering)
        rank = {old: new for new, old in enumerate(ordering)}
        deps = frozenset((rank[i], rank[j]) for i, j in self.dependencies)
        for i, j in deps:
            if not (0 <= i < len(events) and 0 <= j < len(events)):
                raise InputError(f"dependency ({i}, {j}) references a missing event")
            if self._key(events[i]) >= self._key(events[j]):
                raise CausalityError(
                    f"dependency ({i}, {j}) contradicts the schedule order"
                )
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "dependencies", deps)

    @staticmethod
    def _key(event: EventRecord) -> tuple[float, int]:
        return (event.time, event.site)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def measurement_order(self) -> tuple[int, ...]:
        """Sites of measurement events in foliation order."""
        return tuple(e.site for e in self.events if e.kind == "measurement")


def reorder_schedule(sched: FoliationSchedule, perm: Mapping[int, int]) -> FoliationSchedule:
    """Permute the global times of a set of mutually spacelike events.

    `perm` maps sorted-order indices to sorted-order indices; each permuted
    event takes the time of its image.  All permuted events must carry the
    same spacelike tag and no dependency edge may touch two of them; any
    dependency broken by the new times raises CausalityError.
    """
    keys = set(perm.keys())
    values = set(perm.values())
    if keys != values:
        raise InputError("permutation must map a set of event indices onto itself")
    for i in keys:
        if not 0 <= i < len(sched.events):
            raise InputError(f"event index {i} out of range")
    groups = {sched.events[i].spacelike_group for i in keys}
    if keys and (None in groups or len(groups) > 1):
        raise CausalityError(
            "permuted events must share a mutually-spacelike tag"
        )
    for i, j in sched.dependencies:
        if i in keys and j in keys:
            raise CausalityError(
                f"events {i} and {j} are causally linked and cannot be reordered"
            )

    new_times = {i: sched.events[perm[i]].time for i in keys}
    moved = []
    for idx, event in enumerate(sched.events):
        if idx in keys and new_times[idx] != event.time:
            moved.append(
                EventRecord(
                    time=new_times[idx],
                    site=event.site,
                    kind=event.kind,
                    payload=event.payload,
                    spacelike_group=event.spacelike_group,
                )
            )
        else:
            moved.append(event)

    # Dependencies follow their events through the re-sort.
    order = sorted(range(len(moved)), key=lambda i: (moved[i].time, moved[i].site, i))
    rank = {old: new for new, old in enumerate(order)}
    events = tuple(moved[i] for i in order)
    deps = set()
    for i, j in sched.dependencies:
        ni, nj = rank[i], rank[j]
        if (events[ni].time, events[ni].site) >= (events[nj].time, events[nj].site):
            raise CausalityError(
                f"reordering would place event {nj} before its cause {ni}"
            )
        deps.add((ni, nj))
    return FoliationSchedule(events=events, dependencies=frozenset(deps))


def two_measurement_schedule(order: str = "ab") -> FoliationSchedule:
    """Two mutually spacelike measurement events at sites 0 (A) and 1 (B)."""
    if order not in ("ab", "ba"):
        raise InputError("order must be 'ab' or 'ba'")
    t_a, t_b = (1.0, 2.0) if order == "ab" else (2.0, 1.0)
    return FoliationSchedule(
        events=(
            EventRecord(time=t_a, site=0, kind="measurement", spacelike_group="pair"),
            EventRecord(time=t_b, site=1, kind="measurement", spacelike_group="pair"),
        )
    )
