"""Circuit evaluation: static resistive solves, quasi-static fixpoints, and
explicit timed RC integration.

Pressures are normalized to [0, 1]. The timed integrator is forward Euler
on dp/dt = sum_j g_ij (p_j - p_i) / c_i with rails and driven nodes clamped
and a hard step-size guard dt <= 0.1 * c_min / g_max, which keeps the update
a convex combination (pressures can never leave [0, 1]).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import OscillationDetected, PneumosError, StabilityError
from .netlist import Netlist, RAIL_PRESSURE


class LogicLevel(enum.Enum):
    ZERO = 0
    ONE = 1
    UNKNOWN = 2


ONE_MIN = 0.7   # p >= ONE_MIN reads as logic 1
ZERO_MAX = 0.3  # p <= ZERO_MAX reads as logic 0


def read_logic(p: float) -> LogicLevel:
    """Memoryless pressure-to-logic readout with a symmetric unknown band."""
    if p >= ONE_MIN:
        return LogicLevel.ONE
    if p <= ZERO_MAX:
        return LogicLevel.ZERO
    return LogicLevel.UNKNOWN


def to_pressure(level) -> float:
    """Accept a LogicLevel, a 0/1 int, or a raw pressure float."""
    if isinstance(level, LogicLevel):
        if level is LogicLevel.UNKNOWN:
            raise PneumosError("cannot drive a node to UNKNOWN")
        return float(level.value)
    p = float(level)
    if not 0.0 <= p <= 1.0:
        raise PneumosError(f"drive pressure {p} outside [0, 1]")
    return p


@dataclass(frozen=True)
class ClockSpec:
    node: str
    period: float
    duty: float = 0.5
    phase: float = 0.0


@dataclass
class Stimulus:
    """Scheduled drives plus periodic clocks.

    ``schedule`` entries are (time, node, value) where value is a pressure
    in [0, 1] or None to release the node. Times must be non-decreasing per
    node; rails may not be driven.
    """
    schedule: list[tuple[float, str, Optional[float]]] = field(default_factory=list)
    clocks: list[ClockSpec] = field(default_factory=list)

    def drive(self, time: float, node: str, value: Optional[float]):
        self.schedule.append((time, node, None if value is None else to_pressure(value)))

    def clock(self, node: str, period: float, duty: float = 0.5, phase: float = 0.0):
        self.clocks.append(ClockSpec(node, period, duty, phase))

    def events_until(self, t_end: float) -> list[tuple[float, str, Optional[float]]]:
        events = list(self.schedule)
        last: dict[str, float] = {}
        for t, node, _ in self.schedule:
            if t < 0:
                raise PneumosError("stimulus times must be >= 0")
            if t < last.get(node, 0.0):
                raise PneumosError(f"stimulus times for {node!r} must be non-decreasing")
            last[node] = t
        for ck in self.clocks:
            if ck.period <= 0 or not 0 < ck.duty < 1:
                raise PneumosError(f"bad clock spec for {ck.node!r}")
            t = ck.phase
            events.append((0.0, ck.node, 0.0))
            while t < t_end:
                events.append((t, ck.node, 1.0))
                events.append((t + ck.period * ck.duty, ck.node, 0.0))
                t += ck.period
        events.sort(key=lambda e: e[0])
        return events


@dataclass(frozen=True)
class LogicEvent:
    time: float
    signal: str
    old: LogicLevel
    new: LogicLevel


@dataclass
class Waveform:
    """Per-step samples of probed pressures and valve states."""
    dt: float
    series: dict[str, np.ndarray]
    valve_series: dict[str, np.ndarray]
    events: list[LogicEvent]

    @property
    def n_samples(self) -> int:
        return next(iter(self.series.values())).shape[0] if self.series else 0

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def logic_at_end(self, signal: str) -> LogicLevel:
        return read_logic(float(self.series[signal][-1]))


class LogicTracker:
    """Hysteretic logic readout for event streams.

    The tracked level switches to ONE at p >= ONE_MIN and to ZERO at
    p <= ZERO_MAX; inside the band the previous definite level is retained,
    so a clean swing produces exactly one event.
    """

    def __init__(self, initial_p: float):
        self.level = read_logic(initial_p)

    def update(self, p: float) -> Optional[tuple[LogicLevel, LogicLevel]]:
        new = read_logic(p)
        if new is LogicLevel.UNKNOWN or new is self.level:
            return None
        old = self.level
        self.level = new
        return (old, new)


def extract_events(dt: float, series: Mapping[str, np.ndarray]) -> list[LogicEvent]:
    events: list[LogicEvent] = []
    for name, samples in series.items():
        tracker = LogicTracker(float(samples[0]))
        for i in range(1, samples.shape[0]):
            change = tracker.update(float(samples[i]))
            if change:
                events.append(LogicEvent(i * dt, name, change[0], change[1]))
    events.sort(key=lambda e: e.time)
    return events


# ---------------------------------------------------------------------------
# Static solve


def solve_static(net: Netlist,
                 valve_states: Mapping[str, bool],
                 driven: Mapping[str, float] | None = None,
                 initial: Mapping[str, float] | None = None,
                 warn: list | None = None) -> dict[str, float]:
    """Steady-state node pressures with the given valve states.

    Fixed nodes are the rails plus any ``driven`` nodes. Floating groups
    with no conductive path to a fixed node settle to the capacitance-
    weighted mean of their ``initial`` pressures (a lone isolated node keeps
    its value); nodes with no initial pressure default to 0.0 and append a
    note to ``warn`` if provided.
    """
    driven = dict(driven or {})
    initial = dict(initial or {})
    ids = [n.id for n in net.nodes]
    index = {nid: i for i, nid in enumerate(ids)}
    n = len(ids)

    fixed = np.zeros(n, dtype=bool)
    value = np.zeros(n)
    for node in net.nodes:
        i = index[node.id]
        if node.rail is not None:
            fixed[i] = True
            value[i] = RAIL_PRESSURE[node.rail]
        elif node.id in initial:
            value[i] = to_pressure(initial[node.id])
    for nid, p in driven.items():
        i = index[nid]
        if net.node(nid).rail is not None:
            raise PneumosError(f"cannot drive rail {nid!r}")
        fixed[i] = True
        value[i] = to_pressure(p)

    edges: list[tuple[int, int, float]] = []
    for ch in net.channels:
        edges.append((index[ch.a], index[ch.b], ch.conductance))
    for v in net.valves:
        if valve_states.get(v.id, v.initial_open):
            edges.append((index[v.source], index[v.drain], v.g_open))

    adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for i, j, g in edges:
        adj[i].append((j, g))
        adj[j].append((i, g))

    # Connected components over active edges; solve each against its fixed
    # boundary, or average a floating group by capacitance.
    caps = np.array([net.nodes[i].capacitance if not fixed[i] else 0.0 for i in range(n)])
    seen = np.zeros(n, dtype=bool)
    result = value.copy()
    for start in range(n):
        if seen[start] or fixed[start]:
            continue
        comp = []
        stack = [start]
        seen[start] = True
        boundary_touch = False
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nxt, _ in adj[cur]:
                if fixed[nxt]:
                    boundary_touch = True
                elif not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        if not boundary_touch:
            if len(comp) == 1 and not adj[comp[0]]:
                # Truly isolated node: keeps its initial pressure.
                nid = ids[comp[0]]
                if nid not in initial and warn is not None:
                    warn.append(f"isolated node {nid!r} has no initial pressure; using 0.0")
                continue
            total_c = caps[comp].sum()
            mean = float((caps[comp] * value[comp]).sum() / total_c)
            result[comp] = mean
            continue
        sub = {nid: k for k, nid in enumerate(comp)}
        m = len(comp)
        G = np.zeros((m, m))
        rhs = np.zeros(m)
        for k, i in enumerate(comp):
            for j, g in adj[i]:
                G[k, k] += g
                if j in sub:
                    G[k, sub[j]] -= g
                else:  # fixed neighbor
                    rhs[k] += g * value[j]
        result[comp] = np.linalg.solve(G, rhs)

    # Clamp out sub-epsilon overshoot from the linear solve; pressures are
    # physically confined to the rail span.
    result = np.clip(result, 0.0, 1.0)
    return {ids[i]: float(result[i]) for i in range(n)}


# ---------------------------------------------------------------------------
# Quasi-static fixpoint


@dataclass
class QuasistaticResult:
    pressures: dict[str, float]
    valve_states: dict[str, bool]
    iterations: int

    def logic(self, node: str) -> LogicLevel:
        return read_logic(self.pressures[node])


def run_quasistatic(net: Netlist,
                    inputs: Mapping[str, object],
                    initial: Mapping[str, float] | None = None) -> QuasistaticResult:
    """Alternate static solves with single-threshold valve updates.

    No hysteresis in this mode: a valve is open iff its gate pressure is at
    or above theta_open, so combinational truth tables do not depend on the
    hysteresis gap. Raises :class:`OscillationDetected` (with the repeating
    valve-state cycle) if no fixpoint exists.
    """
    driven = {node: to_pressure(v) for node, v in inputs.items()}
    prev = dict(initial or {})
    states = {v.id: v.initial_open for v in net.valves}
    history: list[dict[str, bool]] = [dict(states)]
    limit = 2 * len(net.valves) + 4
    for iteration in range(1, limit + 1):
        pressures = solve_static(net, states, driven=driven, initial=prev)
        prev = pressures
        new_states = {v.id: pressures[v.gate] >= v.theta_open for v in net.valves}
        if new_states == states:
            return QuasistaticResult(pressures, new_states, iteration)
        if new_states in history:
            cycle = history[history.index(new_states):]
            raise OscillationDetected(cycle)
        history.append(dict(new_states))
        states = new_states
    raise OscillationDetected(history[1:])


def truth_table_inputs(bits: int) -> list[tuple[int, ...]]:
    return [tuple((k >> (bits - 1 - i)) & 1 for i in range(bits)) for k in range(2 ** bits)]


# ---------------------------------------------------------------------------
# Timed integration


class TimedSimulation:
    """Incremental forward-Euler session over one netlist.

    Owns mutable state (pressures, valve states, drives); advance with
    :meth:`step` or :meth:`run_until`. Identical construction and identical
    call sequences give bit-identical trajectories.
    """

    def __init__(self, net: Netlist, dt: float,
                 initial: Mapping[str, float] | None = None,
                 record: Sequence[str] | None = None,
                 recording: bool = True):
        self.net = net
        self.dt = float(dt)
        ids = [n.id for n in net.nodes]
        self.index = {nid: i for i, nid in enumerate(ids)}
        self.ids = ids
        n = len(ids)

        g_max = max([ch.conductance for ch in net.channels] +
                    [v.g_open for v in net.valves], default=1.0)
        c_min = min([nd.capacitance for nd in net.nodes if nd.rail is None], default=1.0)
        limit = 0.1 * c_min / g_max
        if self.dt > limit * (1 + 1e-12):
            raise StabilityError(
                f"dt={dt} exceeds stability guard 0.1*c_min/g_max={limit:.3e}")

        self.cap = np.array([nd.capacitance for nd in net.nodes])
        self.fixed = np.zeros(n, dtype=bool)
        self.p = np.zeros(n)
        for nd in net.nodes:
            i = self.index[nd.id]
            if nd.rail is not None:
                self.fixed[i] = True
                self.p[i] = RAIL_PRESSURE[nd.rail]
        for nid, val in (initial or {}).items():
            self.p[self.index[nid]] = to_pressure(val)

        self.driven: dict[int, float] = {}
        self.valves = list(net.valves)
        self.v_gate = np.array([self.index[v.gate] for v in self.valves], dtype=int)
        self.v_src = np.array([self.index[v.source] for v in self.valves], dtype=int)
        self.v_drn = np.array([self.index[v.drain] for v in self.valves], dtype=int)
        self.v_g = np.array([v.g_open for v in self.valves])
        self.v_topen = np.array([v.theta_open for v in self.valves])
        self.v_tclose = np.array([v.theta_close for v in self.valves])
        self.v_open = np.array([v.initial_open for v in self.valves], dtype=bool)
        # A declared-closed valve whose gate starts above threshold opens on
        # the first update anyway; settle it now for consistency.
        if len(self.valves):
            gates = self.p[self.v_gate]
            self.v_open = np.where(self.v_open, gates > self.v_tclose,
                                   gates >= self.v_topen)

        self._chan_edges = [(self.index[ch.a], self.index[ch.b], ch.conductance)
                            for ch in net.channels]
        self._A = np.zeros((n, n))
        self._rebuild()

        self.time = 0.0
        self.step_count = 0
        if record is None:
            record = [p.ref for p in net.probes if p.kind == "node"]
        self.record_nodes = list(record)
        self.record_valves = [p.ref for p in net.probes if p.kind == "valve"]
        self._rec_idx = np.array([self.index[r] for r in self.record_nodes], dtype=int)
        self._v_by_id = {v.id: k for k, v in enumerate(self.valves)}
        self._rec_vidx = np.array([self._v_by_id[r] for r in self.record_valves], dtype=int)
        self._samples: list[np.ndarray] = []
        self._vsamples: list[np.ndarray] = []
        self.recording = recording
        self._sample()

    def _rebuild(self):
        A = self._A
        A[:] = 0.0
        for i, j, g in self._chan_edges:
            A[i, i] -= g
            A[i, j] += g
            A[j, j] -= g
            A[j, i] += g
        if len(self.valves):
            open_idx = np.nonzero(self.v_open)[0]
            for k in open_idx:
                i, j, g = self.v_src[k], self.v_drn[k], self.v_g[k]
                A[i, i] -= g
                A[i, j] += g
                A[j, j] -= g
                A[j, i] += g
        A /= self.cap[:, None]
        A[self.fixed] = 0.0
        for i in self.driven:
            A[i] = 0.0

    def save_state(self) -> tuple:
        return (self.p.copy(), self.v_open.copy(), dict(self.driven),
                self.time, self.step_count)

    def restore_state(self, state: tuple):
        p, v_open, driven, time, step_count = state
        self.p = p.copy()
        self.v_open = v_open.copy()
        self.driven = dict(driven)
        self.time = time
        self.step_count = step_count
        self._rebuild()

    def drive(self, node: str, value: Optional[float]):
        """Clamp a node to a pressure, or release it (value=None)."""
        i = self.index[node]
        if self.net.nodes[i].rail is not None:
            raise PneumosError(f"cannot drive rail {node!r}")
        if value is None:
            self.driven.pop(i, None)
        else:
            self.driven[i] = to_pressure(value)
            self.p[i] = self.driven[i]
        self._rebuild()

    def _sample(self):
        if self.recording:
            self._samples.append(self.p[self._rec_idx].copy())
            self._vsamples.append(self.v_open[self._rec_vidx].copy())

    def step(self, n: int = 1):
        dt = self.dt
        p = self.p
        for _ in range(n):
            p += dt * (self._A @ p)
            if len(self.valves):
                gates = p[self.v_gate]
                new_open = np.where(self.v_open, gates > self.v_tclose,
                                    gates >= self.v_topen)
                if not np.array_equal(new_open, self.v_open):
                    self.v_open = new_open
                    self._rebuild()
            self.step_count += 1
            self.time = self.step_count * dt
            self._sample()

    def run_until(self, t: float):
        target = int(round(t / self.dt))
        if target > self.step_count:
            self.step(target - self.step_count)

    def pressure(self, node: str) -> float:
        return float(self.p[self.index[node]])

    def logic(self, node: str) -> LogicLevel:
        return read_logic(self.pressure(node))

    def valve_open(self, valve_id: str) -> bool:
        return bool(self.v_open[self._v_by_id[valve_id]])

    def valve_states(self) -> dict[str, bool]:
        return {v.id: bool(self.v_open[k]) for k, v in enumerate(self.valves)}

    def waveform(self) -> Waveform:
        series = {}
        if self._samples:
            stacked = np.vstack(self._samples)
            for col, name in enumerate(self.record_nodes):
                series[name] = stacked[:, col]
        vseries = {}
        if self._vsamples:
            vstacked = np.vstack(self._vsamples)
            for col, name in enumerate(self.record_valves):
                vseries[name] = vstacked[:, col]
        return Waveform(self.dt, series, vseries, extract_events(self.dt, series))


def run_timed(net: Netlist, stim: Stimulus, t_end: float, dt: float,
              initial: Mapping[str, float] | None = None,
              record: Sequence[str] | None = None) -> Waveform:
    """Integrate the netlist under a stimulus and return the sampled waveform."""
    sim = TimedSimulation(net, dt, initial=initial, record=record)
    events = stim.events_until(t_end)
    for t, node, value in events:
        sim.run_until(min(t, t_end))
        if t > t_end:
            break
        sim.drive(node, value)
    sim.run_until(t_end)
    return sim.waveform()
