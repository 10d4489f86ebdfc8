"""Simplified liquid-handling plants driven by simulated controller signals.

Two plants are modeled. The rotary mixer is a closed ring treated as an
ordered train of plug-flow segments: fill states inject reservoir fluid at
the inlet and discard displaced fluid from the far end; the mixing state
relaxes the ring linearly to its volume-weighted mean, reaching uniform
after ``n_mix`` pump cycles. The dilution ladder is a row of equal-volume
compartments pairwise averaged by one-hot control lines, with an explicit
refill ledger so solute is conserved to accounting precision.

:class:`EmbeddedSession` closes the loop: the controller netlist (register,
programmed logic array, ring-oscillator pump, optional push button) runs in
the timed engine and its sampled logic outputs gate the plant.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .config import DEFAULTS, Params
from .engine import LogicLevel, LogicTracker, TimedSimulation
from .errors import FluidicsError
from .netlist import NetlistBuilder, merge
from . import fsmc, stdcells

Composition = dict[str, float]


def _blend(parts: Sequence[tuple[float, Composition]]) -> Composition:
    total = sum(vol for vol, _ in parts)
    out: Composition = {}
    for vol, comp in parts:
        for label, frac in comp.items():
            out[label] = out.get(label, 0.0) + frac * vol / total
    return out


@dataclass
class Compartment:
    id: str
    volume: float
    composition: Composition

    def __post_init__(self):
        if self.volume <= 0:
            raise FluidicsError(f"compartment {self.id!r}: volume must be > 0")
        if any(f < -1e-12 for f in self.composition.values()):
            raise FluidicsError(f"compartment {self.id!r}: negative fraction")
        total = sum(self.composition.values())
        if abs(total - 1.0) > 1e-9:
            raise FluidicsError(
                f"compartment {self.id!r}: fractions sum to {total}, not 1")

    def fraction(self, label: str) -> float:
        return self.composition.get(label, 0.0)


# ---------------------------------------------------------------------------
# Peristaltic pump phase detection


class PumpPhaseDetector:
    """Counts completed three-phase peristaltic cycles.

    A cycle completes when the three phase signals rise once each in cyclic
    order; an out-of-order rising edge restarts the sequence, so frozen or
    scrambled phases displace nothing.
    """

    def __init__(self, initial: Sequence[LogicLevel] = (LogicLevel.ZERO,) * 3):
        self._trackers = [LogicTracker(1.0 if lv is LogicLevel.ONE else 0.0)
                          for lv in initial]
        self._expect: Optional[int] = None
        self._run = 0
        self.cycles = 0

    def feed_levels(self, levels: Sequence[LogicLevel]) -> int:
        """Advance one sample; returns cycles completed at this sample."""
        pressures = [1.0 if lv is LogicLevel.ONE else
                     0.0 if lv is LogicLevel.ZERO else 0.5 for lv in levels]
        return self.feed(pressures)

    def feed(self, pressures: Sequence[float]) -> int:
        completed = 0
        for i, p in enumerate(pressures):
            change = self._trackers[i].update(p)
            if change and change[1] is LogicLevel.ONE:  # rising edge of phase i
                if self._expect is None or i == self._expect:
                    self._run += 1
                    self._expect = (i + 1) % 3
                    if self._run == 3:
                        completed += 1
                        self.cycles += 1
                        self._run = 0
                else:
                    self._run = 1
                    self._expect = (i + 1) % 3
        return completed


def pump_step(phase_history: Sequence[Sequence[LogicLevel]],
              q: float = DEFAULTS.pump_quantum) -> float:
    """Displaced volume for a sampled 3-phase history: q per completed cycle."""
    if not phase_history:
        return 0.0
    det = PumpPhaseDetector(phase_history[0])
    for sample in phase_history[1:]:
        det.feed_levels(sample)
    return det.cycles * q


# ---------------------------------------------------------------------------
# Rotary mixer

MIXER_STATES = ("10", "11", "01", "00")
START_LABEL = "start"


@dataclass(frozen=True)
class MixerTopology:
    ring_volume: float = 1.0
    pump_quantum: float = DEFAULTS.pump_quantum  # ring-volume fraction per cycle
    n_mix: int = DEFAULTS.n_mix
    reservoirs: tuple[str, str] = ("R1", "R2")


class RotaryMixer:
    """Plug-flow ring: a train of (volume, composition) segments from the
    inlet to the outlet. Displaced fluid leaves at the outlet end, so the
    oldest contents are pushed out first."""

    def __init__(self, topo: MixerTopology = MixerTopology()):
        self.topo = topo
        self.plugs: list[tuple[float, Composition]] = [
            (topo.ring_volume, {START_LABEL: 1.0})]
        self._mix_base: Optional[list[tuple[float, Composition]]] = None
        self._mix_cycles = 0

    def _trim(self, plugs: list[tuple[float, Composition]],
              target: float) -> list[tuple[float, Composition]]:
        out = []
        remaining = target
        for vol, comp in plugs:
            if remaining <= 1e-15:
                break
            take = min(vol, remaining)
            out.append((take, comp))
            remaining -= take
        return out

    def _invalidate_mix(self):
        self._mix_base = None
        self._mix_cycles = 0

    def inject(self, source: str, volume: float):
        """Push reservoir fluid in at the inlet, discarding from the outlet."""
        if volume <= 0:
            return
        self._invalidate_mix()
        plugs = [(volume, {source: 1.0})] + self.plugs
        self.plugs = self._trim(plugs, self.topo.ring_volume)

    def inject_left(self, source: str, volume: float):
        """Fill only the inlet-side half; the far half is untouched."""
        if volume <= 0:
            return
        self._invalidate_mix()
        half = self.topo.ring_volume / 2
        left = self._trim(self.plugs, half)
        right = self._right_half()
        left = self._trim([(min(volume, half), {source: 1.0})] + left, half)
        self.plugs = left + right

    def _right_half(self) -> list[tuple[float, Composition]]:
        half = self.topo.ring_volume / 2
        out, acc = [], 0.0
        for vol, comp in self.plugs:
            start = acc
            acc += vol
            if acc <= half + 1e-15:
                continue
            take = acc - max(start, half)
            out.append((take, comp))
        return out

    def circulate(self, cycles: int):
        """Relax toward the volume-weighted mean; uniform after n_mix cycles."""
        if cycles <= 0:
            return
        if self._mix_base is None:
            self._mix_base = list(self.plugs)
            self._mix_cycles = 0
        self._mix_cycles += cycles
        frac = min(1.0, self._mix_cycles / self.topo.n_mix)
        mean = _blend(self._mix_base)
        if frac >= 1.0:
            self.plugs = [(self.topo.ring_volume, mean)]
            return
        new = []
        for vol, comp in self._mix_base:
            labels = set(comp) | set(mean)
            new.append((vol, {lb: (1 - frac) * comp.get(lb, 0.0) + frac * mean[lb]
                              for lb in labels}))
        self.plugs = new

    def composition(self) -> Composition:
        return _blend(self.plugs)

    def fraction(self, label: str) -> float:
        return self.composition().get(label, 0.0)

    def halves(self) -> tuple[Compartment, Compartment]:
        half = self.topo.ring_volume / 2
        left = self._trim(self.plugs, half)
        return (Compartment("left", half, _blend(left)),
                Compartment("right", half, _blend(self._right_half())))


def mixer_step(mixer: RotaryMixer, fsm_state: str, cycles: int) -> RotaryMixer:
    """Apply one controller state for a number of completed pump cycles."""
    if fsm_state not in MIXER_STATES:
        raise FluidicsError(f"invalid mixer state code {fsm_state!r}")
    volume = cycles * mixer.topo.pump_quantum * mixer.topo.ring_volume
    r1, r2 = mixer.topo.reservoirs
    if fsm_state == "10":
        mixer.inject(r1, volume)
    elif fsm_state == "11":
        mixer.inject_left(r2, volume)
    elif fsm_state == "01":
        mixer.inject(r2, volume)
    else:  # 00: sealed, circulate and homogenize
        mixer.circulate(cycles)
    return mixer


# ---------------------------------------------------------------------------
# Dilution ladder

SAMPLE = "sample"
DILUENT = "diluent"


@dataclass(frozen=True)
class LadderTopology:
    num_rungs: int = 5          # control line k joins rungs k and k+1
    rung_volume: float = 1.0
    n_mix: int = DEFAULTS.n_mix

    @property
    def num_lines(self) -> int:
        return self.num_rungs - 1


class DilutionLadder:
    """Rung compartments plus a refill ledger for exact mass accounting."""

    def __init__(self, topo: LadderTopology = LadderTopology()):
        self.topo = topo
        self.rungs = [Compartment(f"rung{k}", topo.rung_volume,
                                  {SAMPLE: 1.0} if k == 0 else {DILUENT: 1.0})
                      for k in range(topo.num_rungs)]
        self.refill_input: dict[str, float] = {}
        self._initial_solute = self.total_solute()

    def concentrations(self) -> list[float]:
        return [r.fraction(SAMPLE) for r in self.rungs]

    def total_solute(self) -> float:
        return sum(r.fraction(SAMPLE) * r.volume for r in self.rungs)

    def mass_error(self) -> float:
        """Solute in rungs minus (initial + refills); 0 when books balance."""
        return self.total_solute() - self._initial_solute - \
            self.refill_input.get(SAMPLE, 0.0)

    def dilute(self, k: int):
        if not 0 <= k < self.topo.num_lines:
            raise FluidicsError(f"no control line {k}")
        a, b = self.rungs[k], self.rungs[k + 1]
        mean = _blend([(a.volume, a.composition), (b.volume, b.composition)])
        self.rungs[k] = Compartment(a.id, a.volume, dict(mean))
        self.rungs[k + 1] = Compartment(b.id, b.volume, dict(mean))

    def refill(self, k: int, composition: Composition):
        """Top rung k back up to ``composition``, ledgering the solute moved."""
        old = self.rungs[k]
        delta = (composition.get(SAMPLE, 0.0) - old.fraction(SAMPLE)) * old.volume
        self.refill_input[SAMPLE] = self.refill_input.get(SAMPLE, 0.0) + delta
        self.rungs[k] = Compartment(old.id, old.volume, dict(composition))


def dilute_step(ladder: DilutionLadder, lines: Sequence[object],
                cycles: int) -> DilutionLadder:
    """One dilution stage. ``lines`` are the four control-line logic levels;
    exactly one may be active. Requires enough pump cycles for complete
    mixing, after which the pair sits at its volume-weighted mean."""
    active = [i for i, lv in enumerate(lines) if _is_active(lv)]
    if len(active) != 1:
        raise FluidicsError(
            f"one-hot violation: {len(active)} control lines active")
    if cycles < ladder.topo.n_mix:
        raise FluidicsError(
            f"incomplete mixing: {cycles} cycles < n_mix={ladder.topo.n_mix}")
    ladder.dilute(active[0])
    return ladder


def _is_active(level: object) -> bool:
    if isinstance(level, LogicLevel):
        return level is LogicLevel.ONE
    return bool(level)


def run_dilution_protocol(ladder: DilutionLadder,
                          cycles_per_stage: Optional[int] = None) -> DilutionLadder:
    """Reference ladder protocol without the valve-level controller.

    Stage k averages rungs k and k+1, then the upstream rung is topped back
    to its pre-stage composition (rung 0 from the sample reservoir; later
    rungs model the preserved-series dead-end refill). Every refill is
    ledgered, so :meth:`DilutionLadder.mass_error` stays at 0.
    """
    cycles = ladder.topo.n_mix if cycles_per_stage is None else cycles_per_stage
    for k in range(ladder.topo.num_lines):
        pre = dict(ladder.rungs[k].composition)
        lines = [i == k for i in range(ladder.topo.num_lines)]
        dilute_step(ladder, lines, cycles)
        ladder.refill(k, pre)
    return ladder


# ---------------------------------------------------------------------------
# Embedded co-simulation

RING_STAGES = 5
RING_TAPS = (0, 2, 4)


@dataclass
class HistoryRow:
    cycle: int
    compartment: str
    source: str
    fraction: float


def history_tsv(rows: Sequence[HistoryRow]) -> str:
    lines = ["cycle\tcompartment\tsource\tfraction"]
    for r in rows:
        lines.append(f"{r.cycle}\t{r.compartment}\t{r.source}\t{r.fraction:.9f}")
    return "\n".join(lines) + "\n"


class EmbeddedSession:
    """Valve-level controller plus plant, advanced on a fixed tick grid.

    One tick is ``tick`` simulated time units (an integer number of engine
    steps), the unit used by both the command-line demos and the panel
    service, so scripted runs replay identically through either surface.
    """

    # The mixer pump runs slow (heavier ring stages) so a quick press/release
    # pair fits between cycle completions; the dilution pump only needs to
    # accumulate cycles, so it runs at the default speed.
    MIXER_RING_CAP = 2.0

    def __init__(self, profile: str, params: Params = DEFAULTS,
                 dt: Optional[float] = None, tick: float = 0.1):
        if profile not in ("mixer", "dilution"):
            raise FluidicsError(f"unknown chip profile {profile!r}")
        self.profile = profile
        self.params = params
        self.dt = params.dt if dt is None else dt
        self.tick_units = tick
        self.steps_per_tick = max(1, int(round(tick / self.dt)))
        self.ticks = 0

        program_name = "mixer_cycle" if profile == "mixer" else "dilution_counter"
        self.program = fsmc.compile_program(_program_source(program_name))
        with_button = profile == "mixer"
        chip, self.ports = fsmc.build_chip(self.program.pattern, params,
                                           with_button=with_button)

        osc = NetlistBuilder()
        osc.rails()
        ring_params = params
        if profile == "mixer":
            ring_params = dataclasses.replace(params, cap=self.MIXER_RING_CAP * params.cap)
        stages = stdcells.ring_oscillator(osc, RING_STAGES, "ring", p=ring_params)
        for s in stages:
            osc.probe_node(s)
        self.net = merge(chip, osc.build(), "osc.")
        self.tap_nodes = [f"osc.{stages[i]}" for i in RING_TAPS]
        ring_init = {f"osc.{node}": v for node, v in
                     stdcells.ring_initial_pressures(stages).items()}

        initial_state = self.program.diagram.initial
        init = fsmc.state_initial_pressures(self.ports, initial_state)
        init.update(ring_init)
        self.sim = TimedSimulation(self.net, self.dt, initial=init, recording=False)
        self.sim.drive(self.ports.a, 0.0)
        if with_button:
            self.button_covered = False
            self.sim.drive(self.ports.button_ctl, stdcells.BUTTON_UNCOVERED)
        else:
            self.button_covered = None
            self.sim.drive(self.ports.clk, 0.0)

        self.detector = PumpPhaseDetector(
            [self.sim.logic(n) for n in self.tap_nodes])
        self.fsm_state = initial_state
        self.history: list[HistoryRow] = []
        self.pump_cycles = 0

        if profile == "mixer":
            self.plant: object = RotaryMixer(MixerTopology(
                pump_quantum=params.pump_quantum, n_mix=params.n_mix))
        else:
            self.plant = DilutionLadder(LadderTopology(n_mix=params.n_mix))
            self._stage_cycles = 0
            self._stages_done = 0
        # Let the controller settle before anything is gated.
        self._settle()

    def _settle(self):
        settle_ticks = int(round(fsmc.SETTLE_TIME / self.tick_units))
        for _ in range(settle_ticks):
            self.sim.step(self.steps_per_tick)
        self.detector = PumpPhaseDetector(
            [self.sim.logic(n) for n in self.tap_nodes])

    # -- button (mixer profile) --

    def press_button(self):
        if self.button_covered is None:
            raise FluidicsError("no button on chip")
        self.button_covered = True
        self.sim.drive(self.ports.button_ctl, stdcells.BUTTON_COVERED)

    def release_button(self):
        if self.button_covered is None:
            raise FluidicsError("no button on chip")
        self.button_covered = False
        self.sim.drive(self.ports.button_ctl, stdcells.BUTTON_UNCOVERED)

    # -- dilution auto-clock --

    def pulse_clock(self):
        """Drive one full clock pulse through the register (dilution chip)."""
        if self.button_covered is not None:
            raise FluidicsError("clock is button-driven on this chip")
        half = int(round(fsmc.VERIFY_PERIOD / 2 / self.dt))
        self.sim.drive(self.ports.clk, 1.0)
        self._advance_steps(half)
        self.sim.drive(self.ports.clk, 0.0)
        self._advance_steps(half)

    def _advance_steps(self, steps: int):
        # Advance in tick-sized slices so pump sampling stays on the grid.
        while steps > 0:
            chunk = min(steps, self.steps_per_tick)
            self.sim.step(chunk)
            steps -= chunk
            self._after_slice()

    def tick(self, n: int = 1):
        for _ in range(n):
            self.sim.step(self.steps_per_tick)
            self.ticks += 1
            self._after_slice()

    def _after_slice(self):
        state = fsmc._read_state(self.sim, self.ports)
        if state is not None:
            self.fsm_state = state
        completed = self.detector.feed(
            [self.sim.pressure(n) for n in self.tap_nodes])
        if completed:
            self.pump_cycles += completed
            self._on_pump_cycles(completed)

    def _on_pump_cycles(self, cycles: int):
        if self.profile == "mixer":
            mixer_step(self.plant, self.fsm_state, cycles)
            comp = self.plant.composition()
            for label in sorted(comp):
                self.history.append(HistoryRow(self.pump_cycles, "ring",
                                               label, comp[label]))
        else:
            self._stage_cycles += cycles

    # -- dilution protocol --

    def run_dilution_stage(self, min_cycles: Optional[int] = None):
        """Accumulate pump cycles for the active line, apply the dilution,
        refill per the preserved-series convention, then advance the FSM."""
        ladder: DilutionLadder = self.plant
        need = ladder.topo.n_mix if min_cycles is None else min_cycles
        self._stage_cycles = 0
        while self._stage_cycles < need:
            self.tick()
        line = self._active_line()
        pre = dict(ladder.rungs[line].composition)
        lines = [i == line for i in range(ladder.topo.num_lines)]
        dilute_step(ladder, lines, self._stage_cycles)
        ladder.refill(line, pre)
        for k, conc in enumerate(ladder.concentrations()):
            self.history.append(HistoryRow(self.pump_cycles, f"rung{k}",
                                           SAMPLE, conc))
        self._stages_done += 1
        self.pulse_clock()

    def _active_line(self) -> int:
        outputs = self.program.diagram.active_outputs(self.fsm_state)
        if len(outputs) != 1:
            raise FluidicsError(
                f"state {self.fsm_state} maps to {len(outputs)} control lines")
        return int(outputs[0][1:])  # "L2" -> 2

    def snapshot(self) -> dict:
        snap = {
            "sim_time": round(self.sim.time, 9),
            "fsm_state": self.fsm_state,
            "valves": {vid: open_ for vid, open_ in self.sim.valve_states().items()},
            "probes": {p.ref: round(self.sim.pressure(p.ref), 6)
                       for p in self.net.probes if p.kind == "node"},
            "button_covered": bool(self.button_covered),
            "pump_cycles": self.pump_cycles,
            "plant": self._plant_snapshot(),
        }
        return snap

    def _plant_snapshot(self) -> dict:
        if self.profile == "mixer":
            comp = self.plant.composition()
            return {"kind": "mixer",
                    "composition": {k: round(v, 9) for k, v in sorted(comp.items())}}
        return {"kind": "dilution",
                "concentrations": [round(c, 9) for c in self.plant.concentrations()]}


def _program_source(name: str) -> str:
    import importlib.resources as resources
    return (resources.files("pneumos") / f"programs/{name}.fsm").read_text()


@dataclass
class RunResult:
    session: EmbeddedSession
    history: list[HistoryRow]


def run_mixer_script(script: Sequence[tuple[float, str]],
                     t_end: Optional[float] = None,
                     params: Params = DEFAULTS, tick: float = 0.1) -> RunResult:
    """Replay scripted button actions: (time, "press"|"release") pairs,
    times quantized to the tick grid. Deterministic for a fixed script."""
    session = EmbeddedSession("mixer", params=params, tick=tick)
    events = sorted(
        (max(0, int(round(t / tick))), action) for t, action in script)
    if t_end is None:
        end_tick = (events[-1][0] if events else 0) + int(round(50.0 / tick))
    else:
        end_tick = int(round(t_end / tick))
    idx = 0
    for now in range(end_tick):
        while idx < len(events) and events[idx][0] == now:
            action = events[idx][1]
            if action == "press":
                session.press_button()
            elif action == "release":
                session.release_button()
            else:
                raise FluidicsError(f"unknown script action {action!r}")
            idx += 1
        session.tick()
    return RunResult(session, session.history)


def run_dilution(params: Params = DEFAULTS, tick: float = 0.1) -> RunResult:
    """Full autonomous serial-dilution run: four stages, one per FSM state."""
    session = EmbeddedSession("dilution", params=params, tick=tick)
    for _ in range(session.plant.topo.num_lines):
        session.run_dilution_stage()
    return RunResult(session, session.history)
