"""State-machine compiler: program DSL -> transition table -> minimized
sum-of-products -> hole pattern -> membrane file, plus valve-level
verification of the compiled pattern against the table.

The device profile is fixed: 2 state bits, one input named in the program,
and the 6x4x2 array from :mod:`pneumos.pla`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .config import DEFAULTS, Params
from .engine import LogicLevel, TimedSimulation
from .errors import CapacityError, FsmError
from .minimize import Cube, eval_cubes, minimize
from .netlist import Netlist, NetlistBuilder
from .pla import DEVICE_SHAPE, HolePattern, LITERALS, PlaShape, encode_membrane, expand_pla
from . import stdcells

STATE_BITS = 2
STATES = ("00", "01", "10", "11")


@dataclass(frozen=True)
class StateDiagram:
    name: str
    input_name: str
    initial: str
    transitions: Mapping[tuple[str, int], str]  # (state, input value) -> state
    moore_outputs: Mapping[str, str] = field(default_factory=dict)  # name -> state

    def next_state(self, state: str, a: int) -> str:
        return self.transitions[(state, a)]

    def active_outputs(self, state: str) -> list[str]:
        return [nm for nm, st in self.moore_outputs.items() if st == state]


@dataclass(frozen=True)
class TransitionTable:
    rows: Mapping[tuple[int, int, int], tuple[int, int]]  # (s1,s0,a) -> (n1,n0)

    def __post_init__(self):
        keys = {(s1, s0, a) for s1 in (0, 1) for s0 in (0, 1) for a in (0, 1)}
        if set(self.rows) != keys:
            raise FsmError("transition table must have exactly 8 rows")

    def next_state(self, state: str, a: int) -> str:
        n1, n0 = self.rows[(int(state[0]), int(state[1]), a)]
        return f"{n1}{n0}"


# Product terms are sorted tuples of literal column indices into LITERALS.
Product = tuple[int, ...]


@dataclass(frozen=True)
class SopEquations:
    n1: tuple[Product, ...]
    n0: tuple[Product, ...]

    def pretty(self) -> str:
        def fmt(products):
            if not products:
                return "0"
            return " + ".join("*".join(LITERALS[c] for c in prod) for prod in products)
        return f"N1 = {fmt(self.n1)}\nN0 = {fmt(self.n0)}"


# ---------------------------------------------------------------------------
# DSL front end

_STATE_RE = re.compile(r"^[01]{2}$")


def parse_fsm(text: str) -> StateDiagram:
    """Parse the state-machine DSL.

    Example program::

        fsm counter
        bits 2
        input A
        initial 00
        from 00: A=1 -> 01 ; A=0 -> 00
        from 01: A=1 -> 10 ; default -> 00
        ...
        output L0 = state==00 ; output L1 = state==01
    """
    name = None
    input_name = None
    initial = None
    bits_declared = False
    transitions: dict[tuple[str, int], str] = {}
    defaults: dict[str, str] = {}
    outputs: dict[str, str] = {}

    def err(lineno: int, msg: str):
        raise FsmError(f"line {lineno}: {msg}", line=lineno)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("fsm "):
            name = line[4:].strip()
        elif line.startswith("bits "):
            if line[5:].strip() != str(STATE_BITS):
                err(lineno, f"device profile is fixed at {STATE_BITS} state bits")
            bits_declared = True
        elif line.startswith("input "):
            input_name = line[6:].strip()
            if not input_name.isidentifier():
                err(lineno, f"bad input name {input_name!r}")
        elif line.startswith("initial "):
            initial = line[8:].strip()
            if not _STATE_RE.match(initial):
                err(lineno, f"unknown state label {initial!r}")
        elif line.startswith("from "):
            head, sep, rest = line[5:].partition(":")
            state = head.strip()
            if not sep:
                err(lineno, "expected `from <state>: ...`")
            if not _STATE_RE.match(state):
                err(lineno, f"unknown state label {state!r}")
            for clause in rest.split(";"):
                clause = clause.strip()
                if not clause:
                    continue
                m = re.match(r"^(default|(\w+)\s*=\s*([01]))\s*->\s*(\S+)$", clause)
                if not m:
                    err(lineno, f"bad transition clause {clause!r}")
                target = m.group(4)
                if not _STATE_RE.match(target):
                    err(lineno, f"unknown state label {target!r}")
                if m.group(1) == "default":
                    if state in defaults:
                        err(lineno, f"duplicate default for state {state}")
                    defaults[state] = target
                else:
                    if input_name is None:
                        err(lineno, "transition before `input` declaration")
                    if m.group(2) != input_name:
                        err(lineno, f"unknown input {m.group(2)!r}")
                    key = (state, int(m.group(3)))
                    if key in transitions:
                        err(lineno, f"duplicate transition for ({state}, "
                                    f"{input_name}={m.group(3)})")
                    transitions[key] = target
        elif line.startswith("output"):
            for clause in line.split(";"):
                clause = clause.strip()
                if not clause:
                    continue
                m = re.match(r"^output\s+(\w+)\s*=\s*state\s*==\s*([01]{2})$", clause)
                if not m:
                    err(lineno, f"bad output clause {clause!r}")
                if m.group(1) in outputs:
                    err(lineno, f"duplicate output {m.group(1)!r}")
                outputs[m.group(1)] = m.group(2)
        else:
            err(lineno, f"unknown directive {line.split()[0]!r}")

    if name is None:
        raise FsmError("missing `fsm <name>`")
    if not bits_declared:
        raise FsmError("missing `bits 2`")
    if input_name is None:
        raise FsmError("missing `input <name>`")
    if initial is None:
        raise FsmError("missing `initial <state>`")

    for state in STATES:
        for a in (0, 1):
            if (state, a) not in transitions:
                if state in defaults:
                    transitions[(state, a)] = defaults[state]
                else:
                    raise FsmError(
                        f"non-total transitions: missing ({state}, {input_name}={a})")
    return StateDiagram(name, input_name, initial, dict(transitions), outputs)


def to_table(diagram: StateDiagram) -> TransitionTable:
    rows = {}
    for state in STATES:
        for a in (0, 1):
            nxt = diagram.next_state(state, a)
            rows[(int(state[0]), int(state[1]), a)] = (int(nxt[0]), int(nxt[1]))
    return TransitionTable(rows)


# ---------------------------------------------------------------------------
# Excitation equations

# Variable order for minimization cubes is (s1, s0, a).
_CUBE_TO_LITERAL = ((0, 1), (2, 3), (4, 5))  # (positive col, inverted col) per var


def _cube_to_product(cube: Cube) -> Product:
    cols = []
    for var, value in enumerate(cube):
        if value != 2:
            cols.append(_CUBE_TO_LITERAL[var][0] if value == 1
                        else _CUBE_TO_LITERAL[var][1])
    return tuple(sorted(cols))


def derive_sop(table: TransitionTable) -> SopEquations:
    """Exact two-level minimization of both next-state bits.

    Ties break deterministically: fewest products, then fewest literals,
    then lexicographic cube order (see :mod:`pneumos.minimize`).
    """
    per_bit = []
    for bit in (0, 1):  # bit 0 -> n1, bit 1 -> n0
        on_set = [s1 * 4 + s0 * 2 + a
                  for (s1, s0, a), nxt in table.rows.items() if nxt[bit]]
        cubes = minimize(3, on_set)
        products = tuple(_cube_to_product(c) for c in cubes)
        if any(not prod for prod in products):
            # A constant-true bit minimizes to the literal-free product, which
            # the array cannot express (hole-free rows are tied off to 0).
            # Split it on the input literal instead: A + An.
            products = ((LITERALS.index("A"),), (LITERALS.index("An"),))
        per_bit.append(products)
    return SopEquations(n1=per_bit[0], n0=per_bit[1])


def fit_pla(eqs: SopEquations, shape: PlaShape = DEVICE_SHAPE) -> HolePattern:
    """Assign distinct products to rows (shared products share a row).

    Raises :class:`CapacityError` naming the violated limit when the
    equations exceed the array.
    """
    distinct: list[Product] = []
    for prod in list(eqs.n1) + list(eqs.n0):
        if prod not in distinct:
            distinct.append(prod)
    if len(distinct) > shape.num_products:
        raise CapacityError("products", len(distinct), shape.num_products)
    for prod in distinct:
        if len(prod) > shape.max_and_fanin:
            raise CapacityError(f"literals in product {prod}", len(prod),
                                shape.max_and_fanin)
    for nm, prods in (("N1", eqs.n1), ("N0", eqs.n0)):
        if len(prods) > shape.max_or_fanin:
            raise CapacityError(f"products for output {nm}", len(prods),
                                shape.max_or_fanin)
    row_of = {prod: i for i, prod in enumerate(distinct)}
    and_holes = [list(prod) for prod in distinct]
    and_holes += [[] for _ in range(shape.num_products - len(distinct))]
    or_holes = [[row_of[prod] for prod in eqs.n1],
                [row_of[prod] for prod in eqs.n0]]
    return HolePattern.from_holes(and_holes, or_holes, shape)


@dataclass(frozen=True)
class CompileResult:
    diagram: StateDiagram
    table: TransitionTable
    equations: SopEquations
    pattern: HolePattern
    membrane: str


def compile_program(text: str) -> CompileResult:
    diagram = parse_fsm(text)
    table = to_table(diagram)
    eqs = derive_sop(table)
    pattern = fit_pla(eqs)
    return CompileResult(diagram, table, eqs, pattern, encode_membrane(pattern))


def table_pretty(table: TransitionTable) -> str:
    lines = ["S1 S0 A | N1 N0"]
    for s1 in (0, 1):
        for s0 in (0, 1):
            for a in (0, 1):
                n1, n0 = table.rows[(s1, s0, a)]
                lines.append(f" {s1}  {s0} {a} |  {n1}  {n0}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Valve-level chip and verification


@dataclass(frozen=True)
class ChipPorts:
    clk: str
    a: str
    q: tuple[str, str]       # (q1, q0)
    qbar: tuple[str, str]
    d: tuple[str, str]       # PLA outputs feeding the register
    dff_nodes: tuple[stdcells.DffNodes, stdcells.DffNodes]
    button_ctl: Optional[str] = None


def build_chip(pattern: HolePattern, p: Params = DEFAULTS,
               with_button: bool = False) -> tuple[Netlist, ChipPorts]:
    """Complete machine: 2-bit register (shared clock inverter), input
    inverter, and the programmed array closed in a loop.

    The complementary flip-flop outputs supply the inverted state literals
    for free; only the external input needs its own inverter.
    """
    b = NetlistBuilder()
    b.rails()
    b.node("a", cap=p.cap)
    button_ctl = None
    if with_button:
        button_ctl = stdcells.button(b, "clk", "btn", p)
    else:
        b.node("clk", cap=p.cap)
    stdcells.not_gate(b, "a", "a_n", "inv_a", p)
    ffs = stdcells.register(b, ["n1", "n0"], "clk", ["q1", "q0"], ["qb1", "qb0"],
                            "reg", p)
    expand_pla(b, pattern, ["q1", "qb1", "q0", "qb0", "a", "a_n"], ["n1", "n0"],
               "pla", p)
    for node in ("clk", "a", "q1", "q0", "n1", "n0"):
        b.probe_node(node)
    ports = ChipPorts(clk="clk", a="a", q=("q1", "q0"), qbar=("qb1", "qb0"),
                      d=("n1", "n0"), dff_nodes=(ffs[0], ffs[1]),
                      button_ctl=button_ctl)
    return b.build(), ports


def state_initial_pressures(ports: ChipPorts, state: str) -> dict[str, float]:
    init = {}
    for bit_char, nodes in zip(state, ports.dff_nodes):
        init.update(stdcells.dff_initial_pressures(nodes, int(bit_char)))
    return init


SETTLE_TIME = 10.0


def _read_state(sim: TimedSimulation, ports: ChipPorts) -> Optional[str]:
    levels = [sim.logic(q) for q in ports.q]
    if LogicLevel.UNKNOWN in levels:
        return None
    return "".join(str(level.value) for level in levels)


class TransitionHarness:
    """Reusable per-(state, input) simulations, settled once and snapshotted
    so the clock-period search replays only the clock cycle itself."""

    def __init__(self, pattern: HolePattern, dt: float = DEFAULTS.dt,
                 p: Params = DEFAULTS):
        self.net, self.ports = build_chip(pattern, p)
        self.dt = dt
        self._cases: dict[tuple[str, int], tuple[TimedSimulation, tuple]] = {}
        for state in STATES:
            for a in (0, 1):
                sim = TimedSimulation(self.net, dt,
                                      initial=state_initial_pressures(self.ports, state),
                                      recording=False)
                sim.drive(self.ports.a, float(a))
                sim.drive(self.ports.clk, 0.0)
                sim.run_until(SETTLE_TIME)
                self._cases[(state, a)] = (sim, sim.save_state())

    def observe(self, state: str, a: int, period: float) -> Optional[str]:
        """Clock one cycle at the given period and read the next state."""
        sim, snap = self._cases[(state, a)]
        sim.restore_state(snap)
        half = max(1, int(round(period / 2 / self.dt)))
        sim.drive(self.ports.clk, 1.0)
        sim.step(half)
        sim.drive(self.ports.clk, 0.0)
        sim.step(half)
        return _read_state(sim, self.ports)


@dataclass
class VerifyReport:
    results: dict[tuple[str, int], tuple[str, Optional[str], bool]]
    period: float
    min_period: float
    dt: float

    @property
    def all_pass(self) -> bool:
        return all(ok for _, _, ok in self.results.values())

    def pretty(self) -> str:
        lines = []
        for (state, a), (want, got, ok) in sorted(self.results.items()):
            got_s = got if got is not None else "??"
            lines.append(f"{state} A={a} -> want {want} got {got_s} "
                         f"{'PASS' if ok else 'FAIL'}")
        lines.append(f"checked at clock period {self.period}")
        lines.append(f"minimum working clock period ~ {self.min_period:.4f}")
        return "\n".join(lines)


VERIFY_PERIOD = 16.0
PERIOD_CAP = 256.0


def verify(pattern: HolePattern, table: TransitionTable,
           dt: float = DEFAULTS.dt, period: float = VERIFY_PERIOD,
           p: Params = DEFAULTS) -> VerifyReport:
    """Exercise every (state, input) pair on the valve-level chip and
    compare observed next states against the table; also reports the
    minimum clock period at which all transitions pass (factor-2 bracket,
    then 10 bisection steps). Never raises for logic mismatches."""
    harness = TransitionHarness(pattern, dt, p)

    results = {}
    for (state, a) in harness._cases:
        want = table.next_state(state, a)
        got = harness.observe(state, a, period)
        results[(state, a)] = (want, got, got == want)

    def passes(T: float) -> bool:
        return all(harness.observe(state, a, T) == table.next_state(state, a)
                   for (state, a) in harness._cases)

    lo, hi = None, None
    T = 1.0
    if passes(T):
        hi = T
        while T > 8 * dt:
            T /= 2
            if passes(T):
                hi = T
            else:
                lo = T
                break
        if lo is None:
            lo = T / 2
    else:
        lo = T
        while T < PERIOD_CAP:
            T *= 2
            if passes(T):
                hi = T
                break
            lo = T
        if hi is None:
            return VerifyReport(results, period, float("inf"), dt)
    for _ in range(10):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return VerifyReport(results, period, hi, dt)


def run_state_sequence(pattern: HolePattern, start_state: str, a: int,
                       n_cycles: int, period: float = VERIFY_PERIOD,
                       dt: float = DEFAULTS.dt,
                       p: Params = DEFAULTS) -> list[Optional[str]]:
    """Free-run the chip for n clock cycles with the input held constant;
    returns the observed state after each falling edge."""
    net, ports = build_chip(pattern, p)
    sim = TimedSimulation(net, dt,
                          initial=state_initial_pressures(ports, start_state),
                          recording=False)
    sim.drive(ports.a, float(a))
    sim.drive(ports.clk, 0.0)
    sim.run_until(SETTLE_TIME)
    half = max(1, int(round(period / 2 / dt)))
    seq = []
    for _ in range(n_cycles):
        sim.drive(ports.clk, 1.0)
        sim.step(half)
        sim.drive(ports.clk, 0.0)
        sim.step(half)
        seq.append(_read_state(sim, ports))
    return seq
