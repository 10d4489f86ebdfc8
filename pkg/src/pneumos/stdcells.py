"""Macro library expanding gate-level cells into valve-level fragments.

Every gate follows the same pattern as its electronic NMOS analogue: a
pull-down network of normally-closed valves to the atmosphere rail and a
weak pull-up channel to the vacuum rail. Cells compose onto a
:class:`~pneumos.netlist.NetlistBuilder`; :func:`expand_cell` wraps the same
machinery into standalone fragments for the spec-level cell API.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .config import DEFAULTS, Params
from .errors import NetlistError, PneumosError
from .netlist import CELL_EXPANDERS, Netlist, NetlistBuilder

MAX_NAND_FANIN = 3  # device family limit: 3-input series stacks


def not_gate(b: NetlistBuilder, inp: str, out: str, name: str,
             p: Params = DEFAULTS) -> None:
    """One valve (gate=in, src=out, drn=ATM) plus a pull-up to VAC."""
    b.node(inp)
    b.node(out, cap=p.cap)
    b.chan(b.vacuum, out, p.g_pull_up)
    b.valve(name, gate=inp, src=out, drn=b.atmosphere, g_open=p.g_open,
            theta_open=p.theta_open, theta_close=p.theta_close)


def nand_gate(b: NetlistBuilder, inputs: Sequence[str], out: str, name: str,
              p: Params = DEFAULTS) -> None:
    """k series valves out -> ... -> ATM with k-1 internal nodes, plus pull-up."""
    k = len(inputs)
    if not 2 <= k <= MAX_NAND_FANIN:
        raise PneumosError(f"NAND fan-in {k} outside 2..{MAX_NAND_FANIN}")
    for inp in inputs:
        b.node(inp)
    b.node(out, cap=p.cap)
    b.chan(b.vacuum, out, p.g_pull_up)
    chain = [out] + [b.node(f"{name}.s{i}", cap=p.cap) for i in range(1, k)] + [b.atmosphere]
    for i, inp in enumerate(inputs):
        b.valve(f"{name}.v{i}", gate=inp, src=chain[i], drn=chain[i + 1],
                g_open=p.g_open, theta_open=p.theta_open, theta_close=p.theta_close)


def buffer_gate(b: NetlistBuilder, inp: str, out: str, name: str,
                p: Params = DEFAULTS) -> None:
    mid = f"{name}.mid"
    not_gate(b, inp, mid, f"{name}.v0", p)
    not_gate(b, mid, out, f"{name}.v1", p)


def indicator(b: NetlistBuilder, signal: str, name: str,
              p: Params = DEFAULTS) -> str:
    """Probe-only readout divider; the monitored line sees no flow (gates
    carry no load in this technology). Returns the indicator output node."""
    out = f"{name}.out"
    not_gate(b, signal, out, f"{name}.v", p)
    b.probe_node(out)
    b.probe_valve(f"{name}.v")
    return out


@dataclass(frozen=True)
class DffNodes:
    """Internal node names of one flip-flop, exposed for state initialization."""
    leader: str    # storage node written while clk is high
    follower: str  # storage node written at the falling edge
    clkbar: str


def dff(b: NetlistBuilder, d: str, clk: str, q: str, qbar: str, name: str,
        shared_clkbar: Optional[str] = None, p: Params = DEFAULTS) -> DffNodes:
    """Negative-edge-triggered flip-flop with dynamic storage.

    Leader pass valve (gate=clk) writes D onto storage node L while the
    clock is high; two inverters restore L; the follower pass valve (gate =
    inverted clock) copies the restored value onto storage node F at the
    falling edge; two more inverters produce Q-bar then Q. Six valves, plus
    one clock inverter that can be shared across a register.
    """
    ports = [d, clk, q, qbar]
    if len(set(ports)) != len(ports):
        raise NetlistError(f"dff {name!r}: ports must be distinct")
    for port in ports:
        b.node(port)

    if shared_clkbar is None:
        clkbar = f"{name}.clkb"
        not_gate(b, clk, clkbar, f"{name}.vck", p)
    else:
        clkbar = shared_clkbar

    leader = b.node(f"{name}.L", cap=p.cap)
    restored_mid = f"{name}.m"
    restored = f"{name}.r"
    follower = b.node(f"{name}.F", cap=p.cap)

    b.valve(f"{name}.ld", gate=clk, src=d, drn=leader, g_open=p.g_open,
            theta_open=p.theta_open, theta_close=p.theta_close)
    not_gate(b, leader, restored_mid, f"{name}.i1", p)
    not_gate(b, restored_mid, restored, f"{name}.i2", p)
    b.valve(f"{name}.fd", gate=clkbar, src=restored, drn=follower, g_open=p.g_open,
            theta_open=p.theta_open, theta_close=p.theta_close)
    not_gate(b, follower, qbar, f"{name}.i3", p)
    not_gate(b, qbar, q, f"{name}.i4", p)
    return DffNodes(leader=leader, follower=follower, clkbar=clkbar)


def register(b: NetlistBuilder, d: Sequence[str], clk: str, q: Sequence[str],
             qbar: Sequence[str], name: str, p: Params = DEFAULTS) -> list[DffNodes]:
    """Bank of flip-flops sharing one clock inverter (2 bits -> 13 valves)."""
    if not len(d) == len(q) == len(qbar):
        raise NetlistError("register port lists must have equal length")
    clkbar = f"{name}.clkb"
    not_gate(b, clk, clkbar, f"{name}.vck", p)
    return [dff(b, d[i], clk, q[i], qbar[i], f"{name}.b{i}", shared_clkbar=clkbar, p=p)
            for i in range(len(d))]


def dff_initial_pressures(nodes: DffNodes, bit: int) -> dict[str, float]:
    """Initial pressures that preload one flip-flop with ``bit``."""
    return {nodes.leader: float(bit), nodes.follower: float(bit)}


def ring_oscillator(b: NetlistBuilder, n: int, name: str,
                    stage_names: Optional[Sequence[Optional[str]]] = None,
                    p: Params = DEFAULTS) -> list[str]:
    """n inverters in a closed loop; returns the stage output nodes in order."""
    if n % 2 == 0 or n < 3:
        raise PneumosError(f"ring oscillator needs odd n >= 3, got {n}")
    stages = []
    for i in range(n):
        custom = stage_names[i] if stage_names and i < len(stage_names) else None
        stages.append(custom or f"{name}.x{i}")
    for i in range(n):
        not_gate(b, stages[(i - 1) % n], stages[i], f"{name}.v{i}", p)
    return stages


def ring_initial_pressures(stages: Sequence[str]) -> dict[str, float]:
    """Staggered startup pressures that seed the traveling-wave mode.

    A symmetric start (all stages equal) is a fixed pattern under
    deterministic integration; alternating levels leave exactly one
    consistent pair at the wrap, which launches the oscillation.
    """
    return {node: float(i % 2) for i, node in enumerate(stages)}


def button(b: NetlistBuilder, out: str, name: str, p: Params = DEFAULTS) -> str:
    """Push-button clock source: pull-up to VAC, strong short to ATM while
    the port is uncovered. Returns the control node; drive it to 0.0 for
    "covered" (output charges to 1) and 1.0 for "uncovered" (output ~0.01).
    """
    b.node(out, cap=p.cap)
    ctl = b.node(f"{name}.ctl", cap=p.cap)
    b.chan(b.vacuum, out, p.g_pull_up)
    b.valve(f"{name}.v", gate=ctl, src=out, drn=b.atmosphere, g_open=p.g_open,
            theta_open=p.theta_open, theta_close=p.theta_close)
    return ctl


BUTTON_UNCOVERED = 1.0
BUTTON_COVERED = 0.0


# ---------------------------------------------------------------------------
# Spec-level cell API


@dataclass(frozen=True)
class CellSpec:
    kind: str                     # NOT | NAND | BUF | INDICATOR | DFF | RING_OSC | BUTTON
    ports: dict = field(default_factory=dict)
    arity: Optional[int] = None   # fan-in for NAND, stage count for RING_OSC
    params: Params = DEFAULTS


def expand_cell(spec: CellSpec) -> Netlist:
    """Expand one cell into a standalone fragment with its own rails."""
    b = NetlistBuilder()
    b.rails()
    p = spec.params
    ports = spec.ports
    kind = spec.kind.upper()
    if kind == "NOT":
        not_gate(b, ports["in"], ports["out"], "not0", p)
    elif kind == "NAND":
        k = spec.arity or 2
        names = ["a", "b", "c"][:k]
        nand_gate(b, [ports[x] for x in names], ports["out"], "nand0", p)
    elif kind == "BUF":
        buffer_gate(b, ports["in"], ports["out"], "buf0", p)
    elif kind == "INDICATOR":
        indicator(b, ports["signal"], "ind0", p)
    elif kind == "DFF":
        dff(b, ports["d"], ports["clk"], ports["q"], ports["qbar"], "ff0", p=p)
    elif kind == "RING_OSC":
        n = spec.arity or 5
        taps = ports.get("taps")
        stage_names = None
        if taps:
            stage_names = [None] * n
            for idx, tap in zip(range(0, n, 2), taps):
                stage_names[idx] = tap
        ring_oscillator(b, n, "ring0", stage_names, p)
    elif kind == "BUTTON":
        button(b, ports["out"], "btn0", p)
    else:
        raise PneumosError(f"unknown cell kind {spec.kind!r}")
    return b.build()


# ---------------------------------------------------------------------------
# Netlist-format `cell` directives


def _need(kwargs: dict, keys: Sequence[str], kind: str) -> list[str]:
    missing = [k for k in keys if k not in kwargs]
    if missing:
        raise NetlistError(f"cell {kind} missing {', '.join(missing)}")
    extra = set(kwargs) - set(keys)
    if extra:
        raise NetlistError(f"cell {kind}: unknown keys {sorted(extra)}")
    return [kwargs[k] for k in keys]


def _expand_not(b, kwargs, prefix):
    inp, out = _need(kwargs, ["in", "out"], "NOT")
    not_gate(b, inp, out, f"{prefix}not")


def _expand_nand2(b, kwargs, prefix):
    a, bb, out = _need(kwargs, ["a", "b", "out"], "NAND2")
    nand_gate(b, [a, bb], out, f"{prefix}nand")


def _expand_nand3(b, kwargs, prefix):
    a, bb, c, out = _need(kwargs, ["a", "b", "c", "out"], "NAND3")
    nand_gate(b, [a, bb, c], out, f"{prefix}nand")


def _expand_buf(b, kwargs, prefix):
    inp, out = _need(kwargs, ["in", "out"], "BUF")
    buffer_gate(b, inp, out, f"{prefix}buf")


def _expand_indicator(b, kwargs, prefix):
    (signal,) = _need(kwargs, ["signal"], "INDICATOR")
    indicator(b, signal, f"{prefix}ind")


def _expand_dff(b, kwargs, prefix):
    d, clk, q, qbar = _need(kwargs, ["d", "clk", "q", "qbar"], "DFF")
    dff(b, d, clk, q, qbar, f"{prefix}ff")


def _expand_ring5(b, kwargs, prefix):
    (taps,) = _need(kwargs, ["taps"], "RING5")
    tap_list = taps.split(",")
    if len(tap_list) != 3:
        raise NetlistError("cell RING5 needs exactly 3 taps")
    stage_names: list[Optional[str]] = [tap_list[0], None, tap_list[1], None, tap_list[2]]
    ring_oscillator(b, 5, f"{prefix}ring", stage_names)


def _expand_button(b, kwargs, prefix):
    (out,) = _need(kwargs, ["out"], "BUTTON")
    button(b, out, f"{prefix}btn")


CELL_EXPANDERS.update({
    "NOT": _expand_not,
    "NAND2": _expand_nand2,
    "NAND3": _expand_nand3,
    "BUF": _expand_buf,
    "INDICATOR": _expand_indicator,
    "DFF": _expand_dff,
    "RING5": _expand_ring5,
    "BUTTON": _expand_button,
})
