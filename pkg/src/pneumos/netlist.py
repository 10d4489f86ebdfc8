"""Valve-level circuit model and its line-based text format.

A circuit is a set of nodes (pneumatic capacitors, two of which are the
vacuum and atmosphere rails), channels (fixed conductances), and
normally-closed membrane valves (gate/source/drain switches). Pressures are
normalized: 1.0 is full vacuum (logic 1), 0.0 is atmosphere (logic 0).

Netlists are immutable after construction; build them through
:class:`NetlistBuilder`, :func:`parse_netlist`, or :func:`merge`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .config import DEFAULTS
from .errors import NetlistError, NetlistParseError

VACUUM = "vacuum"
ATMOSPHERE = "atmosphere"
RAIL_PRESSURE = {VACUUM: 1.0, ATMOSPHERE: 0.0}


@dataclass(frozen=True)
class Node:
    id: str
    capacitance: float = DEFAULTS.cap
    rail: Optional[str] = None  # "vacuum" | "atmosphere" | None

    def __post_init__(self):
        if not self.id:
            raise NetlistError("empty node id")
        if self.rail is None and self.capacitance <= 0:
            raise NetlistError(f"node {self.id!r}: capacitance must be > 0")
        if self.rail is not None and self.rail not in RAIL_PRESSURE:
            raise NetlistError(f"node {self.id!r}: unknown rail kind {self.rail!r}")


@dataclass(frozen=True)
class Channel:
    a: str
    b: str
    conductance: float = 1.0

    def __post_init__(self):
        if self.a == self.b:
            raise NetlistError(f"channel endpoints must differ (got {self.a!r} twice)")
        if self.conductance <= 0:
            raise NetlistError(f"channel {self.a}-{self.b}: conductance must be > 0")


@dataclass(frozen=True)
class Valve:
    id: str
    gate: str
    source: str
    drain: str
    g_open: float = DEFAULTS.g_open
    theta_open: float = DEFAULTS.theta_open
    theta_close: float = DEFAULTS.theta_close
    initial_open: bool = False  # normally closed

    def __post_init__(self):
        if not self.id:
            raise NetlistError("empty valve id")
        if self.source == self.drain:
            raise NetlistError(f"valve {self.id!r}: source and drain must differ")
        if self.g_open <= 0:
            raise NetlistError(f"valve {self.id!r}: g_open must be > 0")


@dataclass(frozen=True)
class Probe:
    kind: str  # "node" | "valve"
    ref: str


@dataclass(frozen=True)
class Netlist:
    nodes: tuple[Node, ...]
    channels: tuple[Channel, ...]
    valves: tuple[Valve, ...]
    probes: tuple[Probe, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def node(self, node_id: str) -> Node:
        return self._node_map[node_id]

    def valve(self, valve_id: str) -> Valve:
        return self._valve_map[valve_id]

    def __post_init__(self):
        object.__setattr__(self, "_node_map", {n.id: n for n in self.nodes})
        object.__setattr__(self, "_valve_map", {v.id: v for v in self.valves})
        self._check()

    @property
    def vacuum(self) -> str:
        return self._rail_id(VACUUM)

    @property
    def atmosphere(self) -> str:
        return self._rail_id(ATMOSPHERE)

    def _rail_id(self, kind: str) -> str:
        for n in self.nodes:
            if n.rail == kind:
                return n.id
        raise NetlistError(f"no {kind} rail")

    def _check(self):
        if len(self._node_map) != len(self.nodes):
            seen = set()
            for n in self.nodes:
                if n.id in seen:
                    raise NetlistError(f"duplicate node id {n.id!r}")
                seen.add(n.id)
        if len(self._valve_map) != len(self.valves):
            seen = set()
            for v in self.valves:
                if v.id in seen:
                    raise NetlistError(f"duplicate valve id {v.id!r}")
                seen.add(v.id)
        for kind in (VACUUM, ATMOSPHERE):
            rails = [n for n in self.nodes if n.rail == kind]
            if len(rails) != 1:
                raise NetlistError(f"exactly one {kind} rail required, found {len(rails)}")
        for ch in self.channels:
            for ref in (ch.a, ch.b):
                self._require_node(ref)
        for v in self.valves:
            for ref in (v.gate, v.source, v.drain):
                self._require_node(ref)
        for p in self.probes:
            if p.kind == "node":
                self._require_node(p.ref)
            elif p.kind == "valve":
                if p.ref not in self._valve_map:
                    raise NetlistError(f"undefined valve {p.ref!r}")
            else:
                raise NetlistError(f"unknown probe kind {p.kind!r}")

    def _require_node(self, ref: str):
        if ref not in self._node_map:
            raise NetlistError(f"undefined node {ref!r}")


class NetlistBuilder:
    """Incremental constructor; the composition surface used by cell macros."""

    def __init__(self, metadata: Mapping[str, str] | None = None):
        self._nodes: dict[str, Node] = {}
        self._channels: list[Channel] = []
        self._valves: dict[str, Valve] = {}
        self._probes: list[Probe] = []
        self.metadata = dict(metadata or {})

    def rail(self, node_id: str, kind: str) -> str:
        self._add_node(Node(node_id, rail=kind))
        return node_id

    def rails(self, vac: str = "VAC", atm: str = "ATM") -> tuple[str, str]:
        return self.rail(vac, VACUUM), self.rail(atm, ATMOSPHERE)

    def node(self, node_id: str, cap: float = DEFAULTS.cap, exist_ok: bool = True) -> str:
        if node_id in self._nodes:
            if not exist_ok:
                raise NetlistError(f"duplicate node id {node_id!r}")
            return node_id
        self._add_node(Node(node_id, capacitance=cap))
        return node_id

    def _add_node(self, node: Node):
        if node.id in self._nodes:
            existing = self._nodes[node.id]
            if existing != node:
                raise NetlistError(f"duplicate node id {node.id!r}")
            return
        self._nodes[node.id] = node

    def chan(self, a: str, b: str, g: float = 1.0):
        self._channels.append(Channel(a, b, g))

    def valve(self, valve_id: str, gate: str, src: str, drn: str, *,
              g_open: float = DEFAULTS.g_open,
              theta_open: float = DEFAULTS.theta_open,
              theta_close: float = DEFAULTS.theta_close,
              initial_open: bool = False):
        if valve_id in self._valves:
            raise NetlistError(f"duplicate valve id {valve_id!r}")
        self._valves[valve_id] = Valve(valve_id, gate, src, drn, g_open=g_open,
                                       theta_open=theta_open, theta_close=theta_close,
                                       initial_open=initial_open)

    def probe_node(self, node_id: str):
        p = Probe("node", node_id)
        if p not in self._probes:
            self._probes.append(p)

    def probe_valve(self, valve_id: str):
        p = Probe("valve", valve_id)
        if p not in self._probes:
            self._probes.append(p)

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def _rail_id(self, kind: str) -> str:
        for n in self._nodes.values():
            if n.rail == kind:
                return n.id
        raise NetlistError(f"no {kind} rail declared yet")

    @property
    def vacuum(self) -> str:
        return self._rail_id(VACUUM)

    @property
    def atmosphere(self) -> str:
        return self._rail_id(ATMOSPHERE)

    def build(self) -> Netlist:
        return Netlist(tuple(self._nodes.values()), tuple(self._channels),
                       tuple(self._valves.values()), tuple(self._probes),
                       dict(self.metadata))


# Cell expanders registered by the standard-cell library; keyed by the token
# used in `cell` lines. Signature: expander(builder, kwargs, instance_prefix).
CELL_EXPANDERS: dict[str, Callable[[NetlistBuilder, dict[str, str], str], None]] = {}


_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _parse_float(tok: str, lineno: int, col: int) -> float:
    if not _FLOAT_RE.match(tok):
        raise NetlistParseError(f"expected a number, got {tok!r}", lineno, col)
    return float(tok)


def _split_kv(tok: str, lineno: int, col: int) -> tuple[str, str]:
    if "=" not in tok:
        raise NetlistParseError(f"expected key=value, got {tok!r}", lineno, col)
    key, _, value = tok.partition("=")
    if not key or not value:
        raise NetlistParseError(f"expected key=value, got {tok!r}", lineno, col)
    return key, value


def parse_netlist(text: str) -> Netlist:
    """Parse the line-based netlist format.

    Grammar (one element per line, ``#`` starts a comment)::

        rail VAC vacuum | rail ATM atmosphere
        node <id> [cap=<float>]
        chan <a> <b> [g=<float>]
        valve <id> gate=<node> src=<node> drn=<node> [g=<float>] [topen=<float>] [tclose=<float>]
        probe node <id> | probe valve <id>
        cell <KIND> key=<value>...

    Node references may appear before their declaration; resolution is
    checked once the whole document is read.
    """
    b = NetlistBuilder()
    pending_channels: list[tuple[int, int, str, str, float]] = []
    pending_valves: list[tuple[int, int, Valve]] = []
    pending_probes: list[tuple[int, int, Probe]] = []
    cell_count = 0

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        toks = line.split()
        cols = _token_columns(line, toks)
        kw = toks[0]
        try:
            if kw == "rail":
                if len(toks) != 3 or toks[2] not in RAIL_PRESSURE:
                    raise NetlistParseError(
                        "expected `rail <id> vacuum|atmosphere`", lineno, cols[0])
                b.rail(toks[1], toks[2])
            elif kw == "node":
                if len(toks) < 2:
                    raise NetlistParseError("expected `node <id> [cap=..]`", lineno, cols[0])
                cap = DEFAULTS.cap
                for tok, col in zip(toks[2:], cols[2:]):
                    key, value = _split_kv(tok, lineno, col)
                    if key != "cap":
                        raise NetlistParseError(f"unknown key {key!r}", lineno, col)
                    cap = _parse_float(value, lineno, col)
                b.node(toks[1], cap=cap, exist_ok=False)
            elif kw == "chan":
                if len(toks) < 3:
                    raise NetlistParseError("expected `chan <a> <b> [g=..]`", lineno, cols[0])
                g = 1.0
                for tok, col in zip(toks[3:], cols[3:]):
                    key, value = _split_kv(tok, lineno, col)
                    if key != "g":
                        raise NetlistParseError(f"unknown key {key!r}", lineno, col)
                    g = _parse_float(value, lineno, col)
                pending_channels.append((lineno, cols[0], toks[1], toks[2], g))
            elif kw == "valve":
                if len(toks) < 2:
                    raise NetlistParseError("expected `valve <id> ...`", lineno, cols[0])
                attrs: dict[str, float | str] = {}
                for tok, col in zip(toks[2:], cols[2:]):
                    key, value = _split_kv(tok, lineno, col)
                    if key in ("gate", "src", "drn"):
                        attrs[key] = value
                    elif key in ("g", "topen", "tclose"):
                        attrs[key] = _parse_float(value, lineno, col)
                    else:
                        raise NetlistParseError(f"unknown key {key!r}", lineno, col)
                missing = {"gate", "src", "drn"} - attrs.keys()
                if missing:
                    raise NetlistParseError(
                        f"valve missing {', '.join(sorted(missing))}", lineno, cols[0])
                valve = Valve(toks[1], attrs["gate"], attrs["src"], attrs["drn"],
                              g_open=attrs.get("g", DEFAULTS.g_open),
                              theta_open=attrs.get("topen", DEFAULTS.theta_open),
                              theta_close=attrs.get("tclose", DEFAULTS.theta_close))
                pending_valves.append((lineno, cols[0], valve))
            elif kw == "probe":
                if len(toks) != 3 or toks[1] not in ("node", "valve"):
                    raise NetlistParseError(
                        "expected `probe node <id>` or `probe valve <id>`", lineno, cols[0])
                pending_probes.append((lineno, cols[0], Probe(toks[1], toks[2])))
            elif kw == "cell":
                if len(toks) < 2:
                    raise NetlistParseError("expected `cell <KIND> ...`", lineno, cols[0])
                kind = toks[1]
                expander = CELL_EXPANDERS.get(kind)
                if expander is None:
                    raise NetlistParseError(f"unknown cell kind {kind!r}", lineno, cols[1])
                kwargs = {}
                for tok, col in zip(toks[2:], cols[2:]):
                    key, value = _split_kv(tok, lineno, col)
                    kwargs[key] = value
                cell_count += 1
                expander(b, kwargs, f"u{cell_count}.")
            else:
                raise NetlistParseError(f"unknown directive {kw!r}", lineno, cols[0])
        except NetlistParseError:
            raise
        except NetlistError as exc:
            raise NetlistParseError(str(exc), lineno, cols[0]) from exc

    # Deferred resolution: forward references are legal within one document.
    for lineno, col, a, bnode, g in pending_channels:
        for ref in (a, bnode):
            if not b.has_node(ref):
                raise NetlistParseError(f"undefined node {ref!r}", lineno, col)
        b.chan(a, bnode, g)
    for lineno, col, valve in pending_valves:
        for ref in (valve.gate, valve.source, valve.drain):
            if not b.has_node(ref):
                raise NetlistParseError(f"undefined node {ref!r}", lineno, col)
        try:
            b.valve(valve.id, valve.gate, valve.source, valve.drain,
                    g_open=valve.g_open, theta_open=valve.theta_open,
                    theta_close=valve.theta_close)
        except NetlistError as exc:
            raise NetlistParseError(str(exc), lineno, col) from exc
    for lineno, col, probe in pending_probes:
        if probe.kind == "node":
            if not b.has_node(probe.ref):
                raise NetlistParseError(f"undefined node {probe.ref!r}", lineno, col)
            b.probe_node(probe.ref)
        else:
            pending = {v.id for _, _, v in pending_valves}
            if probe.ref not in pending:
                raise NetlistParseError(f"undefined valve {probe.ref!r}", lineno, col)
            b.probe_valve(probe.ref)

    try:
        return b.build()
    except NetlistError as exc:
        raise NetlistParseError(str(exc), len(text.splitlines()) or 1) from exc


def _token_columns(line: str, toks: list[str]) -> list[int]:
    cols, start = [], 0
    for tok in toks:
        idx = line.index(tok, start)
        cols.append(idx + 1)
        start = idx + len(tok)
    return cols


def _fmt(x: float) -> str:
    return repr(x) if x != int(x) else str(int(x))


def serialize(net: Netlist) -> str:
    """Emit the text form; cells are already flattened so only primitives appear."""
    out = []
    for n in net.nodes:
        if n.rail is not None:
            out.append(f"rail {n.id} {n.rail}")
    for n in net.nodes:
        if n.rail is None:
            out.append(f"node {n.id} cap={_fmt(n.capacitance)}")
    for ch in net.channels:
        out.append(f"chan {ch.a} {ch.b} g={_fmt(ch.conductance)}")
    for v in net.valves:
        out.append(f"valve {v.id} gate={v.gate} src={v.source} drn={v.drain} "
                   f"g={_fmt(v.g_open)} topen={_fmt(v.theta_open)} tclose={_fmt(v.theta_close)}")
    for p in net.probes:
        out.append(f"probe {p.kind} {p.ref}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "warning" | "error"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[Diagnostic, ...]

    def __bool__(self) -> bool:
        return bool(self.entries)

    @property
    def errors(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.entries if d.severity == "error")


def validate(net: Netlist) -> ValidationReport:
    """Report-only lint: dangling nodes, unreachable nets, threshold order.

    An empty report means the netlist is well-formed. Reachability treats
    every valve as potentially open; nodes referenced only as gates or
    probes carry no flow and are exempt from the reachability check.
    """
    entries: list[Diagnostic] = []

    referenced: set[str] = set()
    conductive: dict[str, list[str]] = {n.id: [] for n in net.nodes}
    for ch in net.channels:
        referenced.update((ch.a, ch.b))
        conductive[ch.a].append(ch.b)
        conductive[ch.b].append(ch.a)
    for v in net.valves:
        referenced.update((v.gate, v.source, v.drain))
        conductive[v.source].append(v.drain)
        conductive[v.drain].append(v.source)

    for n in net.nodes:
        if n.rail is None and n.id not in referenced:
            entries.append(Diagnostic("warning", "dangling-node",
                                      f"dangling node {n.id!r}: no incident channel or valve"))

    # Flood from both rails through channels and potentially-open valves.
    reachable: set[str] = set()
    frontier = [net.vacuum, net.atmosphere]
    while frontier:
        cur = frontier.pop()
        if cur in reachable:
            continue
        reachable.add(cur)
        frontier.extend(conductive[cur])
    for n in net.nodes:
        if n.rail is None and conductive[n.id] and n.id not in reachable:
            entries.append(Diagnostic("warning", "unreachable-node",
                                      f"node {n.id!r} has no path to either rail"))

    for v in net.valves:
        if not (0.0 < v.theta_close < v.theta_open < 1.0):
            entries.append(Diagnostic(
                "error", "hysteresis-order",
                f"valve {v.id!r}: hysteresis order violated "
                f"(need 0 < tclose < topen < 1, got tclose={v.theta_close}, "
                f"topen={v.theta_open})"))
    return ValidationReport(tuple(entries))


def empty_netlist(vac: str = "VAC", atm: str = "ATM") -> Netlist:
    b = NetlistBuilder()
    b.rails(vac, atm)
    return b.build()


def merge(a: Netlist, b: Netlist, prefix: str) -> Netlist:
    """Disjoint union; b's non-rail ids are prefixed, rails are shared.

    Probes are concatenated (a's first). Collisions after prefixing are
    errors.
    """
    out = NetlistBuilder(metadata=dict(a.metadata))
    for key, value in b.metadata.items():
        out.metadata.setdefault(prefix + key, value)

    rail_map = {b.vacuum: a.vacuum, b.atmosphere: a.atmosphere}

    def rename(ref: str) -> str:
        return rail_map[ref] if ref in rail_map else prefix + ref

    for n in a.nodes:
        out._add_node(n)
    for ch in a.channels:
        out.chan(ch.a, ch.b, ch.conductance)
    for v in a.valves:
        out.valve(v.id, v.gate, v.source, v.drain, g_open=v.g_open,
                  theta_open=v.theta_open, theta_close=v.theta_close,
                  initial_open=v.initial_open)

    for n in b.nodes:
        if n.rail is not None:
            continue
        new_id = prefix + n.id
        if out.has_node(new_id):
            raise NetlistError(f"merge collision on node id {new_id!r}")
        out.node(new_id, cap=n.capacitance)
    for ch in b.channels:
        out.chan(rename(ch.a), rename(ch.b), ch.conductance)
    for v in b.valves:
        try:
            out.valve(prefix + v.id, rename(v.gate), rename(v.source), rename(v.drain),
                      g_open=v.g_open, theta_open=v.theta_open,
                      theta_close=v.theta_close, initial_open=v.initial_open)
        except NetlistError as exc:
            raise NetlistError(f"merge collision on valve id {prefix + v.id!r}") from exc

    for p in a.probes:
        (out.probe_node if p.kind == "node" else out.probe_valve)(p.ref)
    for p in b.probes:
        if p.kind == "node":
            out.probe_node(rename(p.ref))
        else:
            out.probe_valve(prefix + p.ref)
    return out.build()
