"""NAND-NAND programmable logic array: hole-pattern model, membrane file
format, Boolean evaluation oracle, and valve-level expansion.

The shipped device profile is fixed at 6 literal columns (S1, S1n, S0, S0n,
A, An), 4 product rows, 2 outputs (N1, N0), and fan-in 3 on every gate, so
capacity errors match the physical array. The shape is parameterized
internally for clarity, not as a supported extension point.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import DEFAULTS, Params
from .errors import CapacityError, MembraneFormatError
from .netlist import Netlist, NetlistBuilder
from .stdcells import nand_gate

LITERALS = ("S1", "S1n", "S0", "S0n", "A", "An")
PRODUCT_NAMES = ("P1", "P2", "P3", "P4")
OUTPUT_NAMES = ("N1", "N0")


@dataclass(frozen=True)
class PlaShape:
    num_literals: int = 6
    num_products: int = 4
    num_outputs: int = 2
    max_and_fanin: int = 3
    max_or_fanin: int = 3


DEVICE_SHAPE = PlaShape()


@dataclass(frozen=True)
class HolePattern:
    """Bore-hole matrices: and_plane[row][col] selects a literal for a
    product row; or_plane[out][row] selects a product for an output."""
    and_plane: tuple[tuple[bool, ...], ...]
    or_plane: tuple[tuple[bool, ...], ...]
    shape: PlaShape = DEVICE_SHAPE

    def __post_init__(self):
        s = self.shape
        if len(self.and_plane) != s.num_products or any(
                len(row) != s.num_literals for row in self.and_plane):
            raise MembraneFormatError(
                f"and-plane must be {s.num_products}x{s.num_literals}")
        if len(self.or_plane) != s.num_outputs or any(
                len(row) != s.num_products for row in self.or_plane):
            raise MembraneFormatError(
                f"or-plane must be {s.num_outputs}x{s.num_products}")
        for i, row in enumerate(self.and_plane):
            if sum(row) > s.max_and_fanin:
                raise CapacityError(f"and-plane row {PRODUCT_NAMES[i]} holes",
                                    sum(row), s.max_and_fanin)
        for i, row in enumerate(self.or_plane):
            if sum(row) > s.max_or_fanin:
                raise CapacityError(f"or-plane row {OUTPUT_NAMES[i]} holes",
                                    sum(row), s.max_or_fanin)

    @classmethod
    def from_holes(cls, and_holes: Sequence[Sequence[int]],
                   or_holes: Sequence[Sequence[int]],
                   shape: PlaShape = DEVICE_SHAPE) -> "HolePattern":
        """Build from per-row lists of selected column indices."""
        ap = tuple(tuple(c in set(row) for c in range(shape.num_literals))
                   for row in and_holes)
        op = tuple(tuple(r in set(row) for r in range(shape.num_products))
                   for row in or_holes)
        return cls(ap, op, shape)

    def product_empty(self, row: int) -> bool:
        return not any(self.and_plane[row])


def empty_pattern(shape: PlaShape = DEVICE_SHAPE) -> HolePattern:
    return HolePattern.from_holes([[] for _ in range(shape.num_products)],
                                  [[] for _ in range(shape.num_outputs)], shape)


def eval_pattern(pattern: HolePattern, s1: int, s0: int, a: int) -> tuple[int, int]:
    """Pure Boolean oracle: product = AND of selected literals (an empty row
    is constant 0 by the tie-off convention); output = OR of its products."""
    lits = (s1, 1 - s1, s0, 1 - s0, a, 1 - a)
    products = []
    for row in pattern.and_plane:
        if not any(row):
            products.append(0)
        else:
            products.append(int(all(lits[c] for c, hole in enumerate(row) if hole)))
    outs = tuple(int(any(products[r] for r, hole in enumerate(row) if hole))
                 for row in pattern.or_plane)
    return outs  # (n1, n0)


def expand_pla(b: NetlistBuilder, pattern: HolePattern,
               literals: Sequence[str], outputs: Sequence[str],
               name: str = "pla", p: Params = DEFAULTS) -> None:
    """Expand onto a builder: four product NAND3s feeding two output NAND3s,
    18 valves for every legal pattern.

    Unused NAND inputs are tied to the vacuum rail (logic 1, the NAND
    identity). An or-plane hole on an empty product row is likewise tied
    off, so inert rows never mask an output.
    """
    s = pattern.shape
    if len(literals) != s.num_literals or len(outputs) != s.num_outputs:
        raise MembraneFormatError("port binding does not match the array shape")
    for lit in literals:
        b.node(lit)
    vac = b.vacuum
    product_out = []
    for row in range(s.num_products):
        gates = [literals[c] for c, hole in enumerate(pattern.and_plane[row]) if hole]
        gates += [vac] * (s.max_and_fanin - len(gates))
        out = f"{name}.p{row}"
        nand_gate(b, gates, out, f"{name}.and{row}", p)
        product_out.append(out)
    for oi in range(s.num_outputs):
        gates = [product_out[r]
                 for r, hole in enumerate(pattern.or_plane[oi])
                 if hole and not pattern.product_empty(r)]
        gates += [vac] * (s.max_or_fanin - len(gates))
        nand_gate(b, gates, outputs[oi], f"{name}.or{oi}", p)


def expand_pla_standalone(pattern: HolePattern,
                          p: Params = DEFAULTS) -> tuple[Netlist, list[str], list[str]]:
    """Fragment with canonical port names; returns (netlist, literal ids, output ids)."""
    b = NetlistBuilder()
    b.rails()
    lits = list(LITERALS)
    outs = list(OUTPUT_NAMES)
    for lit in lits:
        b.node(lit)
    expand_pla(b, pattern, lits, outs, "pla", p)
    for out in outs:
        b.probe_node(out)
    return b.build(), lits, outs


# ---------------------------------------------------------------------------
# Membrane file format

MEMBRANE_HEADER = "MEMBRANE v1"


def encode_membrane(pattern: HolePattern) -> str:
    lines = [MEMBRANE_HEADER, "literals: " + " ".join(LITERALS)]
    for i, row in enumerate(pattern.and_plane):
        toks = [LITERALS[c] for c, hole in enumerate(row) if hole]
        lines.append(f"AND {PRODUCT_NAMES[i]}:" + (" " + " ".join(toks) if toks else ""))
    for i, row in enumerate(pattern.or_plane):
        toks = [PRODUCT_NAMES[r] for r, hole in enumerate(row) if hole]
        lines.append(f"OR {OUTPUT_NAMES[i]}:" + (" " + " ".join(toks) if toks else ""))
    return "\n".join(lines) + "\n"


def decode_membrane(text: str) -> HolePattern:
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != MEMBRANE_HEADER:
        raise MembraneFormatError(f"missing `{MEMBRANE_HEADER}` header")
    expected = (["literals: " + " ".join(LITERALS)] +
                [f"AND {nm}" for nm in PRODUCT_NAMES] +
                [f"OR {nm}" for nm in OUTPUT_NAMES])
    if len(lines) != 1 + len(expected):
        raise MembraneFormatError(
            f"expected {1 + len(expected)} lines, found {len(lines)}")
    if lines[1].strip() != expected[0]:
        raise MembraneFormatError(f"bad literals line: {lines[1]!r}")

    and_holes: list[list[int]] = []
    or_holes: list[list[int]] = []
    lit_index = {nm: i for i, nm in enumerate(LITERALS)}
    prod_index = {nm: i for i, nm in enumerate(PRODUCT_NAMES)}
    for lineno, (line, want) in enumerate(zip(lines[2:], expected[1:]), 3):
        head, sep, rhs = line.partition(":")
        if head.strip() != want or not sep:
            raise MembraneFormatError(f"line {lineno}: expected `{want}: ...`")
        toks = rhs.split()
        if want.startswith("AND"):
            cols = []
            for tok in toks:
                if tok not in lit_index:
                    raise MembraneFormatError(f"line {lineno}: unknown literal {tok!r}")
                if lit_index[tok] in cols:
                    raise MembraneFormatError(f"line {lineno}: duplicate literal {tok!r}")
                cols.append(lit_index[tok])
            if len(cols) > DEVICE_SHAPE.max_and_fanin:
                raise CapacityError(f"and-plane row {want.split()[1]} holes",
                                    len(cols), DEVICE_SHAPE.max_and_fanin)
            and_holes.append(cols)
        else:
            rows = []
            for tok in toks:
                if tok not in prod_index:
                    raise MembraneFormatError(f"line {lineno}: unknown product {tok!r}")
                if prod_index[tok] in rows:
                    raise MembraneFormatError(f"line {lineno}: duplicate product {tok!r}")
                rows.append(prod_index[tok])
            if len(rows) > DEVICE_SHAPE.max_or_fanin:
                raise CapacityError(f"or-plane row {want.split()[1]} holes",
                                    len(rows), DEVICE_SHAPE.max_or_fanin)
            or_holes.append(rows)
    return HolePattern.from_holes(and_holes, or_holes)
