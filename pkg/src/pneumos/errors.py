"""Exception types shared across the toolkit."""


class PneumosError(Exception):
    """Base class for all toolkit errors."""


class NetlistError(PneumosError):
    """Structural problem in a netlist (bad reference, duplicate id, missing rail)."""


class NetlistParseError(NetlistError):
    """Syntax error in the netlist text format; carries line/column."""

    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class OscillationDetected(PneumosError):
    """Quasi-static evaluation found no valve-state fixpoint.

    ``cycle`` holds the repeating sequence of valve-state maps.
    """

    def __init__(self, cycle):
        super().__init__(
            f"no combinational fixpoint; valve states cycle with length {len(cycle)}"
        )
        self.cycle = cycle


class StabilityError(PneumosError):
    """Requested integration step violates the explicit-integration guard."""


class MembraneFormatError(PneumosError):
    """Malformed membrane file or fan-in violation."""


class CapacityError(PneumosError):
    """Logic does not fit the fixed array shape.

    ``limit`` names the violated resource, ``needed``/``available`` quantify it.
    """

    def __init__(self, limit: str, needed: int, available: int):
        super().__init__(f"{limit} {needed} > {available}")
        self.limit = limit
        self.needed = needed
        self.available = available


class FsmError(PneumosError):
    """Problem in a state-machine program (syntax, totality, duplicates).

    ``line`` is the 1-based source line of the offending directive, or None
    for whole-program problems (e.g. a missing declaration).
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class FluidicsError(PneumosError):
    """Invalid liquid-handling operation (bad state code, gating violation)."""
