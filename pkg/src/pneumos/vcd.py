"""Value-change-dump export for waveforms.

Time values are integration step indices; the declared timescale is one
simulation unit (the model has no physical time base).
"""
from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .engine import LogicLevel, LogicTracker, Waveform

_ID_FIRST = 33  # '!'
_ID_LAST = 126  # '~'


def _id_code(n: int) -> str:
    chars = []
    n += 1
    while n > 0:
        n, rem = divmod(n - 1, _ID_LAST - _ID_FIRST + 1)
        chars.append(chr(_ID_FIRST + rem))
    return "".join(reversed(chars))


_LEVEL_CHAR = {LogicLevel.ZERO: "0", LogicLevel.ONE: "1", LogicLevel.UNKNOWN: "x"}


def export_vcd(wave: Waveform, signals: Optional[Iterable[str]] = None,
               scope: str = "chip") -> str:
    """Render probed signals as a standard value change dump.

    Node pressures are reduced to 0/1/x with the hysteretic readout (a level
    holds through the unknown band once established), so one clean swing is
    one value change. Probed valves dump as 0/1 wires. ``signals`` selects a
    subset; default is everything in the waveform.
    """
    if wave.n_samples == 0 and not wave.valve_series:
        raise ValueError("empty waveform")
    names = list(signals) if signals is not None else (
        list(wave.series) + list(wave.valve_series))
    unknown = [s for s in names if s not in wave.series and s not in wave.valve_series]
    if unknown:
        raise KeyError(f"signals not in waveform: {unknown}")

    lines = ["$version pneumos $end",
             "$comment 1 time unit = 1 integration step $end",
             "$timescale 1 us $end",
             f"$scope module {scope} $end"]
    codes = {}
    for i, name in enumerate(names):
        codes[name] = _id_code(i)
        lines.append(f"$var wire 1 {codes[name]} {name} $end")
    lines.append("$upscope $end")
    lines.append("$enddefinitions $end")

    trackers = {}
    lines.append("$dumpvars")
    for name in names:
        if name in wave.series:
            trackers[name] = LogicTracker(float(wave.series[name][0]))
            lines.append(f"{_LEVEL_CHAR[trackers[name].level]}{codes[name]}")
        else:
            lines.append(f"{'1' if wave.valve_series[name][0] else '0'}{codes[name]}")
    lines.append("$end")

    n = max([wave.n_samples] + [s.shape[0] for s in wave.valve_series.values()])
    valve_prev = {name: bool(wave.valve_series[name][0])
                  for name in names if name in wave.valve_series}
    for i in range(1, n):
        changes = []
        for name in names:
            if name in wave.series:
                change = trackers[name].update(float(wave.series[name][i]))
                if change:
                    changes.append(f"{_LEVEL_CHAR[change[1]]}{codes[name]}")
            else:
                cur = bool(wave.valve_series[name][i])
                if cur != valve_prev[name]:
                    valve_prev[name] = cur
                    changes.append(f"{'1' if cur else '0'}{codes[name]}")
        if changes:
            lines.append(f"#{i}")
            lines.extend(changes)
    lines.append(f"#{n - 1}")
    return "\n".join(lines) + "\n"


def parse_vcd(text: str) -> dict[str, list[tuple[int, str]]]:
    """Minimal reader for dumps produced here: signal -> [(time, value)].

    Used by verification code and tests to compare traces without trusting
    the writer's change detection.
    """
    names: dict[str, str] = {}
    changes: dict[str, list[tuple[int, str]]] = {}
    time = 0
    in_defs = True
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if in_defs:
            if line.startswith("$var"):
                parts = line.split()
                names[parts[3]] = parts[4]
                changes[parts[4]] = []
            elif line.startswith("$enddefinitions"):
                in_defs = False
            continue
        if line.startswith("#"):
            time = int(line[1:])
        elif line in ("$dumpvars", "$end") or line.startswith("$"):
            continue
        else:
            value, code = line[0], line[1:]
            name = names.get(code)
            if name is not None:
                changes[name].append((time, value))
    return changes
