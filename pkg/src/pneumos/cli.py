"""Command-line surface: compile, simulate, truthtable, demo, serve.

Exit codes are stable: 0 success, 1 verification failure, 2 usage or parse
error, 3 capacity error.
"""
from __future__ import annotations

import sys
from typing import Optional

import click

from . import fluidics, fsmc, pla, service
from .config import DEFAULTS, Params, load_params
from .engine import LogicLevel, Stimulus, run_quasistatic, run_timed, truth_table_inputs
from .errors import CapacityError, PneumosError
from .netlist import parse_netlist
from .vcd import export_vcd

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_CAPACITY = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="key=value parameter file (or set PNEUMOS_CONFIG).")
@click.pass_context
def main(ctx, config_path):
    """Pneumatic logic toolchain: FSM compiler, valve-level simulator,
    and liquid-handling demos."""
    try:
        ctx.obj = load_params(config_path)
    except (OSError, PneumosError, ValueError) as exc:
        _fail(EXIT_USAGE, str(exc))


@main.command("compile")
@click.argument("fsm_file", type=click.Path())
@click.option("-o", "--output", type=click.Path(), default=None,
              help="Membrane file destination (default: stdout).")
@click.option("--table", "show_table", is_flag=True,
              help="Print the 8-row transition table.")
@click.option("--sop", "show_sop", is_flag=True,
              help="Print the minimized next-state equations.")
@click.pass_obj
def cmd_compile(params: Params, fsm_file, output, show_table, show_sop):
    """Compile a state-machine program to a membrane hole pattern."""
    try:
        with open(fsm_file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        _fail(EXIT_USAGE, str(exc))
    try:
        result = fsmc.compile_program(text)
    except CapacityError as exc:
        _fail(EXIT_CAPACITY, str(exc))
    except PneumosError as exc:
        _fail(EXIT_USAGE, str(exc))
    if show_table:
        click.echo(fsmc.table_pretty(result.table))
    if show_sop:
        click.echo(result.equations.pretty())
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(result.membrane)
    else:
        click.echo(result.membrane, nl=False)


def _parse_clock(spec: str) -> tuple[str, float, float, float]:
    parts = spec.split()
    if not parts:
        raise click.UsageError("empty clock spec")
    node = parts[0]
    kw = {"duty": 0.5, "phase": 0.0}
    for tok in parts[1:]:
        if "=" not in tok:
            raise click.UsageError(f"bad clock token {tok!r}, expected key=value")
        key, _, val = tok.partition("=")
        if key not in ("period", "duty", "phase"):
            raise click.UsageError(f"unknown clock key {key!r}")
        kw[key] = float(val)
    if "period" not in kw:
        raise click.UsageError(f"clock spec {spec!r} needs period=...")
    return node, kw["period"], kw["duty"], kw["phase"]


def _parse_stimulus(path: str, stim: Stimulus):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#") or line.lower().startswith("time"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise click.UsageError(
                    f"{path}:{lineno}: expected 'time node value'")
            t, node, val = float(parts[0]), parts[1], parts[2]
            if val == "z":
                stim.drive(t, node, None)
            elif val in ("0", "1"):
                stim.drive(t, node, float(val))
            else:
                raise click.UsageError(
                    f"{path}:{lineno}: value must be 0, 1 or z, got {val!r}")


@main.command("simulate")
@click.argument("netlist_file", type=click.Path(), required=False)
@click.option("--membrane", "membrane_file", type=click.Path(), default=None,
              help="Build the standard chip (register + array) from this membrane.")
@click.option("--clock", "clocks", multiple=True,
              help='Clock spec, e.g. "clk period=16 duty=0.5".')
@click.option("--stimulus", "stimulus_file", type=click.Path(), default=None,
              help="TSV of 'time node value' rows (value 0, 1 or z).")
@click.option("--vcd", "vcd_file", type=click.Path(), default=None,
              help="Write a value-change dump of the probed signals.")
@click.option("--t-end", type=float, default=100.0, show_default=True)
@click.option("--dt", type=float, default=None,
              help="Integration step (default from parameters).")
@click.pass_obj
def cmd_simulate(params: Params, netlist_file, membrane_file, clocks,
                 stimulus_file, vcd_file, t_end, dt):
    """Run the timed simulator and dump probed logic events.

    Takes either a netlist file or --membrane; with --membrane the full
    machine is assembled around the pattern with the register preloaded
    to state 00.
    """
    if (netlist_file is None) == (membrane_file is None):
        raise click.UsageError("give exactly one of NETLIST_FILE or --membrane")
    dt = params.dt if dt is None else dt
    initial = None
    try:
        if membrane_file is not None:
            with open(membrane_file, encoding="utf-8") as fh:
                pattern = pla.decode_membrane(fh.read())
            net, ports = fsmc.build_chip(pattern, params)
            initial = fsmc.state_initial_pressures(ports, "00")
        else:
            with open(netlist_file, encoding="utf-8") as fh:
                net = parse_netlist(fh.read())
    except OSError as exc:
        _fail(EXIT_USAGE, str(exc))
    except PneumosError as exc:
        _fail(EXIT_USAGE, str(exc))

    stim = Stimulus()
    try:
        for spec in clocks:
            node, period, duty, phase = _parse_clock(spec)
            stim.clock(node, period, duty, phase)
        if stimulus_file:
            _parse_stimulus(stimulus_file, stim)
    except ValueError as exc:
        raise click.UsageError(str(exc))

    record = [p.ref for p in net.probes if p.kind == "node"]
    if not record:
        _fail(EXIT_USAGE, "netlist has no node probes")
    try:
        wave = run_timed(net, stim, t_end, dt, initial=initial, record=record)
    except PneumosError as exc:
        _fail(EXIT_USAGE, str(exc))
    click.echo("time\tsignal\tlevel")
    for ev in wave.events:
        click.echo(f"{ev.time:.6f}\t{ev.signal}\t{ev.new.value}")
    if vcd_file:
        with open(vcd_file, "w", encoding="utf-8") as fh:
            fh.write(export_vcd(wave))


@main.command("truthtable")
@click.option("--membrane", "membrane_file", type=click.Path(), required=True)
@click.option("--tamper", is_flag=True, hidden=True,
              help="Fault-injection hook: flip one array connection.")
@click.pass_obj
def cmd_truthtable(params: Params, membrane_file, tamper):
    """Print the 8-row truth table from valve-level simulation next to the
    Boolean oracle; exit 1 if they disagree."""
    try:
        with open(membrane_file, encoding="utf-8") as fh:
            pattern = pla.decode_membrane(fh.read())
    except OSError as exc:
        _fail(EXIT_USAGE, str(exc))
    except PneumosError as exc:
        _fail(EXIT_USAGE, str(exc))
    sim_pattern = pattern
    if tamper:
        or_plane = [list(row) for row in pattern.or_plane]
        or_plane[0][0] = not or_plane[0][0]
        sim_pattern = pla.HolePattern(pattern.and_plane,
                                      tuple(tuple(r) for r in or_plane))
    net, lits, outs = pla.expand_pla_standalone(sim_pattern, params)
    click.echo("S1 S0 A | N1 N0 | oracle")
    mismatch = False
    for s1, s0, a in truth_table_inputs(3):
        inputs = {"S1": s1, "S1n": 1 - s1, "S0": s0, "S0n": 1 - s0,
                  "A": a, "An": 1 - a}
        result = run_quasistatic(net, inputs)
        levels = [result.logic(o) for o in outs]
        if LogicLevel.UNKNOWN in levels:
            _fail(EXIT_VERIFY_FAIL, f"indeterminate output at {s1}{s0}{a}")
        got = tuple(lv.value for lv in levels)
        want = pla.eval_pattern(pattern, s1, s0, a)
        mark = "" if got == want else "   <-- MISMATCH"
        click.echo(f" {s1}  {s0} {a} |  {got[0]}  {got[1]} |  {want[0]}  {want[1]}{mark}")
        if got != want:
            mismatch = True
    if mismatch:
        sys.exit(EXIT_VERIFY_FAIL)


def _read_script(path: str) -> list[tuple[float, str]]:
    script = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#") or line.lower().startswith("time"):
                continue
            parts = line.split()
            if len(parts) != 2 or parts[1] not in ("press", "release"):
                raise click.UsageError(
                    f"{path}:{lineno}: expected 'time press|release'")
            script.append((float(parts[0]), parts[1]))
    return script


@main.command("demo")
@click.argument("which", type=click.Choice(["mixer", "dilution"]))
@click.option("--script", "script_file", type=click.Path(), default=None,
              help="TSV of 'time press|release' button actions (mixer).")
@click.option("--t-end", type=float, default=None,
              help="Stop time for scripted mixer runs.")
@click.option("--history", "history_file", type=click.Path(), default=None,
              help="Write the composition history TSV here.")
@click.option("--serve", "serve_flag", is_flag=True,
              help="Start the interactive panel service instead.")
@click.option("--port", type=int, default=7071, show_default=True)
@click.option("--pacing", type=float, default=0.1, show_default=True,
              help="Wall seconds per simulated time unit when serving.")
@click.pass_obj
def cmd_demo(params: Params, which, script_file, t_end, history_file,
             serve_flag, port, pacing):
    """Run an embedded liquid-handling demo, scripted or interactive."""
    if serve_flag:
        click.echo(f"panel service listening on 127.0.0.1:{port}", err=True)
        service.serve(port=port, params=params, pacing=pacing)
        return
    try:
        if which == "dilution":
            result = fluidics.run_dilution(params=params)
            ladder = result.session.plant
            click.echo("rung\tconcentration")
            for k, conc in enumerate(ladder.concentrations()):
                click.echo(f"{k}\t{conc:.9f}")
        else:
            if script_file is None:
                raise click.UsageError("mixer demo needs --script (or --serve)")
            script = _read_script(script_file)
            result = fluidics.run_mixer_script(script, t_end=t_end, params=params)
            comp = result.session.plant.composition()
            click.echo("source\tfraction")
            for label in sorted(comp):
                click.echo(f"{label}\t{comp[label]:.9f}")
    except OSError as exc:
        _fail(EXIT_USAGE, str(exc))
    except PneumosError as exc:
        _fail(EXIT_USAGE, str(exc))
    if history_file:
        with open(history_file, "w", encoding="utf-8") as fh:
            fh.write(fluidics.history_tsv(result.history))


@main.command("serve")
@click.option("--port", type=int, default=7071, show_default=True)
@click.option("--pacing", type=float, default=0.1, show_default=True)
@click.pass_obj
def cmd_serve(params: Params, port, pacing):
    """Start the panel session service (newline-delimited JSON over TCP)."""
    click.echo(f"panel service listening on 127.0.0.1:{port}", err=True)
    service.serve(port=port, params=params, pacing=pacing)


if __name__ == "__main__":
    main()
