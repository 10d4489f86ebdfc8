"""Engine and cell default parameters, overridable via a key=value config file.

The config file path can be given explicitly or through the PNEUMOS_CONFIG
environment variable.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace, fields

ENV_VAR = "PNEUMOS_CONFIG"


@dataclass(frozen=True)
class Params:
    g_pull_up: float = 1.0        # pull-up channel conductance
    g_open: float = 100.0         # open-valve conductance (100:1 ratio vs pull-up)
    cap: float = 1.0              # default node capacitance
    theta_open: float = 0.75      # gate pressure at which a valve opens
    theta_close: float = 0.65     # gate pressure at which a valve closes
    dt: float = 1e-3              # default integration step
    pump_quantum: float = 0.05    # displaced volume fraction per pump cycle (1/20)
    n_mix: int = 30               # pump cycles until homogenized

    def with_overrides(self, **kw) -> "Params":
        return replace(self, **kw)


DEFAULTS = Params()


def load_params(path: str | None = None) -> Params:
    """Build Params from defaults plus an optional key=value file.

    Lookup order: explicit ``path`` argument, then the PNEUMOS_CONFIG
    environment variable, then pure defaults. Unknown keys are errors.
    """
    if path is None:
        path = os.environ.get(ENV_VAR)
    if path is None:
        return DEFAULTS
    valid = {f.name: f.type for f in fields(Params)}
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in valid:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            overrides[key] = int(value) if key == "n_mix" else float(value)
    return DEFAULTS.with_overrides(**overrides)
