"""Line-oriented run configuration.

A configuration is a text document of ``key = value`` lines; ``#`` starts a
comment and blank lines are ignored. Keys not given take the defaults of the
selected experiment (see :data:`DEFAULTS`). Lists are comma separated.

Keys
----
experiment       convergence | energy_audit | epsilon_sweep | channel_demo
output_dir       directory for CSV, VTK and the run manifest
time_scheme      backward_euler | midpoint
formulation      weighted | theta
element_pair     P2P1 | P1P1_stabilized
family           power | tanh
beta             exponent of the power family, in (0, 1)
quad_degree      quadrature exactness (1, 2, 4 or 6)
layer_levels     refinement levels of the layer quadrature (0 disables it)
rho_F rho_B mu_F mu_B lambda_B alpha c0 kappa alpha_BJ gamma_stab
                 physical coefficients
young_modulus poisson_ratio
                 optional alternative to mu_B, lambda_B (give both)
levels           convergence ladder as cells per unit length, e.g. 5,10,20,40
dt_factor        time step as a multiple of h
epsilon_factor   layer width as a multiple of h
delta            regularization on the coarsest level (halved per level)
final_time       end time
n                mesh resolution (energy audit, epsilon sweep)
dt               time step (energy audit, epsilon sweep, channel demo)
epsilons         epsilon ladder of the sweep
with_divergence  include the divergence source in the energy audit (true/false)
epsilon          layer width of the channel demo
length half_height radius nx ny inflow_traction max_steps steady_tol
                 channel demo geometry, mesh and stopping rule
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .mesh import Rect
from .phasefield import FAMILIES, InterfaceGeometry, PhaseField, WeightFamily
from .stokes_biot import ELEMENT_PAIRS, FORMULATIONS, TIME_SCHEMES, PhysicalParams, SchemeConfig

EXPERIMENTS = ("convergence", "energy_audit", "epsilon_sweep", "channel_demo")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based, 0 when no single line is at fault."""

    def __init__(self, message, line=0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "convergence"
    output_dir: str = "output"
    time_scheme: str = "backward_euler"
    formulation: str = "weighted"
    element_pair: str = "P2P1"
    family: str = "tanh"
    beta: float = 0.9
    quad_degree: int = 4
    layer_levels: int = 3
    rho_F: float = 1.0
    rho_B: float = 1.0
    mu_F: float = 1.0
    mu_B: float = 1.0
    lambda_B: float = 1.0
    alpha: float = 1.0
    c0: float = 1.0
    kappa: float = 1.0
    alpha_BJ: float = 1.0
    gamma_stab: float = 0.0
    levels: tuple = (5, 10, 20, 40)
    dt_factor: float = 0.5
    epsilon_factor: float = 1.0
    delta: float = 1e-3
    final_time: float = 0.8
    n: int = 10
    dt: float = 0.05
    epsilons: tuple = (0.2, 0.1, 0.05)
    with_divergence: bool = False
    epsilon: float = 0.005
    length: float = 1.0
    half_height: float = 0.2
    radius: float = 0.1
    nx: int = 100
    ny: int = 40
    inflow_traction: float = 10.0
    max_steps: int = 200
    steady_tol: float = 1e-6

    # -- derived objects ----------------------------------------------------
    def params(self) -> PhysicalParams:
        names = [f.name for f in fields(PhysicalParams)]
        return PhysicalParams(**{k: getattr(self, k) for k in names})

    def scheme(self, dt: float, T: float) -> SchemeConfig:
        return SchemeConfig(self.time_scheme, self.formulation, self.element_pair, dt, T,
                            quad_degree=self.quad_degree, layer_levels=self.layer_levels)

    def weight_family(self) -> WeightFamily:
        return WeightFamily(self.family, self.beta)

    def channel_geometry(self):
        """``(Rect, InterfaceGeometry)`` of the channel demo, centred at ``y = 0``."""
        rect = Rect(0.0, self.length, -self.half_height, self.half_height)
        geom = InterfaceGeometry("channel_band", radius=self.radius, center=(0.5 * self.length, 0.0))
        return rect, geom

    def channel_phasefield(self) -> PhaseField:
        return PhaseField(self.channel_geometry()[1], self.weight_family(), self.epsilon, self.delta)


_CHOICES = {
    "experiment": EXPERIMENTS,
    "time_scheme": TIME_SCHEMES,
    "formulation": FORMULATIONS,
    "element_pair": ELEMENT_PAIRS,
    "family": FAMILIES,
}
_POSITIVE = {
    "rho_F", "rho_B", "mu_F", "mu_B", "lambda_B", "c0", "kappa", "alpha_BJ", "dt_factor",
    "epsilon_factor", "final_time", "dt", "epsilon", "length", "half_height", "radius",
    "steady_tol", "young_modulus",
}
_EXTRA = ("young_modulus", "poisson_ratio")

_TABLE5 = dict(
    rho_F=1.0, rho_B=1.0, mu_F=0.035, alpha=1.0, c0=1e-3, kappa=1e-5, alpha_BJ=10.0,
    gamma_stab=2e-3,
)

DEFAULTS = {
    "convergence": {},
    "energy_audit": dict(formulation="theta", n=10, dt=0.05, final_time=0.8),
    "epsilon_sweep": dict(n=40, dt=1.0 / 80.0, epsilons=(0.2, 0.1, 0.05), final_time=0.8),
    "channel_demo": dict(
        element_pair="P1P1_stabilized", family="tanh", dt=0.05, epsilon=0.005,
        **_TABLE5, **dict(zip(("mu_B", "lambda_B"), PhysicalParams.lame_from_young(5e5, 0.49))),
    ),
}


def _field_types():
    return {f.name: type(f.default) for f in fields(RunConfig)}


def _convert(key, raw, line):
    types = _field_types()
    kind = float if key in _EXTRA else types[key]
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError("expected true or false")
            return low == "true"
        if kind is tuple:
            items = [s.strip() for s in raw.split(",")]
            if not items or any(not s for s in items):
                raise ValueError("empty list entry")
            conv = int if key == "levels" else float
            vals = tuple(conv(s) for s in items)
        elif kind is int:
            vals = int(raw)
        elif kind is float:
            vals = float(raw)
        else:
            vals = raw
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}: {exc}", line) from None
    for v in vals if isinstance(vals, tuple) else (vals,):
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"{key} must be finite", line)
    return vals


def _check_value(key, v, line):
    def bad(msg):
        raise ConfigError(f"{key} {msg}, got {v!r}", line)

    if key in _CHOICES and v not in _CHOICES[key]:
        bad(f"must be one of {', '.join(_CHOICES[key])}")
    if key in _POSITIVE and not v > 0:
        bad("must be positive")
    if key == "beta" and not 0.0 < v < 1.0:
        bad("must lie in (0, 1)")
    if key == "alpha" and not 0.0 < v <= 1.0:
        bad("must lie in (0, 1]")
    if key == "poisson_ratio" and not -1.0 < v < 0.5:
        bad("must lie in (-1, 1/2)")
    if key == "gamma_stab" and v < 0:
        bad("must be nonnegative")
    if key == "delta" and not 0.0 <= v <= 0.5:
        bad("must lie in [0, 1/2]")
    if key == "quad_degree" and v not in (1, 2, 4, 6):
        bad("must be 1, 2, 4 or 6")
    if key == "layer_levels" and v < 0:
        bad("must be nonnegative")
    if key in ("n", "nx", "ny", "max_steps") and v < 1:
        bad("must be at least 1")
    if key == "levels":
        if any(n < 1 for n in v):
            bad("entries must be positive")
        if any(b != 2 * a for a, b in zip(v[:-1], v[1:])):
            bad("must refine by a factor of 2 between entries")
    if key == "epsilons":
        if any(e <= 0 for e in v):
            bad("entries must be positive")
        if any(b >= a for a, b in zip(v[:-1], v[1:])):
            bad("must be strictly decreasing")


def parse_config(text: str) -> RunConfig:
    """Parse a configuration document; raises :class:`ConfigError` on the first bad line."""
    entries = {}
    lines_of = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in _field_types() and key not in _EXTRA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines_of[key]})", lineno)
        v = _convert(key, value, lineno)
        _check_value(key, v, lineno)
        entries[key] = v
        lines_of[key] = lineno

    if ("young_modulus" in entries) != ("poisson_ratio" in entries):
        k = "young_modulus" if "young_modulus" in entries else "poisson_ratio"
        raise ConfigError("young_modulus and poisson_ratio must be given together", lines_of[k])
    if "young_modulus" in entries:
        for k in ("mu_B", "lambda_B"):
            if k in entries:
                raise ConfigError(f"{k} conflicts with young_modulus/poisson_ratio", lines_of[k])
        E, nu = entries.pop("young_modulus"), entries.pop("poisson_ratio")
        entries["mu_B"], entries["lambda_B"] = PhysicalParams.lame_from_young(E, nu)

    experiment = entries.get("experiment", "convergence")
    values = {**DEFAULTS[experiment], **entries, "experiment": experiment}
    return RunConfig(**values)


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Full ``key = value`` listing; :func:`parse_config` maps it back to an equal config."""
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(RunConfig))
