"""Drivers for the convergence ladder, energy audit, epsilon sweep and channel demo.

Each driver takes a :class:`~diffuse_biot.config.RunConfig`, writes its
outputs under ``config.output_dir`` and returns the computed data.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ConvergenceRow,
    ConvergenceTable,
    ERROR_NAMES,
    convergence_rates,
    energy_audit,
    weighted_error_norms,
)
from .channel import ChannelData, SteadyStateMonitor, fluid_speed_max
from .config import RunConfig, serialize_config
from .mesh import Rect, build_structured_mesh
from .mms import ExactSolution, ForcingOnlyData, ManufacturedData
from .phasefield import InterfaceGeometry, PhaseField
from .stokes_biot import SimulationConfig, run_simulation, recover_pi_from_theta
from .vtk import check_vtk, write_vtk

log = logging.getLogger(__name__)

CSV_HEADER = "h,dt,e_u,rate_u,e_p,rate_p,e_dteta,rate_dteta,e_eta,rate_eta"
SWEEP_HEADER = "epsilon,h,dt,e_u,e_p,e_dteta,e_eta"
MMS_DOMAIN = Rect(0.0, 1.0, -1.0, 1.0)


class UnderResolvedLayerWarning(UserWarning):
    """The transition layer is thinner than the mesh size."""


class ExperimentFailure(RuntimeError):
    """A simulation inside an experiment failed; ``partial`` holds what was completed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mms_mesh(n):
    return build_structured_mesh(n, 2 * n, MMS_DOMAIN)


def _steps(T, dt):
    n = round(T / dt)
    if n < 1 or not math.isclose(n * dt, T, rel_tol=1e-9):
        raise ValueError(f"final time {T} is not a multiple of dt {dt}")
    return n


# -- convergence -------------------------------------------------------------
def convergence_level(cfg: RunConfig, level: int) -> ConvergenceRow:
    """Run one ladder level and measure the errors at the final time."""
    n = cfg.levels[level]
    scale = cfg.levels[0] / n
    h = 1.0 / n
    dt = cfg.dt_factor * h
    eps = cfg.epsilon_factor * h
    delta = cfg.delta * scale
    params = cfg.params()
    exact = ExactSolution(params)
    pf = PhaseField(InterfaceGeometry("horizontal_line"), cfg.weight_family(), eps, delta)
    sim = SimulationConfig(_mms_mesh(n), params, cfg.scheme(dt, cfg.final_time), pf, ManufacturedData(exact))
    t0 = time.perf_counter()
    res = run_simulation(sim)
    errors = weighted_error_norms(res.state, exact, res.discretization)
    log.info("level h=1/%d done in %.1fs: %s", n, time.perf_counter() - t0,
             " ".join(f"{e:.3e}" for e in errors.as_tuple()))
    return ConvergenceRow(h, dt, eps, delta, errors)


def _csv_row(row: ConvergenceRow) -> str:
    cells = [f"{row.h:.10g}", f"{row.dt:.10g}"]
    for name in ERROR_NAMES:
        cells.append(f"{getattr(row.errors, name):.6e}")
        r = row.rates.get(name)
        cells.append("" if r is None else f"{r:.4f}")
    return ",".join(cells)


def run_convergence(cfg: RunConfig) -> ConvergenceTable:
    """Run the refinement ladder and write ``convergence.csv``.

    Rows are appended and flushed as levels finish, so a failing level leaves
    the completed part of the table on disk.
    """
    out = _out_dir(cfg) / "convergence.csv"
    table = ConvergenceTable()
    with open(out, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.flush()
        for level in range(len(cfg.levels)):
            try:
                row = convergence_level(cfg, level)
            except Exception as exc:
                raise ExperimentFailure(f"level h=1/{cfg.levels[level]}: {exc}", table) from exc
            table.append(row)
            if len(table.rows) > 1:
                prev = table.rows[-2]
                row.rates = {k: math.log2(getattr(prev.errors, k) / getattr(row.errors, k))
                             for k in ERROR_NAMES}
            fh.write(_csv_row(row) + "\n")
            fh.flush()
    if len(table.rows) > 1:
        convergence_rates(table)
    return table


def read_convergence_csv(path):
    """Parse a file written by :func:`run_convergence` into a list of dicts (empty cells -> None)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    keys = CSV_HEADER.split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(keys):
            raise ValueError(f"{path}: row has {len(cells)} cells")
        rows.append({k: (float(c) if c else None) for k, c in zip(keys, cells)})
    return rows


# -- energy audit ------------------------------------------------------------
def run_energy_audit(cfg: RunConfig) -> np.ndarray:
    """Per-step residuals of the energy identity; writes ``energy_audit.csv``."""
    if cfg.time_scheme != "backward_euler":
        raise ValueError("the energy audit needs time_scheme = backward_euler")
    h = 1.0 / cfg.n
    _steps(cfg.final_time, cfg.dt)
    params = cfg.params()
    data = ForcingOnlyData(ExactSolution(params), with_divergence=cfg.with_divergence)
    pf = PhaseField(InterfaceGeometry("horizontal_line"), cfg.weight_family(),
                    cfg.epsilon_factor * h, cfg.delta)
    sim = SimulationConfig(_mms_mesh(cfg.n), params, cfg.scheme(cfg.dt, cfg.final_time), pf, data)
    res = run_simulation(sim, keep_trajectory=True)
    residuals = energy_audit(res.trajectory, res.discretization, data)
    with open(_out_dir(cfg) / "energy_audit.csv", "w", newline="") as fh:
        fh.write("step,t,residual\n")
        for i, r in enumerate(residuals, start=1):
            fh.write(f"{i},{res.trajectory[i].t:.10g},{r:.6e}\n")
    return residuals


# -- epsilon sweep -----------------------------------------------------------
@dataclass
class SweepRow:
    epsilon: float
    h: float
    dt: float
    errors: object


def run_epsilon_sweep(cfg: RunConfig) -> list:
    """Errors against the manufactured solution for each ``epsilon`` at fixed ``(h, dt)``.

    Emits :class:`UnderResolvedLayerWarning` for every ``epsilon < h``.
    Writes ``epsilon_sweep.csv``.
    """
    h = 1.0 / cfg.n
    params = cfg.params()
    exact = ExactSolution(params)
    mesh = _mms_mesh(cfg.n)
    rows = []
    out = _out_dir(cfg) / "epsilon_sweep.csv"
    with open(out, "w", newline="") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for eps in cfg.epsilons:
            if eps < h:
                warnings.warn(f"epsilon {eps} is below h {h}; the layer is under-resolved",
                              UnderResolvedLayerWarning, stacklevel=2)
            pf = PhaseField(InterfaceGeometry("horizontal_line"), cfg.weight_family(), eps, cfg.delta)
            sim = SimulationConfig(mesh, params, cfg.scheme(cfg.dt, cfg.final_time), pf,
                                   ManufacturedData(exact))
            try:
                res = run_simulation(sim)
            except Exception as exc:
                raise ExperimentFailure(f"epsilon={eps}: {exc}", rows) from exc
            errors = weighted_error_norms(res.state, exact, res.discretization)
            rows.append(SweepRow(eps, h, cfg.dt, errors))
            cells = [f"{eps:.10g}", f"{h:.10g}", f"{cfg.dt:.10g}"]
            cells += [f"{e:.6e}" for e in errors.as_tuple()]
            fh.write(",".join(cells) + "\n")
            fh.flush()
    return rows


# -- channel demo ------------------------------------------------------------
@dataclass
class ChannelResult:
    steps: int
    converged: bool
    history: list
    files: list = field(default_factory=list)
    fluid_speed_max: float = 0.0
    state: object = None


def _write_channel_vtk(path, disc, state):
    pressure = state.pressure
    if disc.scheme.formulation == "theta":
        pressure = recover_pi_from_theta(pressure, disc.pf, disc.Q.node_coords)
    phi_F = disc.pf.phi(disc.mesh.vertices)[0]
    return write_vtk(
        path,
        disc.mesh,
        scalars={"p": state.p, "pi": pressure, "phi_F": phi_F},
        vectors={"u": state.u, "eta": state.eta},
        title=f"step {state.n} t={state.t:.10g}",
    )


def run_channel_demo(cfg: RunConfig) -> ChannelResult:
    """March the channel problem to steady state, writing one VTK file per step.

    Stops when the relative change of ``u`` drops to ``steady_tol`` or after
    ``max_steps`` steps; ``converged`` tells which.
    """
    out = _out_dir(cfg)
    rect, _ = cfg.channel_geometry()
    mesh = build_structured_mesh(cfg.nx, cfg.ny, rect)
    pf = cfg.channel_phasefield()
    data = ChannelData(cfg.inflow_traction)
    scheme = cfg.scheme(cfg.dt, cfg.max_steps * cfg.dt)
    files = []

    def dump(disc, state):
        if not files:
            # the initial state is rebuilt deterministically for step 0
            _write_step(disc, disc.initial_state(data))
        _write_step(disc, state)

    def _write_step(disc, state):
        path = out / f"channel_{state.n:04d}.vtk"
        _write_channel_vtk(path, disc, state)
        files.append(path)

    monitor = SteadyStateMonitor(cfg.steady_tol, on_step=dump)
    res = run_simulation(SimulationConfig(mesh, cfg.params(), scheme, pf, data), callback=monitor)
    for path in (files[0], files[-1]):
        check_vtk(path, mesh)
    if not monitor.converged:
        log.warning("channel demo did not reach steady state in %d steps", res.state.n)
    return ChannelResult(
        steps=res.state.n,
        converged=monitor.converged,
        history=monitor.history,
        files=files,
        fluid_speed_max=fluid_speed_max(res.discretization, res.state),
        state=res.state,
    )


# -- dispatch ------------------------------------------------------------------
def summarize(cfg: RunConfig, result) -> list:
    """Short ``key = value`` result lines for the manifest."""
    if cfg.experiment == "convergence":
        lines = [f"rows = {len(result.rows)}"]
        if len(result.rows) > 1:
            lines += [f"final_rate_{k[2:]} = {result.rate(k):.4f}" for k in ERROR_NAMES]
        return lines
    if cfg.experiment == "energy_audit":
        return [f"steps = {len(result)}", f"max_residual = {float(np.max(result)):.3e}"]
    if cfg.experiment == "epsilon_sweep":
        return [f"e_u[epsilon={r.epsilon:g}] = {r.errors.e_u:.6e}" for r in result]
    return [
        f"steps = {result.steps}",
        f"converged = {str(result.converged).lower()}",
        f"final_change = {result.history[-1][2]:.3e}",
        f"fluid_speed_max = {result.fluid_speed_max:.6g}",
        f"vtk_files = {len(result.files)}",
    ]


RUNNERS = {
    "convergence": run_convergence,
    "energy_audit": run_energy_audit,
    "epsilon_sweep": run_epsilon_sweep,
    "channel_demo": run_channel_demo,
}


def write_manifest(cfg: RunConfig, status: str, lines=(), elapsed: float | None = None) -> Path:
    """Write ``manifest.txt``: the resolved configuration followed by commented results.

    The configuration part parses back with :func:`parse_config`.
    """
    out = _out_dir(cfg) / "manifest.txt"
    head = [f"# diffuse_biot {__version__}", f"# status: {status}"]
    if elapsed is not None:
        head.append(f"# elapsed_seconds: {elapsed:.1f}")
    body = serialize_config(cfg)
    tail = "".join(f"# {line}\n" for line in lines)
    out.write_text("\n".join(head) + "\n" + body + tail)
    return out


def run_experiment(cfg: RunConfig):
    return RUNNERS[cfg.experiment](cfg)
