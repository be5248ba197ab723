"""Flat ``key = value`` run configuration and command dispatch.

Example::

    command = evolve
    rho = 1.0
    kernel.name = constant
    kernel.epsilon = 0.0
    evolution.initial = exp(2)
    evolution.t_end = 10

Exit codes: 0 success, 1 failed experiment, 2 runtime or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import experiments as ex
from .equilibrium import find_equilibrium
from .evolution import METHODS, NONNEGATIVITY_MODES, EvolutionConfig, evolve
from .grid import GEOMETRIC, UNIFORM, build_grid
from .initial import initial_data, parse_initial
from .kernels import BUILTIN_KERNELS, builtin_kernel
from .operators import TRUNCATIONS, CONSERVATIVE, assemble
from .spectral import SPECTRUM_HEADER, assemble_linearized, project_zero_mass, spectral_abscissa

logger = logging.getLogger(__name__)

COMMANDS = ("evolve", "equilibrium", "spectrum", "experiment")
EXPERIMENTS = ("flow_stability", "initial_data_stability", "global_convergence",
               "equilibrium_stability", "uniqueness", "spectral_perturbation")
EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    n: int = 512
    x_max: float = 25.0
    scheme: str = UNIFORM


@dataclass(frozen=True)
class KernelConfig:
    name: str = "constant"
    epsilon: float = 0.0
    nu_star: float = 1.0


@dataclass(frozen=True)
class EvolveConfig:
    dt: float = 1e-3
    t_end: float = 5.0
    method: str = "rk4"
    observable_stride: int = 10
    nonnegativity_mode: str = "reject"
    initial: str = "equilibrium"
    truncation: str = CONSERVATIVE


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "uniqueness"
    eps_list: tuple = (0.025, 0.05, 0.1, 0.2)
    t_probe: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    command: str
    rho: float
    grid: GridConfig = field(default_factory=GridConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    evolution: EvolveConfig = field(default_factory=EvolveConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output_dir: str = "."
    seed: int = 0


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0 or (isinstance(v, float) and not math.isfinite(v)):
            raise ValueError("must be positive")
        return v
    return conv


def _nonneg_float(text):
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise ValueError("must be nonnegative")
    return v


def _choice(options):
    def conv(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return conv


def _initial(text):
    parse_initial(text)
    return text.replace(" ", "")


def _eps_list(text):
    vals = tuple(float(p) for p in text.split(",") if p.strip())
    if not vals or any(not v > 0 for v in vals):
        raise ValueError("must be a comma-separated list of positive numbers")
    return vals


def _int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be nonnegative")
    return v


_KEYS = {
    "command": _choice(COMMANDS),
    "rho": _positive(float),
    "output_dir": str,
    "seed": _int,
    "grid.n": _positive(int),
    "grid.x_max": _positive(float),
    "grid.scheme": _choice((UNIFORM, GEOMETRIC)),
    "kernel.name": _choice(BUILTIN_KERNELS),
    "kernel.epsilon": _nonneg_float,
    "kernel.nu_star": _positive(float),
    "evolution.dt": _positive(float),
    "evolution.t_end": _positive(float),
    "evolution.method": _choice(METHODS),
    "evolution.observable_stride": _positive(int),
    "evolution.nonnegativity_mode": _choice(NONNEGATIVITY_MODES),
    "evolution.initial": _initial,
    "evolution.truncation": _choice(TRUNCATIONS),
    "experiment.name": _choice(EXPERIMENTS),
    "experiment.eps_list": _eps_list,
    "experiment.t_probe": _positive(float),
}
_REQUIRED = ("command", "rho")
_SECTIONS = {"grid": GridConfig, "kernel": KernelConfig, "evolution": EvolveConfig,
             "experiment": ExperimentConfig}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; ``grid.x_max`` defaults to ``25 sqrt(rho)``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        if key in values:
            raise ConfigError(f"duplicate key {key!r}")
        try:
            values[key] = _KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key!r}: {val!r} ({exc})") from None
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    sections = {name: {} for name in _SECTIONS}
    top = {}
    for key, val in values.items():
        if "." in key:
            sec, sub = key.split(".", 1)
            sections[sec][sub] = val
        else:
            top[key] = val
    sections["grid"].setdefault("x_max", 25.0 * math.sqrt(top["rho"]))
    built = {name: cls(**sections[name]) for name, cls in _SECTIONS.items()}
    cfg = RunConfig(**top, **built)
    if not cfg.evolution.dt < cfg.evolution.t_end:
        raise ConfigError("invalid value for 'evolution.dt': must be smaller than evolution.t_end")
    if cfg.grid.n < 2:
        raise ConfigError("invalid value for 'grid.n': must be at least 2")
    return cfg


def _render_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg: RunConfig) -> str:
    lines = [f"command = {cfg.command}", f"rho = {cfg.rho!r}",
             f"output_dir = {cfg.output_dir}", f"seed = {cfg.seed}"]
    for name in _SECTIONS:
        for f in dataclasses.fields(_SECTIONS[name]):
            lines.append(f"{name}.{f.name} = {_render_value(getattr(getattr(cfg, name), f.name))}")
    return "\n".join(lines) + "\n"


# -- dispatch -----------------------------------------------------------------

def _setup(cfg: RunConfig):
    grid = build_grid(cfg.grid.n, cfg.grid.x_max, cfg.grid.scheme)
    spec = builtin_kernel(cfg.kernel.name, cfg.kernel.epsilon, cfg.kernel.nu_star)
    return grid, spec


def _initial_state(cfg, grid):
    """Named initial data; ``equilibrium`` is the grid's constant-kernel stationary state."""
    if cfg.evolution.initial == "equilibrium":
        const = assemble(grid, builtin_kernel("constant", 0.0))
        return find_equilibrium(const, cfg.rho).state
    return initial_data(grid, cfg.evolution.initial, cfg.rho)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _run_evolve(cfg, out):
    grid, spec = _setup(cfg)
    a = assemble(grid, spec, cfg.evolution.truncation)
    ref = find_equilibrium(assemble(grid, spec), cfg.rho).state
    f0 = _initial_state(cfg, grid)
    ev = cfg.evolution
    tr = evolve(a, f0, EvolutionConfig(ev.dt, ev.t_end, ev.method, ev.observable_stride,
                                       ev.nonnegativity_mode), refs=[ref])
    tr.to_csv(os.path.join(out, "trajectory.csv"))
    return EXIT_OK


def _run_equilibrium(cfg, out):
    grid, spec = _setup(cfg)
    res = find_equilibrium(assemble(grid, spec), cfg.rho)
    _write_rows(os.path.join(out, "equilibrium.csv"), ("x", "Q"),
                zip(map(float, grid.nodes), map(float, res.state.values)))
    meta = {"rho": cfg.rho, "epsilon": cfg.kernel.epsilon, "kernel": cfg.kernel.name,
            "residual": res.residual_l1, "iterations": res.iterations, "method": res.method,
            "n": grid.n, "x_max": grid.x_max}
    with open(os.path.join(out, "equilibrium.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    return EXIT_OK


def _run_spectrum(cfg, out):
    grid, spec = _setup(cfg)
    a = assemble(grid, spec)
    Q = find_equilibrium(a, cfg.rho).state
    rep = spectral_abscissa(project_zero_mass(assemble_linearized(a, Q)), seed=cfg.seed)
    rep.rho = cfg.rho
    _write_rows(os.path.join(out, "spectrum.csv"), SPECTRUM_HEADER, [rep.row()])
    return EXIT_OK


def _run_experiment(cfg, out):
    grid, _ = _setup(cfg)
    e = cfg.experiment
    k = cfg.kernel
    rho = cfg.rho
    if e.name == "flow_stability":
        f0 = _initial_state(cfg, grid)
        outcome = ex.flow_stability_experiment(grid, e.eps_list, f0, e.t_probe, k.name,
                                               cfg.evolution.dt)
    elif e.name == "initial_data_stability":
        f0 = _initial_state(cfg, grid)
        bump = initial_data(grid, "bump(3,0.5)", rho)
        g0 = f0 + (bump - f0) * 1e-3
        outcome = ex.initial_data_stability_experiment(grid, f0, g0, k.epsilon, e.t_probe,
                                                       k.name, cfg.evolution.dt)
    elif e.name == "global_convergence":
        c_meas = ex.spectral_perturbation_experiment(grid, e.eps_list, rho, k.name).measured["c_meas"]
        family = {"exp(2)": initial_data(grid, f"exp({2 * math.sqrt(rho)!r})", rho),
                  "bump(3,0.5)": initial_data(grid, "bump(3,0.5)", rho)}
        outcome = ex.global_convergence_experiment(grid, k.epsilon, rho, family, c_meas, k.name,
                                                   dt=cfg.evolution.dt)
    elif e.name == "equilibrium_stability":
        outcome = ex.equilibrium_stability_experiment(grid, e.eps_list, rho, k.name)
    elif e.name == "uniqueness":
        seeds = {"closed-form/bump": (ex.closed_form_equilibrium(grid, rho).state,
                                      initial_data(grid, "bump(3,0.5)", rho))}
        outcome = ex.uniqueness_experiment(grid, k.epsilon, seeds, rho, k.name)
    else:
        outcome = ex.spectral_perturbation_experiment(grid, e.eps_list, rho, k.name)
    ex.write_outcome(outcome, out)
    print(outcome.summary())
    return EXIT_OK if outcome.passed else EXIT_FAIL


_DISPATCH = {"evolve": _run_evolve, "equilibrium": _run_equilibrium,
             "spectrum": _run_spectrum, "experiment": _run_experiment}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
        return _DISPATCH[cfg.command](cfg, cfg.output_dir)
    except Exception as exc:  # noqa: BLE001 - exit status carries the failure
        logger.error("%s failed: %s", cfg.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(prog="coagfrag", description=__doc__.split("\n")[0])
    parser.add_argument("config", help="path to a key = value configuration file")
    parser.add_argument("--output-dir", help="override output_dir from the file")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.output_dir:
        cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
    return run(cfg)
