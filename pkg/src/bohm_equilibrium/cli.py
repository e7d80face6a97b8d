"""Command-line front end: run the experiments, write CSV tables.

Subcommands: equivariance, ga-constraint, sweep, continuity, trajectory.
Settings come from built-in defaults, overridden by a flat key=value config
file (--config), overridden by flags. Every run writes one CSV table (17
significant digits, "\\n" line endings, so reruns are byte-identical) plus a
<out>.meta.json sidecar with the resolved settings.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass

from . import __version__
from .analysis import (
    constraint_surface_experiment,
    equivariance_check,
    regularization_sweep,
)
from .dynamics import (
    EnsembleFailureError,
    IntegratorConfig,
    StepUnderflowError,
    integrate_trajectory,
    sample_equilibrium,
)
from .guidance import continuity_residual, grid_for_state
from .model import PhysicalParams, TwoParticleState


class ConfigError(ValueError):
    """Invalid configuration: bad key, bad value, or inconsistent settings."""


def _parse_float_list(text: str) -> tuple[float, ...]:
    items = [part.strip() for part in text.split(",")]
    values = tuple(float(part) for part in items if part)
    if not values:
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}")
    return values


@dataclass
class RunConfig:
    """Fully resolved settings for one CLI run."""

    hbar: float = 1.0
    mass: float = 1.0
    sigma_narrow: float = 0.05
    sigma_wide: float = 1.0
    correlation: str = "sum"
    cm_center: float = 0.0
    rel_center: float = 0.0
    cm_wavenumber: float = 0.0
    rel_wavenumber: float = 0.0
    method: str = "rk4"
    dt: float = 1e-3
    tolerance: float = 1e-9
    t_final: float = 2.0
    record_stride: int = 0
    samples: int = 100_000
    seed: int = 42
    parallel: int = 1
    times: tuple[float, ...] | None = None
    sweep_widths: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    grid_h: float | None = None
    grid_tau: float = 1e-3
    start_y1: float | None = None
    start_y2: float | None = None
    out: str | None = None

    def validate(self):
        for key in ("hbar", "mass", "sigma_narrow", "sigma_wide", "dt", "t_final"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0.0):
                raise ConfigError(f"{key} must be positive and finite, got {value!r}")
        if self.correlation not in ("sum", "difference"):
            raise ConfigError(
                f"correlation must be 'sum' or 'difference', got {self.correlation!r}"
            )
        if self.method not in ("rk4", "rk45"):
            raise ConfigError(f"method must be 'rk4' or 'rk45', got {self.method!r}")
        if not 1e-14 < self.tolerance < 1e-2:
            raise ConfigError(
                f"tolerance must lie in (1e-14, 1e-2), got {self.tolerance!r}"
            )
        if self.samples < 1:
            raise ConfigError(f"samples must be at least 1, got {self.samples!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in an unsigned 64-bit word, got {self.seed!r}")
        if self.parallel < 1:
            raise ConfigError(f"parallel must be at least 1, got {self.parallel!r}")
        if self.record_stride < 0:
            raise ConfigError(
                f"record_stride must be non-negative, got {self.record_stride!r}"
            )
        if self.times is not None:
            if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
                raise ConfigError("times must be strictly increasing")
            if self.times[0] < 0.0 or self.times[-1] > self.t_final:
                raise ConfigError(
                    f"times must lie within [0, t_final={self.t_final!r}]"
                )
        if any(w <= 0.0 for w in self.sweep_widths):
            raise ConfigError("sweep_widths must be positive")
        if any(w2 >= w1 for w1, w2 in zip(self.sweep_widths, self.sweep_widths[1:])):
            raise ConfigError("sweep_widths must be strictly decreasing")
        for key in ("grid_h", "grid_tau"):
            value = getattr(self, key)
            if value is not None and not (math.isfinite(value) and value > 0.0):
                raise ConfigError(f"{key} must be positive and finite, got {value!r}")
        if (self.start_y1 is None) != (self.start_y2 is None):
            raise ConfigError("start_y1 and start_y2 must be set together")

    def state(self) -> TwoParticleState:
        try:
            return TwoParticleState.from_widths(
                sigma_narrow=self.sigma_narrow,
                sigma_wide=self.sigma_wide,
                correlation=self.correlation,
                params=PhysicalParams(hbar=self.hbar, mass=self.mass),
                cm_center=self.cm_center,
                rel_center=self.rel_center,
                cm_wavenumber=self.cm_wavenumber,
                rel_wavenumber=self.rel_wavenumber,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def integrator(self) -> IntegratorConfig:
        try:
            return IntegratorConfig(
                method=self.method,
                dt=self.dt,
                tolerance=self.tolerance,
                t_final=self.t_final,
                record_stride=self.record_stride,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved_times(self) -> tuple[float, ...]:
        return self.times if self.times is not None else (self.t_final,)


_KEY_PARSERS = {
    "hbar": float,
    "mass": float,
    "sigma_narrow": float,
    "sigma_wide": float,
    "correlation": str,
    "cm_center": float,
    "rel_center": float,
    "cm_wavenumber": float,
    "rel_wavenumber": float,
    "method": str,
    "dt": float,
    "tolerance": float,
    "t_final": float,
    "record_stride": int,
    "samples": int,
    "seed": int,
    "parallel": int,
    "times": _parse_float_list,
    "sweep_widths": _parse_float_list,
    "grid_h": float,
    "grid_tau": float,
    "start_y1": float,
    "start_y2": float,
    "out": str,
}


def parse_config_file(path: str) -> dict:
    """Read a flat key = value file; '#' starts a comment, unknown keys fail."""
    settings = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
        if key not in _KEY_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            settings[key] = _KEY_PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid value for {key}: {exc}") from exc
    return settings


def load_config(config_path: str | None, overrides: dict) -> RunConfig:
    """Defaults, then the config file, then flag overrides; validates last."""
    settings = {}
    if config_path is not None:
        settings.update(parse_config_file(config_path))
    settings.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig(**settings)
    config.validate()
    return config


def _format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(value) for value in row])


def write_meta(path: str, subcommand: str, config: RunConfig):
    meta = {
        "tool": "bohm-equilibrium",
        "version": __version__,
        "subcommand": subcommand,
        "config": dataclasses.asdict(config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_equivariance(config: RunConfig, out: str) -> str:
    reports = equivariance_check(
        config.state(),
        config.samples,
        config.seed,
        config.integrator(),
        config.resolved_times(),
        parallel_width=config.parallel,
    )
    rows = [
        (report.t, stats.observable, stats.empirical_std, stats.analytic_std, stats.ks, stats.n)
        for report in reports
        for stats in report.observables
    ]
    write_csv(out, ("t", "observable", "empirical_std", "analytic_std", "ks", "n"), rows)
    worst = max(report.max_ks for report in reports)
    bound = 1.95 / math.sqrt(config.samples)
    return (
        f"equivariance: n={config.samples}, {len(reports)} time(s), "
        f"max KS = {worst:.4g} (noise level ~{bound:.4g})"
    )


def _run_ga_constraint(config: RunConfig, out: str) -> str:
    report = constraint_surface_experiment(
        config.state(), config.samples, config.seed, config.integrator()
    )
    rows = [
        ("n", report.n),
        ("t_final", report.t_final),
        ("max_abs_sum", report.max_abs_sum),
        ("sum_width_empirical", report.sum_width_empirical),
        ("sum_width_equilibrium", report.sum_width_equilibrium),
        ("width_mismatch_ratio", report.width_mismatch_ratio),
        ("diff_width_empirical", report.diff_width_empirical),
        ("diff_width_analytic", report.diff_width_analytic),
    ]
    write_csv(out, ("metric", "value"), rows)
    return (
        f"ga-constraint: max |y1+y2| = {report.max_abs_sum:.3g} over "
        f"[0, {report.t_final:g}]; equilibrium sum width would be "
        f"{report.sum_width_equilibrium:.4g}"
    )


def _run_sweep(config: RunConfig, out: str) -> str:
    result = regularization_sweep(
        config.state(),
        config.sweep_widths,
        config.samples,
        config.seed,
        config.integrator(),
    )
    rows = [
        (row.delta_y_i, row.delta_y_f, row.delta_y_f_empirical, row.r, row.ks)
        for row in result.rows
    ]
    write_csv(
        out,
        ("delta_y_i", "delta_y_f_analytic", "delta_y_f_empirical", "R", "ks"),
        rows,
    )
    worst = max(row.ks for row in result.rows)
    return (
        f"sweep: {len(result.rows)} widths down to {result.rows[-1].delta_y_i:g}, "
        f"R up to {result.rows[-1].r:.4g}, max KS = {worst:.4g}"
    )


def _run_continuity(config: RunConfig, out: str) -> str:
    state = config.state()
    t = config.t_final
    coarse = grid_for_state(state, t, h=config.grid_h, tau=config.grid_tau)
    fine = coarse.refined()
    res_coarse = continuity_residual(state, coarse, t)
    res_fine = continuity_residual(state, fine, t)
    rows = [
        ("coarse", coarse.h, coarse.tau, res_coarse.max_norm, res_coarse.l2_norm),
        ("fine", fine.h, fine.tau, res_fine.max_norm, res_fine.l2_norm),
    ]
    write_csv(out, ("level", "h", "tau", "max_norm", "l2_norm"), rows)
    ratio = res_coarse.max_norm / res_fine.max_norm if res_fine.max_norm else math.inf
    return (
        f"continuity: max-norm {res_coarse.max_norm:.4g} -> {res_fine.max_norm:.4g} "
        f"under grid halving (ratio {ratio:.3g}, expect ~4)"
    )


def _run_trajectory(config: RunConfig, out: str) -> str:
    state = config.state()
    if config.start_y1 is not None:
        start = (config.start_y1, config.start_y2)
    else:
        start = tuple(sample_equilibrium(state, 1, config.seed)[0])
    integrator = config.integrator()
    if integrator.record_stride == 0:
        integrator = dataclasses.replace(integrator, record_stride=1)
    trajectory = integrate_trajectory(state, start, integrator)
    rows = [
        (t, position[0], position[1])
        for t, position in zip(trajectory.times, trajectory.positions)
    ]
    write_csv(out, ("t", "y1", "y2"), rows)
    final = trajectory.positions[-1]
    return (
        f"trajectory: {len(rows)} samples from ({start[0]:.6g}, {start[1]:.6g}) "
        f"to ({final[0]:.6g}, {final[1]:.6g})"
    )


_SUBCOMMANDS = {
    "equivariance": (
        _run_equivariance,
        "sample |psi|^2, transport the ensemble, test the four linear observables",
    ),
    "ga-constraint": (
        _run_ga_constraint,
        "propagate an ensemble started exactly on y1 + y2 = 0",
    ),
    "sweep": (
        _run_sweep,
        "re-run the equivariance test while shrinking the narrow width",
    ),
    "continuity": (
        _run_continuity,
        "measure the discretized continuity-equation residual on two grids",
    ),
    "trajectory": (
        _run_trajectory,
        "integrate and dump a single configuration-space trajectory",
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bohm-equilibrium",
        description="Pilot-wave ensembles for an entangled two-particle Gaussian state",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, (_, help_text) in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="flat key=value settings file")
        p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
        p.add_argument("--samples", type=int, help="ensemble size")
        p.add_argument("--t-final", type=float, dest="t_final", help="end time")
        p.add_argument("--dt", type=float, help="fixed step size for rk4")
        p.add_argument(
            "--sigma-narrow",
            type=float,
            dest="sigma_narrow",
            help="initial width of the narrow mode",
        )
        p.add_argument(
            "--sigma-wide",
            type=float,
            dest="sigma_wide",
            help="initial width of the wide mode",
        )
        p.add_argument(
            "--correlation",
            choices=("sum", "difference"),
            help="which combination of y1, y2 is narrow",
        )
        p.add_argument("--out", metavar="PATH", help="output CSV path")
    return parser


_FLAG_KEYS = (
    "seed",
    "samples",
    "t_final",
    "dt",
    "sigma_narrow",
    "sigma_wide",
    "correlation",
    "out",
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in _FLAG_KEYS}
    try:
        config = load_config(args.config, overrides)
        runner = _SUBCOMMANDS[args.subcommand][0]
        out = config.out if config.out is not None else f"{args.subcommand}.csv"
        summary = runner(config, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StepUnderflowError, EnsembleFailureError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    write_meta(out + ".meta.json", args.subcommand, config)
    print(summary)
    return 0
