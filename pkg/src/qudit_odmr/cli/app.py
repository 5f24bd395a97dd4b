"""
Command-line front end.

    qudit-odmr [--config FILE] [--out DIR] [--seed N] [--workers N] SUBCOMMAND [options]

Every subcommand resolves one ExperimentConfig (defaults < --config file <
command-line overrides), runs its workflow and writes CSV, plot text and a
run.json sidecar under OUT/SUBCOMMAND/.
"""

from __future__ import annotations

import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import click
import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from qudit_odmr.cli.writers import write_result
from qudit_odmr.config import Config, Settings
from qudit_odmr.errors import ExperimentConfigError, QuditOdmrError
from qudit_odmr.logger import log_system_event, setup_logging
from qudit_odmr.workflows import experiments
from qudit_odmr.workflows.selftest import run_selftest

log = logging.getLogger(__name__)


@dataclass
class CliState:
    config_file: Optional[str]
    out_dir: Path
    overrides: Dict[str, Any] = field(default_factory=dict)


def _set(overrides: Dict[str, Any], path: str, value: Any) -> None:
    """Place ``value`` at a dotted path; None means the option was not given."""
    if value is None:
        return
    node = overrides
    *parents, leaf = path.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"]) or "config"


def _origin(error: BaseException) -> str:
    """Dotted name of the innermost package module the error passed through."""
    for frame in reversed(traceback.extract_tb(error.__traceback__)):
        parts = Path(frame.filename).with_suffix("").parts
        if "qudit_odmr" in parts:
            start = len(parts) - 1 - parts[::-1].index("qudit_odmr")
            return ".".join(parts[start:])
    return "qudit_odmr"


def _execute(ctx: click.Context, subcommand: str, options: Dict[str, Any],
             runner: Callable[..., experiments.RunResult], *args: Any) -> None:
    state: CliState = ctx.obj
    overrides: Dict[str, Any] = {}
    for key, value in state.overrides.items():
        _set(overrides, key, value)
    for path, value in options.items():
        _set(overrides, path, value)

    try:
        cfg = Config().build_experiment(state.config_file, overrides)
        log_system_event("RUN_START", f"{subcommand} seed={cfg.seed} workers={cfg.workers}")
        result = runner(cfg, *args)
        paths = write_result(result, state.out_dir, cfg)
    except ValidationError as e:
        for error in e.errors():
            click.echo(f"{_field_path(error)}: {error['msg']}", err=True)
        ctx.exit(2)
    except ExperimentConfigError as e:
        click.echo(f"config: {e}", err=True)
        ctx.exit(2)
    except QuditOdmrError as e:
        click.echo(f"{type(e).__module__}: {type(e).__name__}: {e}", err=True)
        ctx.exit(1)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        log.debug("Numerical failure", exc_info=True)
        click.echo(f"{_origin(e)}: {type(e).__name__}: {e}", err=True)
        ctx.exit(1)

    _report(result)
    for path in paths:
        click.echo(f"wrote {path}")
    if not result.ok:
        ctx.exit(1)


def _report(result: experiments.RunResult) -> None:
    s = result.summary
    if result.subcommand == "levels":
        for label, energy in s["energies"].items():
            click.echo(f"E({label}) = {energy:.6f} MHz")
        for name, t in s["transitions"].items():
            click.echo(f"{name} ({t['upper']} <-> {t['lower']}) = {t['freq']:.6f} MHz  strength {t['strength']:.3f}")
    elif result.subcommand == "beff":
        click.echo(f"B_eff = {s['b_eff']:.2f} ± {s['b_err']:.2f} µT (theta {s['theta']:g} deg)")
    elif result.subcommand == "selftest":
        for name, check in s["checks"].items():
            click.echo(f"{'PASS' if check['passed'] else 'FAIL'}  {name}: {check['detail']}")
    elif result.subcommand == "consistency":
        for label, est in zip(s.get("labels") or [], s["estimates"]):
            click.echo(f"{label}: B_eff = {est['b_eff']:.2f} ± {est['b_err']:.2f} µT")
        click.echo(f"consistent: {s['consistent']}")


# ---- Group -------------------------------------------------------------------

@click.group()
@click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None,
              help="YAML (or run.json) file merged over the defaults.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: $QUDIT_ODMR_OUT_DIR or ./runs).")
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Threads for packet and field sweeps.")
@click.option("--log-level", default=None)
@click.pass_context
def cli(ctx: click.Context, config_file, out_dir, seed, workers, log_level):
    """Spin-3/2 color-center ODMR, hole-burning and pulse simulator."""
    load_dotenv()
    settings = Settings()
    setup_logging(log_level or settings.log_level, settings.log_to_file, settings.log_dir)
    ctx.obj = CliState(config_file=config_file, out_dir=Path(out_dir or settings.out_dir),
                       overrides={"seed": seed, "workers": workers})


def field_options(fn):
    fn = click.option("--bperp", type=float, default=None, help="Transverse field (µT).")(fn)
    fn = click.option("--bz", type=float, default=None, help="Axial field (µT).")(fn)
    return fn


# ---- Subcommands ---------------------------------------------------------------

@cli.command()
@field_options
@click.option("--two-d", type=float, default=None, help="Mean zero-field splitting 2D (MHz).")
@click.pass_context
def levels(ctx, bz, bperp, two_d):
    """Energies and transition frequencies, exact and first order."""
    _execute(ctx, "levels", {"field.bz": bz, "field.bperp": bperp, "distribution.d_mean": two_d},
             experiments.run_levels)


@cli.command()
@field_options
@click.option("--span", type=float, default=None)
@click.option("--step", type=float, default=None)
@click.option("--probe-power", type=float, default=None, help="dBm")
@click.pass_context
def odmr(ctx, bz, bperp, span, step, probe_power):
    """Single-tone CW ODMR spectrum."""
    _execute(ctx, "odmr", {"field.bz": bz, "field.bperp": bperp, "cw.span": span, "cw.step": step,
                           "cw.probe_power": probe_power}, experiments.run_odmr)


@cli.command()
@field_options
@click.option("--nu-pump", type=float, default=None, help="MHz (default: mean nu1 line).")
@click.option("--pump-power", type=float, default=None, help="dBm")
@click.option("--probe-power", type=float, default=None, help="dBm")
@click.option("--span", type=float, default=None)
@click.option("--step", type=float, default=None)
@click.pass_context
def holeburn(ctx, bz, bperp, nu_pump, pump_power, probe_power, span, step):
    """Two-tone lock-in spectrum with the pump fixed."""
    _execute(ctx, "holeburn", {
        "field.bz": bz, "field.bperp": bperp, "cw.nu_pump": nu_pump, "cw.pump_power": pump_power,
        "cw.probe_power": probe_power, "cw.span": span, "cw.step": step,
    }, experiments.run_holeburn)


@cli.command()
@click.option("--bperp", type=float, default=None, help="Transverse field held fixed (µT).")
@click.option("--bz-start", type=float, default=None)
@click.option("--bz-stop", type=float, default=None)
@click.option("--bz-step", type=float, default=None)
@click.option("--nu-pump", type=float, default=None)
@click.option("--n-packets", type=int, default=None)
@click.pass_context
def modemap(ctx, bperp, bz_start, bz_stop, bz_step, nu_pump, n_packets):
    """Normalized lock-in map versus axial field."""
    _execute(ctx, "modemap", {
        "modemap.bperp": bperp, "modemap.bz_start": bz_start, "modemap.bz_stop": bz_stop,
        "modemap.bz_step": bz_step, "modemap.nu_pump": nu_pump, "modemap.n_packets": n_packets,
    }, experiments.run_modemap)


@cli.command()
@field_options
@click.option("--t-pi", type=float, default=None, help="Calibrated π time (ns).")
@click.option("--stop", type=float, default=None, help="Longest pulse (ns).")
@click.option("--step", type=float, default=None)
@click.option("--n-packets", type=int, default=None)
@click.pass_context
def rabi(ctx, bz, bperp, t_pi, stop, step, n_packets):
    """Rabi nutation on the pump transition."""
    _execute(ctx, "rabi", {
        "field.bz": bz, "field.bperp": bperp, "pulses.pump_t_pi": t_pi, "pulses.rabi_stop": stop,
        "pulses.rabi_step": step, "pulses.n_packets": n_packets,
    }, experiments.run_rabi)


@cli.command()
@field_options
@click.option("--nu-pump", type=float, default=None)
@click.option("--nu-probe", type=float, default=None)
@click.option("--tau-stop", type=float, default=None, help="ns")
@click.option("--tau-step", type=float, default=None, help="ns")
@click.option("--n-packets", type=int, default=None)
@click.option("--selection/--no-selection", default=None)
@click.option("--control/--no-control", default=None)
@click.pass_context
def ramsey(ctx, bz, bperp, nu_pump, nu_probe, tau_stop, tau_step, n_packets, selection, control):
    """Two-frequency Ramsey with packet pre-selection."""
    _execute(ctx, "ramsey", {
        "field.bz": bz, "field.bperp": bperp, "pulses.nu_pump": nu_pump, "pulses.nu_probe": nu_probe,
        "pulses.tau_stop": tau_stop, "pulses.tau_step": tau_step, "pulses.n_packets": n_packets,
        "pulses.selection": selection, "pulses.control": control,
    }, experiments.run_ramsey)


def _parse_lines(ctx, param, value):
    if value is None:
        return None
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 4:
        raise click.BadParameter("give nu1,nu2,nu3,nu4 (use nan for a missing line)")
    try:
        return [None if p.lower() in ("nan", "") else float(p) for p in parts]
    except ValueError as e:
        raise click.BadParameter(str(e)) from e


@cli.command("invert-field")
@field_options
@click.option("--lines", callback=_parse_lines, default=None, help="nu1,nu2,nu3,nu4 in MHz.")
@click.option("--d-known", type=float, default=None, help="Half-splitting D (MHz).")
@click.option("--first-order", is_flag=True, default=False, help="Invert with the first-order line model.")
@click.pass_context
def invert_field(ctx, bz, bperp, lines, d_known, first_order):
    """Recover (Bz, B⊥, D) from the four inter-doublet lines."""
    _execute(ctx, "invert-field", {
        "field.bz": bz, "field.bperp": bperp, "analysis.lines": lines, "analysis.d_known": d_known,
        "analysis.exact": False if first_order else None,
    }, experiments.run_invert_field)


@cli.command()
@click.option("--nu-probe", type=float, default=None, help="MHz (default: pulses.nu_probe).")
@click.option("--f-r", type=float, default=None, help="Ramsey fringe frequency (MHz).")
@click.option("--theta", type=float, default=None, help="Field angle to the c-axis (deg).")
@click.option("--f-r-err", type=float, default=None)
@click.option("--theta-err", type=float, default=None)
@click.pass_context
def beff(ctx, nu_probe, f_r, theta, f_r_err, theta_err):
    """Effective field from a measured fringe frequency."""
    _execute(ctx, "beff", {
        "analysis.nu_probe": nu_probe, "analysis.f_r": f_r, "analysis.theta": theta,
        "analysis.f_r_err": f_r_err, "analysis.theta_err": theta_err,
    }, experiments.run_beff)


@cli.command()
@click.option("--t-stop", type=float, default=None, help="µs")
@click.option("--p0", type=float, default=None)
@click.option("--d0", type=float, default=None)
@click.option("--f0", type=float, default=None)
@click.pass_context
def relax(ctx, t_stop, p0, d0, f0):
    """Free decay of the diagonal multipoles."""
    _execute(ctx, "relax", {"relax.t_stop": t_stop, "relax.p0": p0, "relax.d0": d0, "relax.f0": f0},
             experiments.run_relax)


@cli.command()
@click.option("--t-pi", type=float, default=None, help="ns")
@click.option("--span", type=float, default=None, help="MHz")
@click.pass_context
def selection(ctx, t_pi, span):
    """Spectral profile of a selective π pulse."""
    _execute(ctx, "selection", {"selection.t_pi": t_pi, "selection.span": span}, experiments.run_selection)


@cli.command()
@click.option("--table", default=None, help="Measurement YAML (bundled name or path).")
@click.option("--theta", type=float, default=None)
@click.pass_context
def consistency(ctx, table, theta):
    """Compare B_eff across packets of a measurement table."""
    _execute(ctx, "consistency", {"consistency.table": table, "consistency.theta": theta},
             experiments.run_consistency)


@cli.command()
@click.pass_context
def selftest(ctx):
    """Run the analytic checks."""
    _execute(ctx, "selftest", {}, run_selftest)


if __name__ == "__main__":
    cli()
