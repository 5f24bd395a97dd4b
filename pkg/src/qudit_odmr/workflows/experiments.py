"""
Experiment runners behind the CLI subcommands.

Each runner takes a resolved ExperimentConfig and returns a RunResult:
1. Build the physics objects (center, field, packets, relaxation)
2. Run the engine sweep
3. Fit or invert where the experiment calls for it
4. Hand tables and a JSON-ready summary back for writing
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional

import numpy as np

from qudit_odmr.analysis.fitting import FitError, fft_lorentzian, fit_decaying_sinusoid, hole_width
from qudit_odmr.analysis.magnetometry import (
    b_eff_from_fringes,
    cross_packet_consistency,
    invert_field_from_lines,
    line_model,
)
from qudit_odmr.config import Config
from qudit_odmr.engines.odmr import (
    OdmrEngine,
    OdmrSolverError,
    corner_fraction,
    default_grid,
    mode_frequencies,
    mode_signals,
    mode_strengths,
    ridge_positions,
)
from qudit_odmr.engines.pulses import (
    PulseEngine,
    calibrate_rabi,
    packet_selection_profile,
    selection_fwhm,
)
from qudit_odmr.errors import ExperimentConfigError, ResultError
from qudit_odmr.logger import log_run_step
from qudit_odmr.models.center import FieldConfig
from qudit_odmr.models.drive import Pulse
from qudit_odmr.models.experiment import ExperimentConfig
from qudit_odmr.models.results import Spectrum
from qudit_odmr.physics.multipole import (
    D0_DIAG,
    F0_DIAG,
    P0_DIAG,
    RelaxationModel,
    relax_populations,
)
from qudit_odmr.physics.spin_core import (
    M_VALUES,
    LevelSet,
    approx_levels,
    build_hamiltonian,
    exact_levels,
    transition_table,
)

log = logging.getLogger(__name__)


@dataclass
class Table:
    """Numeric output table; column names carry their units."""
    name: str
    columns: List[str]
    data: np.ndarray
    kind: Literal["series", "map"] = "series"

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.shape[1] != len(self.columns):
            raise ResultError(f"table {self.name}: {self.data.shape[1]} columns for {len(self.columns)} names")
        if not np.all(np.isfinite(self.data)):
            raise ResultError(f"table {self.name} holds non-finite values")


@dataclass
class RunResult:
    subcommand: str
    tables: List[Table] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    ok: bool = True


# ---- Shared builders ---------------------------------------------------------

def relaxation_for(cfg: ExperimentConfig) -> RelaxationModel:
    settings = cfg.relaxation
    center = cfg.center
    if settings.mode == "auto":
        return RelaxationModel.from_params(center)
    if settings.mode == "delta_m_one":
        return RelaxationModel.delta_m_one(center.t_d)
    if settings.mode == "custom":
        return RelaxationModel.custom(settings.rate_a, settings.rate_b)
    return RelaxationModel.from_times(center.t_p, center.t_d, center.t_f)


def mean_levels(cfg: ExperimentConfig, field_cfg: Optional[FieldConfig] = None) -> LevelSet:
    """Exact levels of the packet at the distribution's mean D."""
    d = cfg.distribution.d_mean / 2.0
    return exact_levels(build_hamiltonian(cfg.center, field_cfg or cfg.field, d_override=d))


def odmr_engine(cfg: ExperimentConfig) -> OdmrEngine:
    return OdmrEngine(cfg.center, cfg.optical, relaxation_for(cfg), cfg.cw.gamma_hom, cfg.workers)


def pulse_engine(cfg: ExperimentConfig) -> PulseEngine:
    return PulseEngine(cfg.center, cfg.optical, relaxation_for(cfg), cfg.workers,
                       max_step=cfg.pulses.max_step, coherence_decay=cfg.pulses.coherence_decay)


def _safe_fit(fn: Callable, *args, **kwargs) -> Optional[Dict[str, Any]]:
    try:
        return fn(*args, **kwargs).model_dump()
    except FitError as e:
        log.warning(f"{fn.__name__} failed: {e}")
        return None


# ---- Runners -------------------------------------------------------------------

def run_levels(cfg: ExperimentConfig) -> RunResult:
    d = cfg.distribution.d_mean / 2.0
    exact = mean_levels(cfg)
    approx = approx_levels(cfg.center, cfg.field, d_override=d)
    transitions = transition_table(exact)

    levels = Table("levels", ["m", "energy_exact_MHz", "energy_first_order_MHz"],
                   np.column_stack([M_VALUES, exact.energies, approx.energies]))
    lines = Table(
        "transitions",
        ["index", "freq_exact_MHz", "freq_first_order_MHz", "relative_strength"],
        [[k + 1, t.freq, approx.frequency(t.name), t.strength] for k, t in enumerate(transitions)],
    )
    summary = {
        "field": cfg.field.model_dump(),
        "energies": exact.as_dict(),
        "transitions": {t.name: {"upper": t.upper, "lower": t.lower, "freq": t.freq, "strength": t.strength}
                        for t in transitions},
    }
    log_run_step("levels", "DIAGONALIZE", "SUCCESS", f"{len(transitions)} transitions")
    return RunResult("levels", [levels, lines], summary)


def run_odmr(cfg: ExperimentConfig) -> RunResult:
    engine = odmr_engine(cfg)
    freqs = default_grid(cfg.distribution.d_mean, cfg.cw.span, cfg.cw.step)
    probe = cfg.cw.tone(float(freqs[0]), cfg.cw.probe_power)
    spectrum = engine.odmr_spectrum(cfg.distribution, cfg.field, probe, None, freqs)
    log_run_step("odmr", "SPECTRUM", "SUCCESS", f"{freqs.size} points")
    table = Table("spectrum", ["freq_MHz", "contrast_dPL_PL"], np.column_stack([freqs, spectrum.values]))
    summary = {"min_contrast": float(spectrum.values.min()), "max_contrast": float(spectrum.values.max())}
    return RunResult("odmr", [table], summary)


def _pump_frequency(cfg: ExperimentConfig, override: Optional[float]) -> float:
    return float(override) if override is not None else mean_levels(cfg).frequency("nu1")


def run_holeburn(cfg: ExperimentConfig) -> RunResult:
    engine = odmr_engine(cfg)
    nu_pump = _pump_frequency(cfg, cfg.cw.nu_pump)
    freqs = default_grid(cfg.distribution.d_mean, cfg.cw.span, cfg.cw.step)
    pump = cfg.cw.tone(nu_pump, cfg.cw.pump_power)
    probe = cfg.cw.tone(float(freqs[0]), cfg.cw.probe_power)

    spectrum = engine.lockin_difference(cfg.distribution, cfg.field, probe, pump, freqs)
    baseline = spectrum.meta["baseline"]
    removed = spectrum.values - baseline
    try:
        width: Optional[float] = hole_width(Spectrum(freqs, removed), nu_pump)
        log_run_step("holeburn", "LOCKIN", "SUCCESS", f"hole half-width {width * 1e3:.1f} kHz")
    except FitError as e:
        width = None
        log_run_step("holeburn", "LOCKIN", "SKIPPED", f"no hole fit: {e}")

    tables = [Table("lockin", ["freq_MHz", "lockin_dPL_PL", "lockin_baseline_removed_dPL_PL"],
                    np.column_stack([freqs, spectrum.values, removed]))]
    summary: Dict[str, Any] = {
        "nu_pump": nu_pump,
        "baseline": baseline,
        "hole_half_width_MHz": width,
        "modes": [{"s": m.s, "s_prime": m.s_prime, "freq": m.freq}
                  for m in mode_frequencies(nu_pump, cfg.field, cfg.center.gamma)],
        "mode_strengths": {f"{s},{sp}": v for (s, sp), v in mode_strengths(engine.relax, cfg.optical.rate).items()},
        "corner_fraction": None,
    }
    try:
        signals = mode_signals(Spectrum(freqs, removed), nu_pump, cfg.field, cfg.center)
        summary["mode_signals"] = {f"{s},{sp}": v for (s, sp), v in signals.items()}
        summary["corner_fraction"] = corner_fraction(signals)
    except OdmrSolverError as e:
        log_run_step("holeburn", "MODE_SIGNALS", "SKIPPED", str(e))

    if cfg.cw.pump_powers:
        narrow = default_grid(nu_pump, 1.0, cfg.cw.step)
        rows, skipped = [], []
        for power in cfg.cw.pump_powers:
            swept = engine.lockin_difference(cfg.distribution, cfg.field, probe,
                                             cfg.cw.tone(nu_pump, power), narrow, remove_baseline=True)
            try:
                rows.append([power, hole_width(swept, nu_pump)])
            except FitError as e:
                skipped.append(power)
                log_run_step("holeburn", "POWER_SWEEP", "SKIPPED", f"{power:g} dBm: {e}")
        if rows:
            tables.append(Table("hole_width_vs_power", ["pump_power_dBm", "hole_half_width_MHz"], rows))
        summary["skipped_pump_powers"] = skipped
        log_run_step("holeburn", "POWER_SWEEP", "SUCCESS", f"{len(rows)} of {len(cfg.cw.pump_powers)} powers")
    return RunResult("holeburn", tables, summary)


def run_modemap(cfg: ExperimentConfig) -> RunResult:
    settings = cfg.modemap
    engine = odmr_engine(cfg)
    dist = cfg.distribution.model_copy(update={"d_sigma": settings.d_sigma, "n_packets": settings.n_packets})
    nu_pump = settings.nu_pump if settings.nu_pump is not None else dist.d_mean
    freqs = default_grid(nu_pump, settings.span, settings.step)
    pump = cfg.cw.tone(nu_pump, cfg.cw.pump_power)
    probe = cfg.cw.tone(float(freqs[0]), cfg.cw.probe_power)

    fmap = engine.field_map(dist, settings.bz_values(), pump, probe, settings.bperp, freqs)
    log_run_step("modemap", "FIELD_MAP", "SUCCESS", f"{fmap.bz.size} columns")

    bz_grid, f_grid = np.meshgrid(fmap.bz, fmap.freqs, indexing="ij")
    map_table = Table("field_map", ["bz_uT", "freq_MHz", "normalized_signal"],
                      np.column_stack([bz_grid.ravel(), f_grid.ravel(), fmap.values.ravel()]), kind="map")
    trajectories = [
        [bz, m.s, m.s_prime, m.freq]
        for bz in fmap.bz
        for m in mode_frequencies(nu_pump, FieldConfig(bz=float(bz), bperp=settings.bperp), cfg.center.gamma)
    ]
    traj_table = Table("mode_trajectories", ["bz_uT", "s", "s_prime", "freq_MHz"], trajectories)
    ridges = ridge_positions(fmap)
    summary = {
        "nu_pump": nu_pump,
        "bperp": settings.bperp,
        "ridges": {f"{bz:g}": [float(f) for f in r] for bz, r in zip(fmap.bz, ridges)},
    }
    return RunResult("modemap", [map_table, traj_table], summary)


def run_rabi(cfg: ExperimentConfig) -> RunResult:
    p = cfg.pulses
    engine = pulse_engine(cfg)
    dist = cfg.distribution.model_copy(update={"n_packets": p.n_packets})
    freq = mean_levels(cfg).frequency(p.pump_transition)
    rabi = calibrate_rabi(p.pump_transition, p.pump_t_pi)
    trace = engine.rabi_trace(dist, cfg.field, freq, rabi, p.rabi_durations(), pair=p.pump_transition)
    log_run_step("rabi", "RABI_SWEEP", "SUCCESS", f"{trace.times.size} durations")

    fit = _safe_fit(fit_decaying_sinusoid, trace)
    summary: Dict[str, Any] = {"freq": freq, "rabi_amplitude_MHz": rabi, "fit": fit}
    if fit and fit["f_r"] > 0:
        summary["t_pi_fit_ns"] = 1e3 / (2.0 * fit["f_r"])
    table = Table("rabi", ["duration_ns", f"population_difference_{p.pump_transition}"],
                  np.column_stack([trace.times, trace.values]))
    return RunResult("rabi", [table], summary)


def run_ramsey(cfg: ExperimentConfig) -> RunResult:
    p = cfg.pulses
    engine = pulse_engine(cfg)
    dist = cfg.distribution.model_copy(update={"n_packets": p.n_packets})
    pump_rabi = calibrate_rabi(p.pump_transition, p.pump_t_pi)
    probe_rabi = calibrate_rabi(p.probe_transition, 2.0 * p.probe_t_half_pi)
    taus = p.taus()

    selected = engine.ramsey_two_frequency(dist, cfg.field, p.nu_pump, p.nu_probe, taus, pump_rabi, probe_rabi,
                                           p.pump_t_pi, p.probe_t_half_pi, selection=p.selection)
    log_run_step("ramsey", "RAMSEY_SWEEP", "SUCCESS", f"{taus.size} delays")
    columns = [taus, selected.values]
    names = ["tau_ns", "signal_selected_dPL_PL"]

    fringe = _safe_fit(fit_decaying_sinusoid, selected)
    fft = _safe_fit(fft_lorentzian, selected, cfg.analysis.expected_t2)
    theta = cfg.analysis.theta if cfg.analysis.theta is not None else cfg.field.theta_deg
    summary: Dict[str, Any] = {
        "fringe_fit": fringe,
        "fft": fft,
        "theta_deg": theta,
        "configured_field_uT": cfg.field.magnitude,
    }
    if fft and fft["kind"] == "fringes" and fft["f_r"] < p.nu_probe:
        estimate = b_eff_from_fringes(p.nu_probe, fft["f_r"], theta, cfg.center.gamma,
                                      fft["f_r_err"], cfg.analysis.theta_err)
        summary["b_eff"] = estimate.model_dump()

    if p.control:
        control = engine.ramsey_two_frequency(dist, cfg.field, p.nu_pump, p.nu_probe, taus, pump_rabi,
                                              probe_rabi, p.pump_t_pi, p.probe_t_half_pi, selection=False)
        columns.append(control.values)
        names.append("signal_control_dPL_PL")
        reference = float(np.ptp(selected.values)) or 1.0
        summary["control_contrast_ratio"] = float(np.ptp(control.values)) / reference
        log_run_step("ramsey", "CONTROL_SWEEP", "SUCCESS")
    return RunResult("ramsey", [Table("ramsey", names, np.column_stack(columns))], summary)


def run_invert_field(cfg: ExperimentConfig) -> RunResult:
    a = cfg.analysis
    if a.lines is not None:
        lines = np.array([np.nan if v is None else v for v in a.lines], dtype=float)
        source = "config"
    else:
        f = cfg.field
        lines = line_model(f.bz, f.bperp, cfg.distribution.d_mean / 2.0, cfg.center)
        source = "synthetic"
    result = invert_field_from_lines(lines, cfg.center, a.d_known, a.exact)
    log_run_step("invert-field", "INVERT", "SUCCESS", f"rms residual {result.residual:.2e} MHz")
    table = Table("inversion", ["bz_uT", "bperp_uT", "two_d_MHz", "residual_MHz", "theta_deg"],
                  [[result.bz, result.bperp, 2.0 * result.d, result.residual, result.theta_deg]])
    summary = {"lines_source": source, "lines": [None if np.isnan(v) else float(v) for v in lines],
               "result": result.model_dump(), "theta_deg": result.theta_deg}
    return RunResult("invert-field", [table], summary)


def run_beff(cfg: ExperimentConfig) -> RunResult:
    a = cfg.analysis
    if a.f_r is None:
        raise ExperimentConfigError("beff: analysis.f_r (measured fringe frequency) is not set")
    nu_probe = a.nu_probe if a.nu_probe is not None else cfg.pulses.nu_probe
    theta = a.theta if a.theta is not None else cfg.field.theta_deg
    estimate = b_eff_from_fringes(nu_probe, a.f_r, theta, cfg.center.gamma, a.f_r_err, a.theta_err)
    table = Table("b_eff", ["nu_probe_MHz", "f_r_MHz", "theta_deg", "b_eff_uT", "b_err_uT"],
                  [[nu_probe, a.f_r, theta, estimate.b_eff, estimate.b_err]])
    return RunResult("beff", [table], estimate.model_dump())


def run_relax(cfg: ExperimentConfig) -> RunResult:
    settings = cfg.relax
    model = relaxation_for(cfg)
    d0 = settings.d0 if settings.d0 is not None else cfg.center.pump_sign * abs(cfg.optical.target_d0)
    populations = 0.25 + settings.p0 * P0_DIAG + d0 * D0_DIAG + settings.f0 * F0_DIAG
    if np.any(populations < 0):
        raise ExperimentConfigError(f"relax: initial multipoles give negative populations {populations}")

    times = settings.times()
    evolved = np.array([relax_populations(populations, model, t) for t in times])
    coeffs = evolved @ np.column_stack([P0_DIAG, D0_DIAG, F0_DIAG])
    t_p, t_d, t_f = model.multipole_times()
    law = np.column_stack([
        settings.p0 * np.exp(-times / t_p),
        d0 * np.exp(-times / t_d),
        settings.f0 * np.exp(-times / t_f),
    ])
    table = Table("multipole_decay", ["t_us", "p0", "d0", "f0", "p0_law", "d0_law", "f0_law"],
                  np.column_stack([times, coeffs, law]))
    summary = {"t_p": t_p, "t_d": t_d, "t_f": t_f, "max_law_deviation": float(np.max(np.abs(coeffs - law)))}
    log_run_step("relax", "DECAY", "SUCCESS", f"T_p={t_p:.1f} T_d={t_d:.1f} T_f={t_f:.1f} µs")
    return RunResult("relax", [table], summary)


def run_selection(cfg: ExperimentConfig) -> RunResult:
    s = cfg.selection
    detunings = s.detunings()
    profile = packet_selection_profile(detunings, s.t_pi)
    summary = {
        "t_pi_ns": s.t_pi,
        "fwhm_MHz": selection_fwhm(s.t_pi),
        "first_null_MHz": math.sqrt(3.0) / (2.0 * s.t_pi * 1e-3),
    }
    tables = [Table("selection_profile", ["detuning_MHz", "transferred_population"],
                    np.column_stack([detunings, profile]))]

    p = cfg.pulses
    dist = cfg.distribution.model_copy(update={"n_packets": p.n_packets})
    pulse = Pulse(freq=p.nu_pump, rabi=calibrate_rabi(p.pump_transition, s.t_pi), duration=s.t_pi)
    packets, transfer = pulse_engine(cfg).packet_weights(dist, cfg.field, p.nu_pump, pulse, p.pump_transition)
    weights = np.array([pk.weight for pk in packets])
    summary["nu_pump"] = p.nu_pump
    summary["selected_fraction"] = float(weights @ transfer)
    tables.append(Table("selection_packets", ["two_d_MHz", "b_offset_uT", "weight", "transferred_population"],
                        np.column_stack([[2.0 * pk.d_value for pk in packets],
                                         [pk.b_offset for pk in packets], weights, transfer])))
    log_run_step("selection", "PACKET_SELECTION", "SUCCESS", f"{len(packets)} packets")
    return RunResult("selection", tables, summary)


def run_consistency(cfg: ExperimentConfig, table: Optional[str] = None) -> RunResult:
    settings = cfg.consistency
    rows = Config().load_table(table or settings.table)
    try:
        measurements = [(r["nu_pump"], r["nu_probe"], r["f_r"], r.get("f_r_err", 0.0)) for r in rows]
    except KeyError as e:
        raise ExperimentConfigError(f"measurement row is missing {e}") from e
    labels = [str(r.get("label", k)) for k, r in enumerate(rows)]
    report = cross_packet_consistency(measurements, settings.theta, cfg.center.gamma,
                                      settings.theta_err, labels)
    group_of = {i: g for g, members in enumerate(report.groups) for i in members}
    data = [
        [k, m[0], m[1], m[2], m[3], est.b_eff, est.b_err, group_of[k]]
        for k, (m, est) in enumerate(zip(measurements, report.estimates))
    ]
    out = Table("consistency", ["row", "nu_pump_MHz", "nu_probe_MHz", "f_r_MHz", "f_r_err_MHz",
                                "b_eff_uT", "b_err_uT", "group"], data)
    log_run_step("consistency", "COMPARE", "SUCCESS", f"{len(report.groups)} field group(s)")
    return RunResult("consistency", [out], report.model_dump())


RUNNERS: Dict[str, Callable[..., RunResult]] = {
    "levels": run_levels,
    "odmr": run_odmr,
    "holeburn": run_holeburn,
    "modemap": run_modemap,
    "rabi": run_rabi,
    "ramsey": run_ramsey,
    "invert-field": run_invert_field,
    "beff": run_beff,
    "relax": run_relax,
    "selection": run_selection,
    "consistency": run_consistency,
}

__all__ = [
    "RUNNERS",
    "RunResult",
    "Table",
    "mean_levels",
    "relaxation_for",
    "run_beff",
    "run_consistency",
    "run_holeburn",
    "run_invert_field",
    "run_levels",
    "run_modemap",
    "run_odmr",
    "run_rabi",
    "run_ramsey",
    "run_relax",
    "run_selection",
]
