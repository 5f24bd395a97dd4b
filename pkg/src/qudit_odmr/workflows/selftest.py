"""Analytic checks of the simulator, each one cheap and independent of the config grids."""

from __future__ import annotations

import logging
from typing import Callable, List, Tuple

import numpy as np

from qudit_odmr.analysis.magnetometry import b_eff_from_fringes
from qudit_odmr.engines.odmr import mode_frequencies
from qudit_odmr.engines.pulses import selection_fwhm
from qudit_odmr.logger import log_run_step
from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.experiment import ExperimentConfig
from qudit_odmr.physics.multipole import RelaxationModel, build_multipole_basis, build_rate_matrix
from qudit_odmr.physics.spin_core import TRANSITIONS, approx_levels, build_hamiltonian, exact_levels
from qudit_odmr.workflows.experiments import RunResult, Table

log = logging.getLogger(__name__)

Check = Tuple[bool, str]


def check_rate_eigenvalues(cfg: ExperimentConfig) -> Check:
    t_d = cfg.center.t_d
    rates = np.sort(np.linalg.eigvalsh(build_rate_matrix(RelaxationModel.delta_m_one(t_d))))
    expected = np.array([0.0, 1.0 / (3.0 * t_d), 1.0 / t_d, 2.0 / t_d])
    ok = np.allclose(rates, expected, rtol=1e-9, atol=1e-12)
    return ok, f"rates {np.round(rates, 8).tolist()} vs {np.round(expected, 8).tolist()}"


def check_first_order_levels(cfg: ExperimentConfig) -> Check:
    params = cfg.center
    field = FieldConfig(bz=20.0, bperp=10.0)
    exact = exact_levels(build_hamiltonian(params, field))
    approx = approx_levels(params, field)
    worst = max(abs(exact.frequency(t) - approx.frequency(t)) for t in TRANSITIONS)
    return worst < 0.02, f"largest line deviation {worst:.4f} MHz at |B| = {field.magnitude:.1f} µT"


def check_zero_field_modes(cfg: ExperimentConfig) -> Check:
    nu_pump = cfg.center.two_d
    offsets = [abs(m.freq - nu_pump) for m in mode_frequencies(nu_pump, FieldConfig(), cfg.center.gamma)]
    return max(offsets) < 1e-12, f"{len(offsets)} modes collapse onto the pump"


def check_field_table(cfg: ExperimentConfig) -> Check:
    gamma = CenterParams().gamma
    rows = [(11.70, 4.51, 223.67), (11.70, 3.92, 242.03)]
    got = [b_eff_from_fringes(nu, f_r, 19.0, gamma).b_eff for nu, f_r, _ in rows]
    ok = all(abs(g - want) < 0.05 for g, (_, _, want) in zip(got, rows))
    return ok, "B_eff " + ", ".join(f"{g:.2f}" for g in got) + " µT"


def check_selection_width(cfg: ExperimentConfig) -> Check:
    fwhm = selection_fwhm(1200.0)
    return 0.4 <= fwhm <= 0.8, f"FWHM {fwhm:.3f} MHz for a 1.2 µs π pulse"


def check_multipole_basis(cfg: ExperimentConfig) -> Check:
    m = build_multipole_basis().matrices
    gram = np.einsum("aij,bij->ab", m.conj(), m)
    # the identity stays unnormalized: Tr(1·1) = 4
    expected = np.eye(16)
    expected[0, 0] = 4.0
    deviation = float(np.max(np.abs(gram - expected)))
    return deviation < 1e-10, f"Gram deviation {deviation:.1e}"


CHECKS: List[Tuple[str, Callable[[ExperimentConfig], Check]]] = [
    ("rate_matrix_eigenvalues", check_rate_eigenvalues),
    ("first_order_levels", check_first_order_levels),
    ("zero_field_modes", check_zero_field_modes),
    ("field_table_arithmetic", check_field_table),
    ("selection_fwhm", check_selection_width),
    ("multipole_orthonormality", check_multipole_basis),
]


def run_selftest(cfg: ExperimentConfig) -> RunResult:
    results = {}
    for name, check in CHECKS:
        try:
            passed, detail = check(cfg)
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        results[name] = {"passed": bool(passed), "detail": detail}
        log_run_step("selftest", name.upper(), "SUCCESS" if passed else "FAILED", detail)

    ok = all(r["passed"] for r in results.values())
    table = Table("selftest", ["check", "passed"],
                  [[k, float(r["passed"])] for k, r in enumerate(results.values())])
    return RunResult("selftest", [table], {"checks": results, "all_passed": ok}, ok=ok)
