"""
Absolute DC magnetometry from Ramsey fringes and field inversion from ODMR lines.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from qudit_odmr.errors import QuditOdmrError
from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.results import ConsistencyReport, FieldEstimate, LineInversion
from qudit_odmr.physics.spin_core import INTER_DOUBLET, approx_levels, build_hamiltonian, exact_levels

log = logging.getLogger(__name__)

AGREEMENT_SIGMAS = 2.0


class MagnetometryError(QuditOdmrError):
    pass


class InversionError(MagnetometryError):
    pass


# ---- Effective field -----------------------------------------------------------

def b_eff_from_fringes(nu_probe: float, f_r: float, theta: float, gamma: float = 28.0,
                       f_r_err: float = 0.0, theta_err: float = 0.0) -> FieldEstimate:
    """B_eff = (ν_probe - f_R) / (γ·√(1 + 3 sin²θ)); angles in degrees, field in µT."""
    if nu_probe <= f_r:
        raise MagnetometryError(
            f"probe {nu_probe} MHz must sit above the fringe frequency {f_r} MHz"
        )
    th = math.radians(theta)
    geometry = math.sqrt(1.0 + 3.0 * math.sin(th) ** 2)
    g = gamma * 1e-3
    b_eff = (nu_probe - f_r) / (g * geometry)

    # ∂B/∂f_R = -1/(γ·g(θ)); ∂B/∂θ = -B·3 sinθ cosθ / g(θ)²
    d_f = f_r_err / (g * geometry)
    d_theta = b_eff * 3.0 * math.sin(th) * math.cos(th) / geometry**2 * math.radians(theta_err)
    return FieldEstimate(b_eff=b_eff, b_err=math.hypot(d_f, d_theta), theta=theta)


# ---- Line inversion ------------------------------------------------------------

def line_model(bz: float, bperp: float, d: float, params: CenterParams,
               exact: bool = True) -> np.ndarray:
    """ν1..ν4 for a packet with half-splitting d (MHz) in the field (bz, bperp)."""
    field = FieldConfig(bz=bz, bperp=bperp)
    if exact:
        levels = exact_levels(build_hamiltonian(params, field, d_override=d))
    else:
        levels = approx_levels(params, field, d_override=d)
    return np.array([levels.frequency(name) for name in INTER_DOUBLET])


def _closed_form_start(lines: np.ndarray, gamma_per_ut: float,
                       d_known: Optional[float]) -> Tuple[float, float, float]:
    """First-order estimate: 4D = ν1 + ν2, 6b = ν4 - ν1, 2c = ν1 - ν3."""
    nu1, nu2, nu3, nu4 = lines
    d = d_known if d_known is not None else np.nanmean([(nu1 + nu2) / 4.0, (nu3 + nu4) / 4.0])
    b = (nu4 - nu1) / 6.0 if np.isfinite(nu4 - nu1) else (nu2 - nu3) / 6.0
    c = (nu1 - nu3) / 2.0 if np.isfinite(nu1 - nu3) else (nu4 - nu2) / 2.0
    bz = 2.0 * b / gamma_per_ut if np.isfinite(b) else 0.0
    inner = 2.0 * abs(c) / gamma_per_ut if np.isfinite(c) else abs(bz)
    bperp = 0.5 * math.sqrt(max(inner**2 - bz**2, 0.0))
    if not np.isfinite(d):
        d = float(np.nanmean(lines)) / 2.0
    return float(bz), float(bperp), float(d)


def invert_field_from_lines(lines: Sequence[float], params: Optional[CenterParams] = None,
                            d_known: Optional[float] = None, exact: bool = True) -> LineInversion:
    """Least-squares (bz, bperp, d) from the four inter-doublet lines.

    Missing lines are given as NaN. ``d_known`` (half-splitting, MHz) removes
    D from the fit. Starts cover both signs of bz; the lowest residual wins.
    """
    params = params or CenterParams()
    lines = np.asarray(lines, dtype=float)
    if lines.shape != (4,):
        raise InversionError("expected the four lines nu1..nu4 (NaN for missing ones)")
    measured = np.isfinite(lines)
    n_free = 2 if d_known is not None else 3
    if np.count_nonzero(measured) < n_free:
        raise InversionError(
            f"{np.count_nonzero(measured)} lines cannot fix {n_free} free parameters"
        )

    bz0, bperp0, d0 = _closed_form_start(lines, params.gamma_per_ut, d_known)
    starts = [(bz0, bperp0), (-bz0, bperp0), (bz0, bperp0 + 20.0), (0.5 * bz0, 2.0 * bperp0 + 10.0)]

    def unpack(x):
        return (x[0], x[1], d_known) if d_known is not None else (x[0], x[1], x[2])

    def residual(x):
        bz, bperp, d = unpack(x)
        return line_model(bz, bperp, d, params, exact)[measured] - lines[measured]

    lower = [-np.inf, 0.0] + ([] if d_known is not None else [0.0])
    best = None
    for bz_s, bperp_s in starts:
        x0 = [bz_s, max(bperp_s, 0.0)] + ([] if d_known is not None else [d0])
        try:
            result = least_squares(residual, x0, bounds=(lower, np.inf), method="trf",
                                   xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=500)
        except ValueError as exc:
            log.debug(f"Inversion start {x0} failed: {exc}")
            continue
        if best is None or result.cost < best.cost:
            best = result

    if best is None:
        raise InversionError("no start converged")
    bz, bperp, d = unpack(best.x)
    rms = float(np.sqrt(np.mean(best.fun**2)))
    log.debug(f"Inverted lines: Bz={bz:.3f} µT, B⊥={bperp:.3f} µT, D={d:.6f} MHz, rms={rms:.2e}")
    return LineInversion(bz=float(bz), bperp=float(bperp), d=float(d), residual=rms, starts=len(starts))


# ---- Consistency across packets ----------------------------------------------

def cross_packet_consistency(measurements: Sequence[Sequence[float]], theta: float,
                             gamma: float = 28.0, theta_err: float = 0.0,
                             labels: Optional[List[str]] = None) -> ConsistencyReport:
    """B_eff per (ν_pump, ν_probe, f_R[, f_R_err]) row, grouped by agreement.

    Two estimates agree when they differ by at most twice their combined error.
    """
    if len(measurements) < 2:
        raise MagnetometryError("consistency needs at least two measurements")
    estimates = []
    for row in measurements:
        _, nu_probe, f_r, *rest = row
        f_err = rest[0] if rest else 0.0
        estimates.append(b_eff_from_fringes(nu_probe, f_r, theta, gamma, f_err, theta_err))

    def agree(a: FieldEstimate, b: FieldEstimate) -> bool:
        return abs(a.b_eff - b.b_eff) <= AGREEMENT_SIGMAS * math.hypot(a.b_err, b.b_err) + 1e-9

    pairs = [
        (i, j, agree(estimates[i], estimates[j]))
        for i in range(len(estimates))
        for j in range(i + 1, len(estimates))
    ]
    groups: List[List[int]] = []
    for i, est in enumerate(estimates):
        for group in groups:
            if all(agree(est, estimates[k]) for k in group):
                group.append(i)
                break
        else:
            groups.append([i])

    values = np.array([e.b_eff for e in estimates])
    return ConsistencyReport(
        estimates=estimates,
        groups=groups,
        mean=float(values.mean()),
        spread=float(np.ptp(values)),
        consistent=len(groups) == 1,
        pairs=pairs,
        labels=labels,
    )
