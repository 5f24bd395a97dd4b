"""
Steady-state CW ODMR under one or two microwave tones.

Populations of the four labelled levels follow rate equations

    0 = -R·n + R·n_t + k·(n_t - n) + Σ W_ij(ν)·(n_j - n_i)

where n_t is the optically pumped target, R the relaxation generator and
W_ij a Lorentzian drive rate on each transition. Coherences are dropped.
The contrast is linear in the quadrupole amplitude d0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq
from scipy.signal import find_peaks

from qudit_odmr.engines.base import PacketEngine
from qudit_odmr.errors import QuditOdmrError
from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.drive import DriveTone, OpticalPump
from qudit_odmr.models.ensemble import InhomogeneousDistribution, SpinPacket
from qudit_odmr.models.results import FieldMap, Spectrum
from qudit_odmr.physics.ensemble import DEFAULT_GAMMA_HOM, enumerate_packets
from qudit_odmr.physics.multipole import (
    D0_DIAG,
    MultipoleState,
    RelaxationModel,
    build_rate_matrix,
    slowest_rate,
)
from qudit_odmr.physics.spin_core import (
    INTER_DOUBLET,
    TRANSITIONS,
    LevelSet,
    build_hamiltonian,
    exact_levels,
    matrix_elements,
)

log = logging.getLogger(__name__)

PAIRS = np.array(list(TRANSITIONS.values()))

# (pumped, probed) -> (s, s') satellite index for Bz > 0
MODE_OF: Dict[Tuple[str, str], Tuple[int, int]] = {
    ("nu1", "nu2"): (1, -1), ("nu1", "nu3"): (0, -1), ("nu1", "nu4"): (1, 0),
    ("nu2", "nu1"): (-1, 1), ("nu2", "nu3"): (-1, 0), ("nu2", "nu4"): (0, 1),
    ("nu3", "nu1"): (0, 1), ("nu3", "nu2"): (1, 0), ("nu3", "nu4"): (1, 1),
    ("nu4", "nu1"): (-1, 0), ("nu4", "nu2"): (0, -1), ("nu4", "nu3"): (-1, -1),
}
SAME_SIGN = ((1, 1), (-1, -1))
OPPOSITE_SIGN = ((1, -1), (-1, 1))
CORNERS = SAME_SIGN + OPPOSITE_SIGN
EDGES = ((1, 0), (-1, 0), (0, 1), (0, -1))
# lines the CW pump saturates
PUMPED = ("nu1", "nu2")


class OdmrSolverError(QuditOdmrError):
    pass


def default_grid(center: float, span: float = 15.0, step: float = 0.01) -> np.ndarray:
    """Probe grid over [center - span, center + span]."""
    n = int(round(2 * span / step)) + 1
    return np.linspace(center - span, center + span, n)


def target_populations(params: CenterParams, optical: OpticalPump) -> np.ndarray:
    """Level populations of the optically pumped state, d0 signed by the site."""
    d0 = params.pump_sign * abs(optical.target_d0)
    return 0.25 + d0 * D0_DIAG


def spectrum_difference(on: Spectrum, off: Spectrum) -> Spectrum:
    if on.freqs.shape != off.freqs.shape or not np.array_equal(on.freqs, off.freqs):
        raise OdmrSolverError("spectra are on different frequency grids")
    return Spectrum(freqs=on.freqs, values=on.values - off.values, meta=dict(on.meta))


# ---- Mode positions and strengths ------------------------------------------------

@dataclass(frozen=True)
class ModeLine:
    s: int
    s_prime: int
    freq: float


def mode_frequencies(nu_pump: float, field: FieldConfig, gamma: float = 28.0) -> List[ModeLine]:
    """ν_pump + 3sγBz + s'γ√(Bz² + 4B⊥²) for s, s' ∈ {-1, 0, 1}."""
    g = gamma * 1e-3
    outer = 3.0 * g * field.bz
    inner = g * np.hypot(field.bz, 2.0 * field.bperp)
    return [
        ModeLine(s, sp, float(nu_pump + s * outer + sp * inner))
        for s in (-1, 0, 1)
        for sp in (-1, 0, 1)
    ]


def exact_mode_frequencies(nu_pump: float, field: FieldConfig, params: CenterParams,
                           pumped: str = "nu1") -> List[ModeLine]:
    """Satellites of the packet whose exact ``pumped`` line sits at ``nu_pump``."""
    def detuning(d: float) -> float:
        return exact_levels(build_hamiltonian(params, field, d_override=d)).frequency(pumped) - nu_pump

    g = params.gamma_per_ut
    b = 0.5 * g * field.bz
    c = 0.5 * g * np.hypot(field.bz, 2.0 * field.bperp)
    shift = {"nu1": -3 * b + c, "nu2": 3 * b - c, "nu3": -3 * b - c, "nu4": 3 * b + c}[pumped]
    guess = (nu_pump - shift) / 2.0
    try:
        d_packet = brentq(detuning, guess - 2.0, guess + 2.0, xtol=1e-12)
    except ValueError as exc:
        raise OdmrSolverError(f"no packet resonant with {pumped} at {nu_pump} MHz") from exc

    levels = exact_levels(build_hamiltonian(params, field, d_override=d_packet))
    lines = [ModeLine(0, 0, float(nu_pump))]
    for probed in INTER_DOUBLET:
        if probed == pumped:
            continue
        s, sp = MODE_OF[(pumped, probed)]
        lines.append(ModeLine(s, sp, nu_pump + levels.frequency(probed) - levels.frequency(pumped)))
    return lines


def _pair_vector(transition: str) -> np.ndarray:
    upper, lower = TRANSITIONS[transition]
    v = np.zeros(4)
    v[upper], v[lower] = 1.0, -1.0
    return v


def mode_strengths(relax: RelaxationModel, optical_rate: float = 0.0,
                   normalize: bool = True) -> Dict[Tuple[int, int], float]:
    """Relaxation-mediated pump-to-probe coupling for every (s, s') mode.

    Coupling between a pumped pair u and a probed pair e is e·G·u with
    G = (R + k)⁻¹ on the traceless sector. The pump saturates the strong inner
    lines nu1 and nu2. Their disjoint pair feeds the corners with
    (5T_d - T_p - 4T_f)/5; corners no inner line reaches stay at zero.
    """
    r = build_rate_matrix(relax) + optical_rate * np.eye(4)
    kernel = np.linalg.pinv(r)

    strengths = {(s, sp): 0.0 for s in (-1, 0, 1) for sp in (-1, 0, 1)}
    for pumped in PUMPED:
        u = _pair_vector(pumped)
        for probed in INTER_DOUBLET:
            key = (0, 0) if probed == pumped else MODE_OF[(pumped, probed)]
            strengths[key] += float(_pair_vector(probed) @ kernel @ u)

    if normalize:
        scale = abs(strengths[(0, 0)]) or 1.0
        strengths = {k: v / scale for k, v in strengths.items()}
    return strengths


def mode_signal(spectrum: Spectrum, center: float, window: float = 0.05,
                flank: Tuple[float, float] = (0.5, 1.0)) -> float:
    """Integral of a spectrum over center ± window above its local background.

    The background is a quadratic fitted on flank[0] <= |f - center| <= flank[1].
    """
    offset = spectrum.freqs - center
    near = np.abs(offset) <= window
    side = (np.abs(offset) >= flank[0]) & (np.abs(offset) <= flank[1])
    if not near.any() or not (side & (offset < 0)).any() or not (side & (offset > 0)).any():
        raise OdmrSolverError(f"grid does not cover {center:.3f} ± {flank[1]} MHz")
    coeffs = P.polyfit(offset[side], spectrum.values[side], 2)
    step = float(np.mean(np.diff(spectrum.freqs)))
    return float(np.sum(spectrum.values[near] - P.polyval(offset[near], coeffs)) * step)


def mode_signals(spectrum: Spectrum, nu_pump: float, field: FieldConfig, params: CenterParams,
                 window: float = 0.05, flank: Tuple[float, float] = (0.5, 1.0)) -> Dict[Tuple[int, int], float]:
    """mode_signal at the exact position of every satellite the grid covers."""
    positions: Dict[Tuple[int, int], float] = {}
    for pumped in INTER_DOUBLET:
        for line in exact_mode_frequencies(nu_pump, field, params, pumped):
            positions.setdefault((line.s, line.s_prime), line.freq)

    signals = {}
    for key, freq in positions.items():
        try:
            signals[key] = mode_signal(spectrum, freq, window, flank)
        except OdmrSolverError:
            log.debug(f"Mode {key} at {freq:.3f} MHz is off the probe grid")
    return signals


def corner_fraction(signals: Dict[Tuple[int, int], float]) -> float:
    """Summed |signal| of the four corners over the strongest edge satellite."""
    missing = [key for key in CORNERS + EDGES if key not in signals]
    if missing:
        raise OdmrSolverError(f"modes {missing} are off the probe grid")
    strongest = max(abs(signals[key]) for key in EDGES)
    if strongest == 0.0:
        raise OdmrSolverError("no satellite signal to compare against")
    return sum(abs(signals[key]) for key in CORNERS) / strongest


def ridge_positions(fmap: FieldMap, height: float = 0.05) -> List[np.ndarray]:
    """Per-column feature positions (MHz) of a normalized field map."""
    ridges = []
    for column in fmap.values:
        peaks, _ = find_peaks(np.abs(column), height=height)
        ridges.append(fmap.freqs[peaks])
    return ridges


# ---- Engine --------------------------------------------------------------------

@dataclass
class _PacketResponse:
    d0_target: float
    d0_pump: float
    d0_probe: np.ndarray
    d0_both: np.ndarray


class OdmrEngine(PacketEngine):
    """CW spectra of an inhomogeneous ensemble."""

    def __init__(self, params: CenterParams, optical: Optional[OpticalPump] = None,
                 relax: Optional[RelaxationModel] = None,
                 gamma_hom: float = DEFAULT_GAMMA_HOM, workers: int = 1):
        super().__init__(params, relax, workers)
        self.optical = optical or OpticalPump()
        self.gamma_hom = gamma_hom
        self._rate = build_rate_matrix(self.relax)
        self._gamma1 = slowest_rate(self.relax) + self.optical.rate
        self._n_target = target_populations(params, self.optical)

    def describe(self) -> Dict[str, object]:
        return {
            "engine": "odmr",
            "relaxation": self.relax.model_dump(),
            "optical": self.optical.model_dump(),
            "gamma_hom_khz": self.gamma_hom,
        }

    # ---- Rate equations ------------------------------------------------------

    def drive_rates(self, levels: LevelSet, elements: np.ndarray, tone: DriveTone,
                    freqs: np.ndarray, gamma_hom: float) -> np.ndarray:
        """W (len(freqs), 5): Lorentzian rate of every transition for a tone at each freq."""
        line = np.array([levels.frequency(name) for name in TRANSITIONS])
        omega_eff = 2.0 * tone.amplitude * elements[PAIRS[:, 0], PAIRS[:, 1]]
        gamma = gamma_hom * 1e-3
        if self._gamma1 > 0:
            width = gamma * np.sqrt(1.0 + omega_eff**2 / (gamma * self._gamma1))
        else:
            width = np.full_like(omega_eff, gamma)
        detuning = np.asarray(freqs, dtype=float)[:, None] - line[None, :]
        return omega_eff**2 * width / (detuning**2 + width**2)

    def solve_populations(self, rates: np.ndarray) -> np.ndarray:
        """Steady-state populations for a stack of drive-rate rows (N, 5)."""
        rates = np.atleast_2d(rates)
        k = self.optical.rate
        relax = self._rate + k * np.eye(4)
        a = np.broadcast_to(-relax, (rates.shape[0], 4, 4)).copy()
        for t, (i, j) in enumerate(PAIRS):
            w = rates[:, t]
            a[:, i, i] -= w
            a[:, j, j] -= w
            a[:, i, j] += w
            a[:, j, i] += w
        rhs = np.broadcast_to(-(relax @ self._n_target), (rates.shape[0], 4)).copy()
        # normalization row replaces one balance equation
        a[:, 0, :] = 1.0
        rhs[:, 0] = 1.0
        try:
            return np.linalg.solve(a, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise OdmrSolverError("singular rate equations; relaxation graph is disconnected "
                                  "and the optical rate is zero") from exc

    def packet_steady_state(self, packet: SpinPacket, field: FieldConfig,
                            tones: Sequence[DriveTone]) -> MultipoleState:
        levels = self.packet_levels(packet, field)
        elements = matrix_elements(levels.states)
        rates = np.zeros((1, len(TRANSITIONS)))
        for tone in tones:
            rates += self.drive_rates(levels, elements, tone, np.array([tone.freq]), packet.gamma_hom)
        return MultipoleState.from_populations(self.solve_populations(rates)[0])

    def _response(self, packet: SpinPacket, field: FieldConfig, probe: DriveTone,
                  pump: Optional[DriveTone], freqs: np.ndarray) -> _PacketResponse:
        levels = self.packet_levels(packet, field)
        elements = matrix_elements(levels.states)
        probe_rates = self.drive_rates(levels, elements, probe, freqs, packet.gamma_hom)
        d0_probe = self.solve_populations(probe_rates) @ D0_DIAG
        d0_target = float(self._n_target @ D0_DIAG)
        if pump is None:
            return _PacketResponse(d0_target, d0_target, d0_probe, d0_probe)

        pump_rates = self.drive_rates(levels, elements, pump, np.array([pump.freq]), packet.gamma_hom)
        d0_pump = float(self.solve_populations(pump_rates)[0] @ D0_DIAG)
        d0_both = self.solve_populations(probe_rates + pump_rates) @ D0_DIAG
        return _PacketResponse(d0_target, d0_pump, d0_probe, d0_both)

    def _responses(self, dist: InhomogeneousDistribution, field: FieldConfig, probe: DriveTone,
                   pump: Optional[DriveTone], freqs: np.ndarray, workers: Optional[int] = None):
        packets = enumerate_packets(dist, self.gamma_hom)
        saved, self.workers = self.workers, workers or self.workers
        try:
            responses = self.sweep(packets, lambda p: self._response(p, field, probe, pump, freqs),
                                   "PACKET_STEADY_STATES")
        finally:
            self.workers = saved
        return packets, responses

    def _meta(self, dist, field, probe, pump) -> Dict[str, object]:
        return {
            "field": field.model_dump(),
            "probe": probe.model_dump(),
            "pump": pump.model_dump() if pump else None,
            "distribution": dist.model_dump(),
            **self.describe(),
        }

    # ---- Spectra ---------------------------------------------------------------

    def odmr_spectrum(self, dist: InhomogeneousDistribution, field: FieldConfig,
                      probe: DriveTone, pump: Optional[DriveTone] = None,
                      freqs: Optional[np.ndarray] = None) -> Spectrum:
        """contrast·Σ w·(d0 without microwaves - d0 with the tones) per probe frequency."""
        freqs = default_grid(dist.d_mean) if freqs is None else np.asarray(freqs, dtype=float)
        packets, responses = self._responses(dist, field, probe, pump, freqs)
        rows = [r.d0_target - r.d0_both for r in responses]
        values = self.optical.contrast_scale * self.weighted_sum(packets, rows)
        return Spectrum(freqs=freqs, values=values, meta=self._meta(dist, field, probe, pump))

    def lockin_difference(self, dist: InhomogeneousDistribution, field: FieldConfig,
                          probe: DriveTone, pump: DriveTone,
                          freqs: Optional[np.ndarray] = None,
                          remove_baseline: bool = False,
                          workers: Optional[int] = None) -> Spectrum:
        """Spectrum with the pump on minus the spectrum with the pump off.

        ``remove_baseline`` subtracts the probe-independent pump-only term,
        leaving the two-tone interaction.
        """
        freqs = default_grid(dist.d_mean) if freqs is None else np.asarray(freqs, dtype=float)
        packets, responses = self._responses(dist, field, probe, pump, freqs, workers)
        scale = self.optical.contrast_scale
        meta = self._meta(dist, field, probe, pump)

        on = Spectrum(freqs, scale * self.weighted_sum(packets, [r.d0_target - r.d0_both for r in responses]), meta)
        off = Spectrum(freqs, scale * self.weighted_sum(packets, [r.d0_target - r.d0_probe for r in responses]), meta)
        diff = spectrum_difference(on, off)
        baseline = scale * float(self.weighted_sum(packets, [r.d0_target - r.d0_pump for r in responses]))
        diff.meta["baseline"] = baseline
        if remove_baseline:
            diff.values = diff.values - baseline
        return diff

    def field_map(self, dist: InhomogeneousDistribution, bz_values: Sequence[float],
                  pump: DriveTone, probe: DriveTone, bperp: float = 60.0,
                  freqs: Optional[np.ndarray] = None) -> FieldMap:
        """Baseline-removed lock-in spectra per Bz, each normalized to its own maximum."""
        bz_values = np.asarray(bz_values, dtype=float)
        if bz_values.size > 1 and not np.all(np.diff(bz_values) > 0):
            raise OdmrSolverError("field values must be strictly increasing")
        freqs = default_grid(dist.d_mean) if freqs is None else np.asarray(freqs, dtype=float)

        columns = []
        for bz in bz_values:
            spec = self.lockin_difference(dist, FieldConfig(bz=float(bz), bperp=bperp), probe, pump,
                                          freqs=freqs, remove_baseline=True)
            peak = np.max(np.abs(spec.values))
            columns.append(spec.values / peak if peak > 0 else spec.values)
            log.debug(f"Field map column Bz={bz:.1f} µT done (peak {peak:.3e})")

        meta = {"bperp": bperp, "pump": pump.model_dump(), "probe": probe.model_dump(),
                "distribution": dist.model_dump(), **self.describe()}
        return FieldMap(bz=bz_values, freqs=freqs, values=np.array(columns), meta=meta)
