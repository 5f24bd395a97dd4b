"""
Time-domain propagation of pulse sequences in the lab frame.

During a pulse the Hamiltonian is H0 + 2Ω·cos(2πν·t + φ)·Sx, with t the
absolute time since the start of the sequence. One drive period is
integrated with piecewise-constant steps and reused for every whole period
of the pulse. Delays evolve freely in the eigenbasis and relax through the
multipole picture.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from qudit_odmr.engines.base import PacketEngine
from qudit_odmr.errors import QuditOdmrError
from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.drive import Delay, OpticalPump, Pulse, PulseSequence, Readout
from qudit_odmr.models.ensemble import InhomogeneousDistribution, SpinPacket
from qudit_odmr.models.results import TimeTrace
from qudit_odmr.physics.ensemble import enumerate_packets
from qudit_odmr.physics.multipole import (
    D0_DIAG,
    MultipoleState,
    RelaxationModel,
    decompose,
    reconstruct,
    relax_diagonal,
)
from qudit_odmr.physics.spin_core import (
    TRANSITIONS,
    LevelSet,
    build_hamiltonian,
    build_spin_operators,
    exact_levels,
    matrix_elements,
)

log = logging.getLogger(__name__)

STEPS_PER_CYCLE = 20


class PulseError(QuditOdmrError):
    pass


# ---- Calibration -------------------------------------------------------------

def calibrate_rabi(transition: str, t_pi: float, states: Optional[np.ndarray] = None) -> float:
    """Drive amplitude Ω (MHz) giving a π rotation on ``transition`` in t_pi ns.

    The effective Rabi frequency is Ω_eff = 2Ω·|<i|Sx|j>| and t_π = 1/(2Ω_eff).
    """
    if transition not in TRANSITIONS:
        raise PulseError(f"unknown transition '{transition}'")
    if t_pi <= 0:
        raise PulseError(f"π-pulse length must be positive, got {t_pi}")
    upper, lower = TRANSITIONS[transition]
    element = matrix_elements(states)[upper, lower]
    if element < 1e-9:
        raise PulseError(f"{transition} is not driven by Sx")
    omega_eff = 1.0 / (2.0 * t_pi * 1e-3)
    return float(omega_eff / (2.0 * element))


def rabi_from_power(power_dbm: float, ref_power_dbm: float, ref_rabi: float) -> float:
    """Scale a calibrated amplitude to another power; Ω ∝ 10^(P/20)."""
    return float(ref_rabi * 10.0 ** ((power_dbm - ref_power_dbm) / 20.0))


# ---- Packet selection --------------------------------------------------------

def packet_selection_profile(detunings: np.ndarray, t_pi: float) -> np.ndarray:
    """Population transferred by a π pulse of length t_pi (ns) at each detuning (MHz)."""
    omega = 1.0 / (2.0 * t_pi * 1e-3)
    det = np.asarray(detunings, dtype=float)
    general = np.sqrt(omega**2 + det**2)
    return omega**2 / general**2 * np.sin(np.pi * general * t_pi * 1e-3) ** 2


def selection_fwhm(t_pi: float) -> float:
    """Full width at half maximum of the selection profile (MHz)."""
    omega = 1.0 / (2.0 * t_pi * 1e-3)
    # the first null sits at Δ = √3·Ω, so the half point lies inside it
    half = brentq(lambda d: packet_selection_profile(np.array([d]), t_pi)[0] - 0.5,
                  0.0, math.sqrt(3.0) * omega)
    return float(2.0 * half)


# ---- Propagation -------------------------------------------------------------

def _unitary_steps(h0: np.ndarray, pulse: Pulse, t_start: float, length: float, n: int) -> np.ndarray:
    """Time-ordered product of n piecewise-constant exponentials; times in µs."""
    sx = build_spin_operators().sx
    dt = length / n
    t_mid = t_start + (np.arange(n) + 0.5) * dt
    drive = 2.0 * pulse.rabi * np.cos(2.0 * np.pi * pulse.freq * t_mid + pulse.phase)
    hams = h0[None, :, :] + drive[:, None, None] * sx[None, :, :]
    values, vectors = np.linalg.eigh(hams)
    phases = np.exp(-2j * np.pi * values * dt)
    steps = np.einsum("kij,kj,klj->kil", vectors, phases, vectors.conj())
    total = np.eye(4, dtype=complex)
    for step in steps:
        total = step @ total
    return total


class PulseEngine(PacketEngine):
    """Pulse sequences on single packets and ensembles."""

    def __init__(self, params: CenterParams, optical: Optional[OpticalPump] = None,
                 relax: Optional[RelaxationModel] = None, workers: int = 1,
                 max_step: Optional[float] = None,
                 coherence_decay: str = "t2_star"):
        super().__init__(params, relax, workers)
        self.optical = optical or OpticalPump()
        self.max_step = max_step  # ns
        self.coherence_decay = coherence_decay

    def describe(self) -> Dict[str, object]:
        return {
            "engine": "pulses",
            "optical": self.optical.model_dump(),
            "max_step_ns": self.max_step,
            "coherence_decay": self.coherence_decay,
        }

    def step_limit(self, pulse: Pulse, levels: LevelSet) -> float:
        """Largest allowed step (µs) for a pulse on these levels."""
        spread = float(np.ptp(levels.energies))
        fastest = max(pulse.freq, pulse.rabi, spread)
        return 1.0 / (STEPS_PER_CYCLE * fastest)

    def pulse_propagator(self, h0: np.ndarray, levels: LevelSet, pulse: Pulse,
                         t0: float) -> np.ndarray:
        """Unitary of one pulse starting at absolute time t0 (µs)."""
        duration = pulse.duration * 1e-3
        if duration == 0.0 or pulse.rabi == 0.0:
            return _free_unitary(levels, duration)
        if pulse.freq <= 0:
            raise PulseError(f"pulse carrier must be positive, got {pulse.freq}")

        limit = self.step_limit(pulse, levels)
        dt_max = limit
        if self.max_step is not None:
            dt_max = self.max_step * 1e-3
            if dt_max > limit * (1 + 1e-9):
                raise PulseError(
                    f"step {self.max_step} ns exceeds the limit {limit * 1e3:.3f} ns for a "
                    f"{pulse.freq:.3f} MHz pulse"
                )

        period = 1.0 / pulse.freq
        per_period = max(1, math.ceil(period / dt_max))
        n_full = int(math.floor(duration / period + 1e-9))
        remainder = max(0.0, duration - n_full * period)

        total = np.eye(4, dtype=complex)
        if n_full:
            one_period = _unitary_steps(h0, pulse, t0, period, per_period)
            total = np.linalg.matrix_power(one_period, n_full)
        if remainder > 1e-12:
            n_rem = max(1, math.ceil(remainder / dt_max))
            total = _unitary_steps(h0, pulse, t0 + n_full * period, remainder, n_rem) @ total
        return total

    def free_evolution(self, rho: np.ndarray, levels: LevelSet, tau: float) -> np.ndarray:
        """Delay of tau µs: eigenbasis phases, then multipole relaxation."""
        v = levels.states
        rho_e = v.conj().T @ rho @ v
        e = levels.energies
        rho_e = rho_e * np.exp(-2j * np.pi * (e[:, None] - e[None, :]) * tau)
        relaxed = relax_diagonal(decompose(rho_e), tau, self.params, self.coherence_decay)
        return v @ reconstruct(relaxed) @ v.conj().T

    def initial_state(self, levels: LevelSet) -> np.ndarray:
        """Optically pumped populations on the labelled eigenstates."""
        d0 = self.params.pump_sign * abs(self.optical.target_d0)
        populations = 0.25 + d0 * D0_DIAG
        v = levels.states
        return v @ np.diag(populations).astype(complex) @ v.conj().T

    def readout(self, rho: np.ndarray, rho0: np.ndarray, levels: LevelSet, readout: Readout) -> float:
        v = levels.states
        pops = np.real(np.diag(v.conj().T @ rho @ v))
        if readout.pair is not None:
            if readout.pair not in TRANSITIONS:
                raise PulseError(f"unknown readout pair '{readout.pair}'")
            upper, lower = TRANSITIONS[readout.pair]
            return float(pops[upper] - pops[lower])
        pops0 = np.real(np.diag(v.conj().T @ rho0 @ v))
        return float(self.optical.contrast_scale * (pops0 @ D0_DIAG - pops @ D0_DIAG))

    def evolve(self, packet: SpinPacket, field: FieldConfig, sequence: PulseSequence,
               rho0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, LevelSet, Readout]:
        """Density matrix at the readout, with the start state, levels and readout element."""
        h0 = build_hamiltonian(self.params, field.shifted(packet.b_offset), d_override=packet.d_value)
        levels = exact_levels(h0)
        if rho0 is None:
            rho0 = self.initial_state(levels)
        rho = rho0
        t = 0.0
        for element in sequence.elements:
            if isinstance(element, Pulse):
                u = self.pulse_propagator(h0, levels, element, t)
                rho = u @ rho @ u.conj().T
            elif isinstance(element, Delay):
                rho = self.free_evolution(rho, levels, element.duration * 1e-3)
            else:
                return rho, rho0, levels, element
            t += element.duration * 1e-3
        raise PulseError("sequence ended without a readout")

    def final_state(self, packet: SpinPacket, field: FieldConfig, sequence: PulseSequence,
                    rho0: Optional[np.ndarray] = None) -> MultipoleState:
        rho, _, _, _ = self.evolve(packet, field, sequence, rho0)
        return decompose(rho)

    def propagate(self, packet: SpinPacket, field: FieldConfig, sequence: PulseSequence) -> float:
        """Run a sequence on one packet and return its readout."""
        rho, rho0, levels, readout = self.evolve(packet, field, sequence)
        return self.readout(rho, rho0, levels, readout)

    def packet_weights(self, dist: InhomogeneousDistribution, field: FieldConfig, nu_pump: float,
                       pulse: Pulse, transition: str = "nu1") -> Tuple[List[SpinPacket], np.ndarray]:
        """Population each packet moves across ``transition`` under a pulse at ``nu_pump``.

        Two-level transfer Ω²/(Ω² + Δ²)·sin²(π√(Ω² + Δ²)·t) with the packet's own
        detuning and Ω = 2·rabi·|<i|Sx|j>|.
        """
        if transition not in TRANSITIONS:
            raise PulseError(f"unknown transition '{transition}'")
        upper, lower = TRANSITIONS[transition]
        packets = enumerate_packets(dist)
        t = pulse.duration * 1e-3

        def transfer(packet: SpinPacket) -> float:
            levels = self.packet_levels(packet, field)
            omega = 2.0 * pulse.rabi * matrix_elements(levels.states)[upper, lower]
            det = levels.frequency(transition) - nu_pump
            general = math.hypot(omega, det)
            if general == 0.0:
                return 0.0
            return float(omega**2 / general**2 * math.sin(math.pi * general * t) ** 2)

        return packets, np.array(self.sweep(packets, transfer, "PACKET_SELECTION"))

    def ensemble_signal(self, dist: InhomogeneousDistribution, field: FieldConfig,
                        sequences: Sequence[PulseSequence], operation: str = "PULSE_SWEEP") -> np.ndarray:
        """Weighted readout of every sequence, summed over packets in order."""
        packets = enumerate_packets(dist)
        rows = self.sweep(
            packets,
            lambda p: np.array([self.propagate(p, field, seq) for seq in sequences]),
            operation,
        )
        return self.weighted_sum(packets, rows)

    # ---- Experiments ---------------------------------------------------------

    def rabi_trace(self, dist: InhomogeneousDistribution, field: FieldConfig, freq: float,
                   rabi: float, durations: Sequence[float], pair: Optional[str] = None,
                   preselect: Optional[Pulse] = None) -> TimeTrace:
        """Readout versus pulse length (ns), optionally after a selection pulse."""
        durations = np.asarray(durations, dtype=float)
        if np.any(durations < 0):
            raise PulseError("pulse durations must be non-negative")
        head: List[Pulse] = [preselect] if preselect is not None else []
        sequences = [
            PulseSequence.of(*head, Pulse(freq=freq, rabi=rabi, duration=float(d)), readout=Readout(pair=pair))
            for d in durations
        ]
        values = self.ensemble_signal(dist, field, sequences, "RABI_SWEEP")
        meta = {"freq": freq, "rabi": rabi, "pair": pair,
                "preselect": preselect.model_dump() if preselect else None, **self.describe()}
        return TimeTrace(times=durations, values=values, meta=meta)

    def ramsey_two_frequency(self, dist: InhomogeneousDistribution, field: FieldConfig,
                             nu_pump: float, nu_probe: float, taus: Sequence[float],
                             pump_rabi: float, probe_rabi: float,
                             t_pi: float = 1200.0, t_half_pi: float = 80.0,
                             selection: bool = True) -> TimeTrace:
        """Packet-selective Ramsey on the ±1/2 doublet.

        Sequence: π(ν_pump) · π/2(ν_probe) · τ · π/2(ν_probe) · π(ν_pump), then
        the contrast readout. Without ``selection`` the ν_pump pulses are left out.
        """
        taus = np.asarray(taus, dtype=float)
        if np.any(taus < 0):
            raise PulseError("delays must be non-negative")
        select = Pulse(freq=nu_pump, rabi=pump_rabi, duration=t_pi)
        half = Pulse(freq=nu_probe, rabi=probe_rabi, duration=t_half_pi)

        sequences = []
        for tau in taus:
            body = [half, Delay(duration=float(tau)), half]
            if selection:
                body = [select, *body, select]
            sequences.append(PulseSequence.of(*body))

        values = self.ensemble_signal(dist, field, sequences, "RAMSEY_SWEEP")
        meta = {
            "nu_pump": nu_pump, "nu_probe": nu_probe, "selection": selection,
            "t_pi": t_pi, "t_half_pi": t_half_pi,
            "pump_rabi": pump_rabi, "probe_rabi": probe_rabi, **self.describe(),
        }
        return TimeTrace(times=taus, values=values, meta=meta)


def _free_unitary(levels: LevelSet, duration: float) -> np.ndarray:
    v = levels.states
    return v @ np.diag(np.exp(-2j * np.pi * levels.energies * duration)) @ v.conj().T
