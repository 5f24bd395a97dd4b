import math

import numpy as np
import pytest
from pydantic import ValidationError

from qudit_odmr.analysis.fitting import fft_lorentzian, fit_decaying_sinusoid
from qudit_odmr.analysis.magnetometry import b_eff_from_fringes
from qudit_odmr.engines.pulses import (
    PulseEngine,
    PulseError,
    calibrate_rabi,
    packet_selection_profile,
    rabi_from_power,
    selection_fwhm,
)
from qudit_odmr.models.center import FieldConfig
from qudit_odmr.models.drive import Delay, Pulse, PulseSequence, Readout
from qudit_odmr.models.ensemble import InhomogeneousDistribution
from qudit_odmr.physics.ensemble import enumerate_packets
from qudit_odmr.physics.multipole import D0_DIAG
from qudit_odmr.physics.spin_core import build_hamiltonian, exact_levels

OFFSET_MHZ = 4.53


# ---- Calibration -------------------------------------------------------------

def test_calibrated_amplitudes():
    assert calibrate_rabi("nu1", 1200.0) == pytest.approx(1 / 2.4 / math.sqrt(3), rel=1e-9)
    assert calibrate_rabi("nu5", 160.0) == pytest.approx(1.5625)


@pytest.mark.parametrize("transition", ["nu3", "nu9"])
def test_calibration_rejects_undriven_or_unknown_lines(transition):
    with pytest.raises(PulseError):
        calibrate_rabi(transition, 1200.0)


def test_rabi_scales_with_field_amplitude():
    assert rabi_from_power(17.0, 11.0, 0.24) == pytest.approx(0.24 * 10 ** 0.3)
    assert rabi_from_power(11.0, 11.0, 0.24) == pytest.approx(0.24)


# ---- Packet selection --------------------------------------------------------

def test_selection_profile_peak_and_first_null():
    omega = 1.0 / (2.0 * 1.2)
    profile = packet_selection_profile(np.array([0.0, math.sqrt(3.0) * omega]), 1200.0)
    assert profile[0] == pytest.approx(1.0)
    assert profile[1] == pytest.approx(0.0, abs=1e-12)


def test_selection_width_scales_inversely_with_pulse_length():
    width = selection_fwhm(1200.0)
    assert 0.6 < width < 0.75
    assert selection_fwhm(600.0) == pytest.approx(2.0 * width, rel=1e-6)


def test_resonant_packet_is_fully_transferred(params, table_field, single_packet, levels_at):
    levels = levels_at(params, table_field)
    nu1 = levels.frequency("nu1")
    pulse = Pulse(freq=nu1, rabi=calibrate_rabi("nu1", 1200.0, levels.states), duration=1200.0)
    engine = PulseEngine(params)
    _, on = engine.packet_weights(single_packet, table_field, nu1, pulse)
    _, null = engine.packet_weights(single_packet, table_field, nu1 + math.sqrt(3.0) / 2.4, pulse)
    assert on[0] == pytest.approx(1.0, rel=1e-9)
    assert null[0] == pytest.approx(0.0, abs=1e-12)


def test_selection_picks_the_central_packets(params, table_field, levels_at):
    dist = InhomogeneousDistribution(d_sigma=1.0, n_packets=41)
    levels = levels_at(params, table_field)
    nu1 = levels.frequency("nu1")
    pulse = Pulse(freq=nu1, rabi=calibrate_rabi("nu1", 1200.0, levels.states), duration=1200.0)
    packets, transfer = PulseEngine(params, workers=3).packet_weights(dist, table_field, nu1, pulse)
    assert len(packets) == transfer.size == 41
    assert np.all((transfer >= 0.0) & (transfer <= 1.0))
    assert int(np.argmax(transfer)) == 20
    assert transfer[0] < 0.05


# ---- Propagation -------------------------------------------------------------

@pytest.fixture
def engine(params):
    return PulseEngine(params)


@pytest.fixture
def moderate_levels(params, moderate_field):
    h0 = build_hamiltonian(params, moderate_field)
    return h0, exact_levels(h0)


def test_pulse_propagator_is_unitary(engine, moderate_levels):
    h0, levels = moderate_levels
    pulse = Pulse(freq=levels.frequency("nu1"), rabi=0.24, duration=333.0, phase=0.4)
    u = engine.pulse_propagator(h0, levels, pulse, t0=0.05)
    assert np.allclose(u @ u.conj().T, np.eye(4), atol=1e-10)


def test_empty_pulses_reduce_to_free_evolution(engine, moderate_levels):
    h0, levels = moderate_levels
    nu1 = levels.frequency("nu1")
    assert np.allclose(engine.pulse_propagator(h0, levels, Pulse(freq=nu1, rabi=0.3, duration=0.0), 0.0),
                       np.eye(4))
    free = engine.pulse_propagator(h0, levels, Pulse(freq=nu1, rabi=0.0, duration=100.0), 0.0)
    expected = levels.states @ np.diag(np.exp(-2j * np.pi * levels.energies * 0.1)) @ levels.states.conj().T
    assert np.allclose(free, expected)


def test_step_limit_follows_fastest_scale(engine, moderate_levels):
    _, levels = moderate_levels
    slow = engine.step_limit(Pulse(freq=5.0, rabi=0.1, duration=10.0), levels)
    fast = engine.step_limit(Pulse(freq=80.0, rabi=0.1, duration=10.0), levels)
    assert fast == pytest.approx(1.0 / (20 * 80.0))
    assert slow == pytest.approx(1.0 / (20 * np.ptp(levels.energies)))


def test_oversized_step_rejected(params, moderate_levels):
    h0, levels = moderate_levels
    coarse = PulseEngine(params, max_step=100.0)
    with pytest.raises(PulseError):
        coarse.pulse_propagator(h0, levels, Pulse(freq=levels.frequency("nu1"), rabi=0.2, duration=50.0), 0.0)


def test_readout_must_close_the_sequence():
    with pytest.raises(ValidationError):
        PulseSequence(elements=[Readout(), Delay(duration=10.0)])
    seq = PulseSequence.of(Pulse(freq=20.0, rabi=0.1, duration=30.0), Delay(duration=70.0))
    assert seq.total_duration == pytest.approx(100.0)


def test_readout_only_sequence_keeps_the_pumped_state(engine, params, single_packet):
    axial = FieldConfig(bz=100.0, bperp=0.0)
    packet = enumerate_packets(single_packet)[0]
    state = engine.final_state(packet, axial, PulseSequence.of())
    assert np.allclose(state.populations(), 0.25 + params.pump_sign * 0.2 * D0_DIAG, atol=1e-12)
    assert state.d0 == pytest.approx(params.pump_sign * 0.2, abs=1e-12)


def test_single_packet_rabi_inverts_pumped_pair(engine, params, moderate_field, single_packet):
    levels = exact_levels(build_hamiltonian(params, moderate_field))
    rabi = calibrate_rabi("nu1", 1200.0, levels.states)
    trace = engine.rabi_trace(single_packet, moderate_field, levels.frequency("nu1"), rabi,
                              [0.0, 1200.0, 2400.0], pair="nu1")
    assert trace.values[0] == pytest.approx(-0.2, abs=1e-9)
    assert trace.values[1] == pytest.approx(0.2, abs=0.03)
    assert trace.values[2] == pytest.approx(-0.2, abs=0.03)


# ---- Two-frequency Ramsey ----------------------------------------------------

def _ramsey(engine, params, field, dist, selection=True, stop=1500.0):
    levels = exact_levels(build_hamiltonian(params, field))
    nu_probe = levels.frequency("nu5") + OFFSET_MHZ
    trace = engine.ramsey_two_frequency(
        dist, field,
        nu_pump=levels.frequency("nu1"), nu_probe=nu_probe,
        taus=np.arange(0.0, stop + 5.0, 10.0),
        pump_rabi=calibrate_rabi("nu1", 1200.0, levels.states),
        probe_rabi=calibrate_rabi("nu5", 160.0, levels.states),
        selection=selection,
    )
    return trace, nu_probe, levels


def test_single_packet_ramsey_recovers_dephasing_and_field(engine, params, table_field, single_packet):
    trace, nu_probe, levels = _ramsey(engine, params, table_field, single_packet)
    fit = fit_decaying_sinusoid(trace)
    assert fit.kind == "fringes"
    assert fit.f_r == pytest.approx(nu_probe - levels.frequency("nu5"), abs=0.01)
    assert fit.t2_star == pytest.approx(params.t2_star, rel=0.1)

    estimate = b_eff_from_fringes(nu_probe, fit.f_r, theta=table_field.theta_deg)
    assert estimate.b_eff == pytest.approx(table_field.magnitude, rel=0.02)


def test_fringes_need_the_selection_pulses(engine, params, table_field, single_packet):
    selected, _, _ = _ramsey(engine, params, table_field, single_packet, stop=600.0)
    control, _, _ = _ramsey(engine, params, table_field, single_packet, selection=False, stop=600.0)
    assert np.ptp(control.values) < 0.25 * np.ptp(selected.values)


def test_broad_ensemble_loses_fringes_without_selection(params, table_field):
    engine = PulseEngine(params, workers=2)
    dist = InhomogeneousDistribution(d_sigma=1.0, n_packets=21)
    selected, _, _ = _ramsey(engine, params, table_field, dist, stop=600.0)
    control, _, _ = _ramsey(engine, params, table_field, dist, selection=False, stop=600.0)
    assert np.ptp(selected.values) > 0.0
    assert np.ptp(control.values) < 0.1 * np.ptp(selected.values)


def test_ensemble_fringe_frequency_from_spectrum(params, table_field):
    engine = PulseEngine(params, workers=2)
    dist = InhomogeneousDistribution(n_packets=21)
    trace, nu_probe, levels = _ramsey(engine, params, table_field, dist)
    peak = fft_lorentzian(trace, expected_t2=params.t2_star)
    assert peak.kind == "fringes"
    assert peak.f_r == pytest.approx(nu_probe - levels.frequency("nu5"), abs=0.05)


def test_negative_delays_rejected(engine, params, table_field, single_packet):
    with pytest.raises(PulseError):
        engine.ramsey_two_frequency(single_packet, table_field, 21.5, 11.7, [-10.0, 0.0],
                                    pump_rabi=0.24, probe_rabi=1.56)
