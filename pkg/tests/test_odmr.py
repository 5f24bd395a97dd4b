import numpy as np
import pytest

from qudit_odmr.analysis.fitting import hole_width
from qudit_odmr.engines.odmr import (
    CORNERS,
    OPPOSITE_SIGN,
    SAME_SIGN,
    OdmrEngine,
    OdmrSolverError,
    corner_fraction,
    default_grid,
    exact_mode_frequencies,
    mode_frequencies,
    mode_signal,
    mode_signals,
    mode_strengths,
    ridge_positions,
    spectrum_difference,
    target_populations,
)
from qudit_odmr.errors import ResultError
from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.drive import DriveTone, OpticalPump
from qudit_odmr.models.ensemble import InhomogeneousDistribution
from qudit_odmr.models.results import Spectrum
from qudit_odmr.physics.multipole import RelaxationModel, suppressed_mode_factor
from qudit_odmr.physics.spin_core import INTER_DOUBLET


def tone(freq, power):
    return DriveTone(freq=freq, power_dbm=power, rabi_scale=0.005)


# ---- Mode positions ----------------------------------------------------------

def test_modes_collapse_at_zero_field():
    modes = mode_frequencies(26.8, FieldConfig())
    assert len(modes) == 9
    assert all(m.freq == pytest.approx(26.8) for m in modes)


def test_mode_offsets_follow_field(moderate_field):
    g = 28.0e-3
    modes = {(m.s, m.s_prime): m.freq for m in mode_frequencies(25.0, moderate_field)}
    assert modes[(0, 0)] == pytest.approx(25.0)
    assert modes[(1, 0)] == pytest.approx(25.0 + 3 * g * 100.0)
    assert modes[(0, -1)] == pytest.approx(25.0 - g * np.hypot(100.0, 60.0))
    assert modes[(-1, 1)] == pytest.approx(25.0 - 3 * g * 100.0 + g * np.hypot(100.0, 60.0))


def test_exact_satellites_match_first_order(params, moderate_field):
    nu_pump = 24.5
    first_order = {(m.s, m.s_prime): m.freq for m in mode_frequencies(nu_pump, moderate_field)}
    exact = exact_mode_frequencies(nu_pump, moderate_field, params)
    assert [(m.s, m.s_prime) for m in exact] == [(0, 0), (1, -1), (0, -1), (1, 0)]
    for line in exact:
        assert line.freq == pytest.approx(first_order[(line.s, line.s_prime)], abs=0.02)


# ---- Mode strengths ----------------------------------------------------------

def test_delta_m_one_kinetics_cancel_opposite_sign_modes():
    strengths = mode_strengths(RelaxationModel.delta_m_one(100.0))
    assert strengths[(0, 0)] == pytest.approx(1.0)
    for key in OPPOSITE_SIGN + SAME_SIGN:
        assert strengths[key] == pytest.approx(0.0, abs=1e-9)
    assert strengths[(0, -1)] > 0.1


def test_multipole_kernel_values():
    strengths = mode_strengths(RelaxationModel.from_times(400.0, 100.0, 50.0), normalize=False)
    # two inner pumps each contribute 0.2Tp + Td + 0.8Tf to the hole
    assert strengths[(0, 0)] == pytest.approx(440.0)
    assert strengths[(1, -1)] == pytest.approx((5 * 100.0 - 400.0 - 4 * 50.0) / 5)
    assert strengths[(0, -1)] == pytest.approx(0.4 * 400.0 + 100.0 - 0.4 * 50.0)


@pytest.mark.parametrize("t_p, t_d, t_f", [(300.0, 100.0, 50.0), (400.0, 100.0, 50.0), (250.0, 120.0, 40.0)])
def test_corner_strengths_follow_relaxation_factor(t_p, t_d, t_f):
    strengths = mode_strengths(RelaxationModel.from_times(t_p, t_d, t_f), normalize=False)
    for key in OPPOSITE_SIGN:
        assert strengths[key] == pytest.approx(suppressed_mode_factor(t_p, t_d, t_f) / 5, abs=1e-9)
    for key in SAME_SIGN:
        assert strengths[key] == 0.0


def test_no_corner_survives_delta_m_one_kinetics():
    strengths = mode_strengths(RelaxationModel.delta_m_one(100.0), normalize=False)
    for key in CORNERS:
        assert strengths[key] == pytest.approx(0.0, abs=1e-9)
    assert strengths[(0, 1)] == pytest.approx(200.0)
    assert strengths[(1, 0)] == pytest.approx(0.0, abs=1e-9)


# ---- Rate equations ------------------------------------------------------------

def test_undriven_solution_is_pumped_target(params):
    engine = OdmrEngine(params)
    n = engine.solve_populations(np.zeros((3, 5)))
    assert np.allclose(n, target_populations(params, OpticalPump()))
    assert np.allclose(n[0], [0.15, 0.35, 0.35, 0.15])


def test_strong_drive_equalizes_its_pair(params):
    engine = OdmrEngine(params)
    rates = np.zeros((1, 5))
    rates[0, 0] = 1e3  # nu1: -3/2 <-> -1/2
    n = engine.solve_populations(rates)[0]
    assert n[3] == pytest.approx(n[2], abs=1e-3)
    assert n.sum() == pytest.approx(1.0)


def test_single_packet_spectrum_dips_on_inter_doublet_lines(params, moderate_field, single_packet, levels_at):
    engine = OdmrEngine(params)
    freqs = default_grid(26.8, span=8.0, step=0.01)
    spectrum = engine.odmr_spectrum(single_packet, moderate_field, tone(freqs[0], 7.0), freqs=freqs)
    assert spectrum.values.max() <= 1e-12
    assert spectrum.values.min() < 0.0
    levels = levels_at(params, moderate_field)
    deepest = freqs[np.argmin(spectrum.values)]
    assert min(abs(deepest - levels.frequency(n)) for n in INTER_DOUBLET) < 0.05


def test_hole_sits_at_pump_after_baseline_removal(params, moderate_field, single_packet, levels_at):
    engine = OdmrEngine(params)
    nu_pump = levels_at(params, moderate_field).frequency("nu1")
    freqs = default_grid(nu_pump, span=1.0, step=0.01)
    spectrum = engine.lockin_difference(single_packet, moderate_field, tone(freqs[0], 7.0),
                                        tone(nu_pump, 14.0), freqs, remove_baseline=True)
    peak = int(np.argmax(spectrum.values))
    assert spectrum.values[peak] > 0.0
    assert freqs[peak] == pytest.approx(nu_pump, abs=0.02)
    assert 0.05 < hole_width(spectrum, nu_pump) < 1.0
    assert "baseline" in spectrum.meta


def test_mode_signal_removes_smooth_background():
    freqs = default_grid(10.0, span=3.0, step=0.01)
    peak = 0.02 / (1.0 + ((freqs - 10.0) / 0.02) ** 2)
    tail = 0.3 / (1.0 + ((freqs - 7.5) / 0.4) ** 2)
    spectrum = Spectrum(freqs, peak + tail)
    area = mode_signal(spectrum, 10.0)
    expected = mode_signal(Spectrum(freqs, peak), 10.0)
    assert area > 0.0
    assert area == pytest.approx(expected, rel=0.05)
    assert abs(mode_signal(Spectrum(freqs, tail), 10.0)) < 0.05 * area


def test_mode_signal_needs_flanks_on_grid():
    freqs = default_grid(10.0, span=0.4, step=0.01)
    with pytest.raises(OdmrSolverError):
        mode_signal(Spectrum(freqs, np.zeros_like(freqs)), 10.0)


def _corner_fraction(relax):
    params = CenterParams()
    engine = OdmrEngine(params, relax=relax)
    dist = InhomogeneousDistribution(d_mean=26.8, d_sigma=1.0, n_packets=321)
    field = FieldConfig(bz=150.0, bperp=30.0)
    freqs = default_grid(26.8, span=18.5, step=0.01)
    spectrum = engine.lockin_difference(dist, field, tone(freqs[0], 0.0), tone(26.8, 7.0), freqs,
                                        remove_baseline=True)
    return corner_fraction(mode_signals(spectrum, 26.8, field, params))


def test_ensemble_corners_vanish_under_delta_m_one():
    assert _corner_fraction(RelaxationModel.delta_m_one(100.0)) < 0.01


def test_ensemble_corners_appear_when_relaxation_factor_is_nonzero():
    assert _corner_fraction(RelaxationModel.from_times(400.0, 100.0, 50.0)) > 0.05


def test_corner_fraction_needs_every_mode():
    with pytest.raises(OdmrSolverError):
        corner_fraction({(0, 1): 1.0})


@pytest.mark.parametrize("bz, bperp", [(0.0, 0.0), (60.0, 8.0), (100.0, 10.0), (150.0, 10.0), (200.0, 10.0)])
def test_satellite_extrema_sit_on_mode_positions(params, bz, bperp):
    engine = OdmrEngine(params, gamma_hom=50.0)
    dist = InhomogeneousDistribution(d_mean=26.8, d_sigma=1.0, n_packets=1601)
    field = FieldConfig(bz=bz, bperp=bperp)
    freqs = default_grid(26.8, span=6.0, step=0.01)
    spectrum = engine.lockin_difference(dist, field, tone(freqs[0], -6.0), tone(26.8, 0.0), freqs,
                                        remove_baseline=True)
    modes = {(m.s, m.s_prime): m.freq for m in mode_frequencies(26.8, field, params.gamma)}
    for key in ((0, 0), (0, -1), (0, 1)):
        near = np.abs(freqs - modes[key]) <= 0.1
        extremum = freqs[near][np.argmax(np.abs(spectrum.values[near]))]
        assert abs(extremum - modes[key]) <= 0.01 + 1e-9


def test_worker_count_does_not_change_output(params, moderate_field):
    dist = InhomogeneousDistribution(d_sigma=0.5, n_packets=9)
    freqs = default_grid(26.8, span=3.0, step=0.05)
    args = (dist, moderate_field, tone(freqs[0], 7.0), tone(24.6, 14.0), freqs)
    serial = OdmrEngine(params, workers=1).lockin_difference(*args)
    threaded = OdmrEngine(params, workers=4).lockin_difference(*args)
    assert np.array_equal(serial.values, threaded.values)


def test_field_map_ridges_follow_mode_trajectories(params):
    engine = OdmrEngine(params)
    dist = InhomogeneousDistribution(d_mean=26.8, d_sigma=1.0, n_packets=321)
    nu_pump = 26.8
    freqs = default_grid(nu_pump, span=6.0, step=0.01)
    bz_values = [50.0, 100.0]
    fmap = engine.field_map(dist, bz_values, tone(nu_pump, 14.0), tone(freqs[0], 7.0),
                            bperp=60.0, freqs=freqs)
    assert np.max(np.abs(fmap.values), axis=1) == pytest.approx([1.0, 1.0])

    for bz, ridges in zip(bz_values, ridge_positions(fmap, height=0.01)):
        field = FieldConfig(bz=bz, bperp=60.0)
        lower = {(m.s, m.s_prime): m.freq for m in exact_mode_frequencies(nu_pump, field, params, "nu1")}
        upper = {(m.s, m.s_prime): m.freq for m in exact_mode_frequencies(nu_pump, field, params, "nu2")}
        for expected in (nu_pump, lower[(0, -1)], upper[(0, 1)]):
            assert np.min(np.abs(ridges - expected)) < 0.05


def test_field_map_needs_increasing_field(params):
    engine = OdmrEngine(params)
    with pytest.raises(OdmrSolverError):
        engine.field_map(InhomogeneousDistribution(n_packets=3), [100.0, 50.0], tone(26.8, 14.0),
                         tone(20.0, 7.0), freqs=default_grid(26.8, 1.0, 0.1))


def test_spectrum_difference_needs_common_grid():
    a = Spectrum(np.linspace(0, 1, 5), np.zeros(5))
    b = Spectrum(np.linspace(0, 2, 5), np.zeros(5))
    with pytest.raises(OdmrSolverError):
        spectrum_difference(a, b)


def test_spectrum_rejects_non_finite_values():
    with pytest.raises(ResultError):
        Spectrum(np.linspace(0, 1, 3), np.array([0.0, np.nan, 0.0]))
