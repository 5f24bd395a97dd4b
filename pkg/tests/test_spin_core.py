import numpy as np
import pytest

from qudit_odmr.models.center import FieldConfig
from qudit_odmr.physics.spin_core import (
    INTER_DOUBLET,
    TRANSITIONS,
    SpinCoreError,
    approx_levels,
    build_hamiltonian,
    build_spin_operators,
    exact_levels,
    transition_table,
)


def test_spin_operators_obey_angular_momentum_algebra():
    ops = build_spin_operators()
    assert np.allclose(ops.sx @ ops.sy - ops.sy @ ops.sx, 1j * ops.sz)
    total = ops.sx @ ops.sx + ops.sy @ ops.sy + ops.sz @ ops.sz
    assert np.allclose(total, 15.0 / 4.0 * np.eye(4))


def test_hamiltonian_is_hermitian(params, table_field):
    h = build_hamiltonian(params, table_field)
    assert np.allclose(h, h.conj().T)


def test_zero_field_doublets(params):
    levels = exact_levels(build_hamiltonian(params, FieldConfig()))
    d = params.d
    assert levels.energies == pytest.approx([d, -d, -d, d], abs=1e-12)
    for name in INTER_DOUBLET:
        assert levels.frequency(name) == pytest.approx(params.two_d, abs=1e-12)
    assert levels.frequency("nu5") == pytest.approx(0.0, abs=1e-12)


def test_first_order_lines_follow_closed_form(params):
    field = FieldConfig(bz=50.0, bperp=20.0)
    levels = approx_levels(params, field)
    g = params.gamma_per_ut
    b = 0.5 * g * field.bz
    c = 0.5 * g * np.hypot(field.bz, 2 * field.bperp)
    two_d = params.two_d
    assert levels.frequency("nu1") == pytest.approx(two_d - 3 * b + c)
    assert levels.frequency("nu2") == pytest.approx(two_d + 3 * b - c)
    assert levels.frequency("nu3") == pytest.approx(two_d - 3 * b - c)
    assert levels.frequency("nu4") == pytest.approx(two_d + 3 * b + c)
    assert levels.frequency("nu5") == pytest.approx(2 * c)


@pytest.mark.parametrize("bz, bperp, tol", [(20.0, 10.0, 0.02), (100.0, 30.0, 0.1)])
def test_first_order_tracks_diagonalization_in_weak_field(params, bz, bperp, tol):
    field = FieldConfig(bz=bz, bperp=bperp)
    exact = exact_levels(build_hamiltonian(params, field))
    approx = approx_levels(params, field)
    for name in TRANSITIONS:
        assert exact.frequency(name) == pytest.approx(approx.frequency(name), abs=tol)


def test_labels_follow_basis_character(params, moderate_field):
    levels = exact_levels(build_hamiltonian(params, moderate_field))
    overlap = np.abs(levels.states) ** 2
    assert np.all(np.diag(overlap) > 0.85)


def test_packet_override_shifts_splitting(params, moderate_field, levels_at):
    base = levels_at(params, moderate_field)
    shifted = levels_at(params, moderate_field, d=params.d + 0.5)
    for name in INTER_DOUBLET:
        assert shifted.frequency(name) - base.frequency(name) == pytest.approx(1.0, abs=0.01)


def test_bare_transition_strengths(params):
    table = {t.name: t for t in transition_table(approx_levels(params, FieldConfig()))}
    assert table["nu5"].strength == pytest.approx(1.0)
    assert table["nu1"].strength == pytest.approx(0.75)
    assert table["nu2"].strength == pytest.approx(0.75)
    assert table["nu3"].strength == pytest.approx(0.0, abs=1e-12)
    assert table["nu4"].strength == pytest.approx(0.0, abs=1e-12)
    assert (table["nu1"].upper, table["nu1"].lower) == ("-3/2", "-1/2")


def test_transverse_field_opens_double_quantum_lines(params, table_field, levels_at):
    table = {t.name: t for t in transition_table(levels_at(params, table_field))}
    assert table["nu3"].strength > 1e-4
    assert table["nu3"].strength < table["nu1"].strength


def test_non_hermitian_hamiltonian_rejected():
    with pytest.raises(SpinCoreError):
        exact_levels(np.triu(np.ones((4, 4))))


def test_wrong_dimension_rejected():
    with pytest.raises(SpinCoreError):
        exact_levels(np.eye(3))


def test_first_order_levels_within_second_order_bound_on_weak_field_grid(params):
    d = params.d
    g = params.gamma_per_ut
    for bz in np.linspace(0.0, 16.0, 20):
        for bperp in np.linspace(0.0, 16.0, 20):
            field = FieldConfig(bz=bz, bperp=bperp)
            assert g * field.magnitude / d <= 0.05
            exact = exact_levels(build_hamiltonian(params, field))
            approx = approx_levels(params, field)
            bound = 4 * (g * bperp) ** 2 / (2 * d)
            assert np.max(np.abs(exact.energies - approx.energies)) <= bound + 1e-9
