__all__ = [
    "SpinOperators", "LevelSet", "Transition", "SpinCoreError",
    "build_spin_operators", "build_hamiltonian", "exact_levels", "approx_levels",
    "transition_table", "matrix_elements", "LABELS", "TRANSITIONS",
    "MultipoleBasis", "MultipoleState", "RelaxationModel", "MultipoleError",
    "build_multipole_basis", "decompose", "reconstruct", "build_rate_matrix",
    "relax_diagonal", "relax_populations", "suppressed_mode_factor",
    "EnsembleError", "enumerate_packets", "inhomogeneous_line", "lorentzian",
]

from .spin_core import (
    SpinOperators, LevelSet, Transition, SpinCoreError, build_spin_operators,
    build_hamiltonian, exact_levels, approx_levels, transition_table,
    matrix_elements, LABELS, TRANSITIONS,
)
from .multipole import (
    MultipoleBasis, MultipoleState, RelaxationModel, MultipoleError,
    build_multipole_basis, decompose, reconstruct, build_rate_matrix,
    relax_diagonal, relax_populations, suppressed_mode_factor,
)
from .ensemble import EnsembleError, enumerate_packets, inhomogeneous_line, lorentzian
