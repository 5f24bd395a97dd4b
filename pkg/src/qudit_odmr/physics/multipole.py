"""
Multipole decomposition of the spin-3/2 density matrix and Δm=±1 relaxation.

The basis is the unit matrix followed by the rank-1 (dipole), rank-2
(quadrupole) and rank-3 (octupole) spherical-tensor operators, taken as
Hermitian combinations and normalized so that Tr(B_i B_j) = δ_ij for every
non-unit member. With the unit member equal to the identity, thermal
equilibrium is the coefficient vector (1/4, 0, ..., 0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Literal, Optional, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from qudit_odmr.errors import QuditOdmrError
from qudit_odmr.models.center import CenterParams
from qudit_odmr.physics.spin_core import build_spin_operators

log = logging.getLogger(__name__)

TRACE_TOL = 1e-8
RANKS = (1, 2, 3)

# coefficient slots of the diagonal members
P0_INDEX, D0_INDEX, F0_INDEX = 1, 4, 9

# normalized diagonal multipoles in the population sector
P0_DIAG = np.array([3.0, 1.0, -1.0, -3.0]) / np.sqrt(20.0)
D0_DIAG = np.array([1.0, -1.0, -1.0, 1.0]) / 2.0
F0_DIAG = np.array([1.0, -3.0, 3.0, -1.0]) / np.sqrt(20.0)


class MultipoleError(QuditOdmrError):
    pass


# ---- Basis ---------------------------------------------------------------------

@dataclass(frozen=True)
class MultipoleBasis:
    matrices: np.ndarray  # (16, 4, 4)
    labels: Tuple[str, ...]
    ranks: Tuple[int, ...]

    @property
    def diag_p0(self) -> np.ndarray:
        return self.matrices[P0_INDEX]

    @property
    def diag_d0(self) -> np.ndarray:
        return self.matrices[D0_INDEX]

    @property
    def diag_f0(self) -> np.ndarray:
        return self.matrices[F0_INDEX]


def _normalize(op: np.ndarray) -> np.ndarray:
    return op / np.sqrt(np.trace(op.conj().T @ op).real)


def _spherical_components(rank: int) -> List[np.ndarray]:
    """T^k_q for q = k..-k, built by lowering (S+)^k with commutators."""
    ops = build_spin_operators()
    top = np.linalg.matrix_power(ops.sp, rank)
    components = [_normalize(top)]
    for _ in range(2 * rank):
        components.append(_normalize(ops.sm @ components[-1] - components[-1] @ ops.sm))
    return components


@lru_cache(maxsize=1)
def build_multipole_basis() -> MultipoleBasis:
    matrices = [np.eye(4, dtype=complex)]
    labels = ["I"]
    ranks = [0]
    for rank, name in zip(RANKS, "PDF"):
        comps = _spherical_components(rank)
        t0 = comps[rank].real.astype(complex)
        if t0[0, 0].real < 0:
            t0 = -t0
        matrices.append(_normalize(t0))
        labels.append(f"{name}0")
        ranks.append(rank)
        for q in range(1, rank + 1):
            t_q = comps[rank - q]
            herm = t_q + t_q.conj().T
            anti = 1j * (t_q - t_q.conj().T)
            matrices.extend([_normalize(herm), _normalize(anti)])
            labels.extend([f"{name}{q}c", f"{name}{q}s"])
            ranks.extend([rank, rank])

    stack = np.array(matrices)
    stack.setflags(write=False)
    return MultipoleBasis(matrices=stack, labels=tuple(labels), ranks=tuple(ranks))


# ---- State -----------------------------------------------------------------------

@dataclass(frozen=True)
class MultipoleState:
    coeffs: np.ndarray  # 16 real coefficients

    @classmethod
    def thermal(cls) -> "MultipoleState":
        coeffs = np.zeros(16)
        coeffs[0] = 0.25
        return cls(coeffs=coeffs)

    @classmethod
    def from_populations(cls, populations: np.ndarray) -> "MultipoleState":
        return decompose(np.diag(np.asarray(populations, dtype=complex)))

    @classmethod
    def from_diagonal(cls, p0: float = 0.0, d0: float = 0.0, f0: float = 0.0) -> "MultipoleState":
        coeffs = np.zeros(16)
        coeffs[0] = 0.25
        coeffs[[P0_INDEX, D0_INDEX, F0_INDEX]] = (p0, d0, f0)
        return cls(coeffs=coeffs)

    @property
    def unit(self) -> float:
        return float(self.coeffs[0])

    @property
    def p0(self) -> float:
        return float(self.coeffs[P0_INDEX])

    @property
    def d0(self) -> float:
        return float(self.coeffs[D0_INDEX])

    @property
    def f0(self) -> float:
        return float(self.coeffs[F0_INDEX])

    def to_matrix(self) -> np.ndarray:
        return reconstruct(self)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.to_matrix()))


def decompose(rho: np.ndarray) -> MultipoleState:
    """Expansion coefficients of ρ via trace inner products."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise MultipoleError(f"expected a 4x4 density matrix, got {rho.shape}")
    trace = np.trace(rho).real
    if abs(trace - 1.0) > TRACE_TOL:
        raise MultipoleError(f"density matrix trace {trace:.10f} deviates from 1")
    if np.max(np.abs(rho - rho.conj().T)) > TRACE_TOL:
        raise MultipoleError("density matrix is not Hermitian")

    basis = build_multipole_basis().matrices
    coeffs = np.einsum("kij,ji->k", basis, rho).real
    coeffs[0] = trace / 4.0
    return MultipoleState(coeffs=coeffs)


def reconstruct(state: MultipoleState) -> np.ndarray:
    basis = build_multipole_basis().matrices
    return np.einsum("k,kij->ij", state.coeffs, basis)


# ---- Relaxation --------------------------------------------------------------

class RelaxationModel(BaseModel):
    """Population kinetics between the four levels.

    ``delta_m_one``: Δm=±1 flips with rate_a = (1/2)/T_d on ±3/2<->±1/2 and
    rate_b = (2/3)/T_d on +1/2<->-1/2. ``custom``: the same topology with free
    rates. ``multipole_times``: R = Σ v vᵀ/T over the diagonal multipoles.
    """
    model_config = ConfigDict(extra="ignore", frozen=True)

    mode: Literal["delta_m_one", "custom", "multipole_times"] = "delta_m_one"
    rate_a: float = 0.0
    rate_b: float = 0.0
    t_p: Optional[float] = Field(default=None, gt=0)
    t_d: Optional[float] = Field(default=None, gt=0)
    t_f: Optional[float] = Field(default=None, gt=0)

    @classmethod
    def delta_m_one(cls, t_d: float) -> "RelaxationModel":
        return cls(mode="delta_m_one", rate_a=0.5 / t_d, rate_b=(2.0 / 3.0) / t_d, t_d=t_d)

    @classmethod
    def custom(cls, rate_a: float, rate_b: float) -> "RelaxationModel":
        return cls(mode="custom", rate_a=rate_a, rate_b=rate_b)

    @classmethod
    def from_times(cls, t_p: float, t_d: float, t_f: float) -> "RelaxationModel":
        return cls(mode="multipole_times", t_p=t_p, t_d=t_d, t_f=t_f)

    @classmethod
    def from_params(cls, params: CenterParams) -> "RelaxationModel":
        """Δm=±1 kinetics when the center's times obey 3:1:1/2, else spherical."""
        if np.isclose(params.t_p, 3 * params.t_d) and np.isclose(params.t_f, params.t_d / 2):
            return cls.delta_m_one(params.t_d)
        return cls.from_times(params.t_p, params.t_d, params.t_f)

    def multipole_times(self) -> Tuple[float, float, float]:
        """(T_p, T_d, T_f) implied by this model."""
        if self.mode == "multipole_times":
            return self.t_p, self.t_d, self.t_f
        rates = np.linalg.eigvalsh(build_rate_matrix(self))
        rates = np.sort(rates)[1:]
        if np.any(rates <= 0):
            raise MultipoleError("rate matrix has extra zero modes; times are undefined")
        # eigenvalue order 1/T_p < 1/T_d < 1/T_f holds for delta_m_one
        t_p, t_d, t_f = 1.0 / rates
        return float(t_p), float(t_d), float(t_f)


def build_rate_matrix(model: RelaxationModel) -> np.ndarray:
    """Generator R of dn/dt = -R·n; columns sum to zero."""
    if model.mode == "multipole_times":
        if None in (model.t_p, model.t_d, model.t_f):
            raise MultipoleError("multipole_times mode needs t_p, t_d and t_f")
        return (
            np.outer(P0_DIAG, P0_DIAG) / model.t_p
            + np.outer(D0_DIAG, D0_DIAG) / model.t_d
            + np.outer(F0_DIAG, F0_DIAG) / model.t_f
        )

    if model.rate_a < 0 or model.rate_b < 0:
        raise MultipoleError(f"negative relaxation rate (a={model.rate_a}, b={model.rate_b})")
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = model.rate_a
    w[2, 3] = w[3, 2] = model.rate_a
    w[1, 2] = w[2, 1] = model.rate_b
    return np.diag(w.sum(axis=0)) - w


def slowest_rate(model: RelaxationModel) -> float:
    """Smallest nonzero eigenvalue of R (1/µs)."""
    rates = np.sort(np.linalg.eigvalsh(build_rate_matrix(model)))
    nonzero = rates[rates > 1e-12]
    return float(nonzero[0]) if nonzero.size else 0.0


def relax_populations(populations: np.ndarray, model: RelaxationModel, t: float) -> np.ndarray:
    """exp(-R·t) applied to a population vector; t in µs."""
    return scipy.linalg.expm(-build_rate_matrix(model) * t) @ populations


def relax_diagonal(state: MultipoleState, t: float, params: CenterParams,
                   coherence_decay: Literal["t2_star", "per_rank"] = "t2_star") -> MultipoleState:
    """Decay each multipole for a time t (µs).

    p0, d0 and f0 decay with T_p, T_d, T_f. Off-diagonal members decay with
    T2* or, for ``per_rank``, with their rank's population time.
    """
    if t < 0:
        raise MultipoleError(f"relaxation time must be non-negative, got {t}")
    basis = build_multipole_basis()
    rank_times = {1: params.t_p, 2: params.t_d, 3: params.t_f}
    t2_us = params.t2_star * 1e-3

    factors = np.ones(16)
    for k, (label, rank) in enumerate(zip(basis.labels, basis.ranks)):
        if rank == 0:
            continue
        if label.endswith("0") or coherence_decay == "per_rank":
            factors[k] = np.exp(-t / rank_times[rank])
        else:
            factors[k] = np.exp(-t / t2_us)
    return MultipoleState(coeffs=state.coeffs * factors)


def suppressed_mode_factor(t_p: float, t_d: float, t_f: float) -> float:
    """5·T_d - T_p - 4·T_f; zero under Δm=±1 kinetics."""
    return 5.0 * t_d - t_p - 4.0 * t_f
