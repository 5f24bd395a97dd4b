"""
Spin-3/2 operator algebra and level structure.

Basis order is m_S = +3/2, +1/2, -1/2, -3/2 throughout. Energies and
frequencies are in MHz, fields in µT.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from qudit_odmr.errors import QuditOdmrError
from qudit_odmr.models.center import CenterParams, FieldConfig

log = logging.getLogger(__name__)

SPIN = 1.5
M_VALUES = (1.5, 0.5, -0.5, -1.5)
LABELS = ("+3/2", "+1/2", "-1/2", "-3/2")

# (upper, lower) label indices of each transition
TRANSITIONS: Dict[str, Tuple[int, int]] = {
    "nu1": (3, 2),  # -3/2 <-> -1/2
    "nu2": (0, 1),  # +3/2 <-> +1/2
    "nu3": (3, 1),  # -3/2 <-> +1/2
    "nu4": (0, 2),  # +3/2 <-> -1/2
    "nu5": (1, 2),  # +1/2 <-> -1/2
}
INTER_DOUBLET = ("nu1", "nu2", "nu3", "nu4")

HERMITIAN_TOL = 1e-9
FIRST_ORDER_LIMIT = 0.2


class SpinCoreError(QuditOdmrError):
    pass


# ---- Operators -----------------------------------------------------------------

@dataclass(frozen=True)
class SpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def sp(self) -> np.ndarray:
        return self.sx + 1j * self.sy

    @property
    def sm(self) -> np.ndarray:
        return self.sx - 1j * self.sy

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.sz.shape[0], dtype=complex)


@lru_cache(maxsize=1)
def build_spin_operators() -> SpinOperators:
    """Angular-momentum matrices for S = 3/2 from the ladder coefficients."""
    m = np.array(M_VALUES)
    dim = m.size
    sp = np.zeros((dim, dim), dtype=complex)
    for k in range(dim - 1):
        # <m+1|S+|m> = sqrt(S(S+1) - m(m+1))
        sp[k, k + 1] = np.sqrt(SPIN * (SPIN + 1) - m[k + 1] * (m[k + 1] + 1))
    sm = sp.conj().T

    sx = (sp + sm) / 2
    sy = (sp - sm) / 2j
    sz = np.diag(m).astype(complex)
    for op in (sx, sy, sz):
        op.setflags(write=False)
    return SpinOperators(sx=sx, sy=sy, sz=sz)


# ---- Hamiltonian -------------------------------------------------------------

def build_hamiltonian(params: CenterParams, field: FieldConfig,
                      d_override: Optional[float] = None) -> np.ndarray:
    """H = D(Sz² - 5/4) + γ(Bz·Sz + B⊥·Sx), in MHz.

    ``d_override`` is a packet's own D and replaces ``params.two_d / 2``.
    """
    ops = build_spin_operators()
    d = params.d if d_override is None else d_override
    g = params.gamma_per_ut
    zfs = d * (ops.sz @ ops.sz - 1.25 * ops.identity)
    zeeman = g * (field.bz * ops.sz + field.bperp * ops.sx)
    return zfs + zeeman


# ---- Level sets ----------------------------------------------------------------

@dataclass(frozen=True)
class LevelSet:
    """Four energies in label order (+3/2, +1/2, -1/2, -3/2).

    ``states`` holds the matching eigenvectors as columns (exact mode only).
    """
    energies: np.ndarray
    states: Optional[np.ndarray] = None

    @property
    def exact(self) -> bool:
        return self.states is not None

    def energy(self, label: str) -> float:
        return float(self.energies[LABELS.index(label)])

    def frequency(self, transition: str) -> float:
        upper, lower = TRANSITIONS[transition]
        return float(abs(self.energies[upper] - self.energies[lower]))

    def as_dict(self) -> Dict[str, float]:
        return {label: float(e) for label, e in zip(LABELS, self.energies)}


def _label_by_overlap(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Map each label to an eigen index by dominant basis character.

    Eigenvectors are visited from the highest energy down; at an exact 50/50
    split the lower label index wins.
    """
    overlap = np.abs(vectors) ** 2  # rows: basis label, columns: eigen index
    order = np.zeros(len(values), dtype=int)
    free = list(range(len(values)))
    for eig in np.argsort(values)[::-1]:
        best = max(overlap[lbl, eig] for lbl in free)
        label = min(lbl for lbl in free if overlap[lbl, eig] >= best - 1e-9)
        order[label] = eig
        free.remove(label)
    return order


def exact_levels(h: np.ndarray) -> LevelSet:
    """Diagonalize a Hermitian 4×4 Hamiltonian and label its levels."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (4, 4):
        raise SpinCoreError(f"expected a 4x4 Hamiltonian, got {h.shape}")
    deviation = np.max(np.abs(h - h.conj().T))
    if deviation > HERMITIAN_TOL * max(1.0, np.max(np.abs(h))):
        raise SpinCoreError(f"Hamiltonian is not Hermitian (max deviation {deviation:.3e})")

    values, vectors = scipy.linalg.eigh(h)
    order = _label_by_overlap(values, vectors)
    return LevelSet(energies=values[order], states=vectors[:, order])


def approx_levels(params: CenterParams, field: FieldConfig,
                  d_override: Optional[float] = None) -> LevelSet:
    """First-order levels E±3/2 = D ± 3/2·γBz, E±1/2 = -D ± 1/2·γ√(Bz² + 4B⊥²)."""
    d = params.d if d_override is None else d_override
    g = params.gamma_per_ut
    if g * field.magnitude / d > FIRST_ORDER_LIMIT:
        log.warning(
            f"γ|B|/D = {g * field.magnitude / d:.3f} exceeds {FIRST_ORDER_LIMIT}; "
            "first-order levels are unreliable here"
        )
    outer = 1.5 * g * field.bz
    inner = 0.5 * g * np.hypot(field.bz, 2.0 * field.bperp)
    energies = np.array([d + outer, -d + inner, -d - inner, d - outer])
    return LevelSet(energies=energies)


# ---- Transitions ---------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    name: str
    upper: str
    lower: str
    freq: float
    strength: float


def matrix_elements(states: Optional[np.ndarray]) -> np.ndarray:
    """|<a|Sx|b>| between labelled levels; bare basis when ``states`` is None."""
    sx = build_spin_operators().sx
    if states is None:
        return np.abs(sx)
    return np.abs(states.conj().T @ sx @ states)


def transition_table(levels: LevelSet, states: Optional[np.ndarray] = None) -> List[Transition]:
    """The four inter-doublet transitions nu1..nu4 plus the intra-doublet nu5.

    Strength is |<i|Sx|j>|² normalized to the strongest of the five.
    """
    elements = matrix_elements(states if states is not None else levels.states)
    raw = {name: elements[u, l] ** 2 for name, (u, l) in TRANSITIONS.items()}
    strongest = max(raw.values()) or 1.0
    return [
        Transition(
            name=name,
            upper=LABELS[u],
            lower=LABELS[l],
            freq=levels.frequency(name),
            strength=float(raw[name] / strongest),
        )
        for name, (u, l) in TRANSITIONS.items()
    ]
