"""
Inhomogeneous broadening as a weighted set of homogeneous spin packets.
"""

from __future__ import annotations

import logging
from typing import Iterable, List, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss

from qudit_odmr.errors import QuditOdmrError
from qudit_odmr.models.ensemble import InhomogeneousDistribution, SpinPacket
from qudit_odmr.models.results import Spectrum

log = logging.getLogger(__name__)

DEFAULT_GAMMA_HOM = 125.0  # kHz


class EnsembleError(QuditOdmrError):
    pass


# ---- Sampling helpers --------------------------------------------------------

def _gaussian_nodes(n: int, sigma: float, scheme: str, width_sigmas: float,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights for a zero-mean Gaussian of standard deviation sigma."""
    if sigma == 0.0 or n == 1:
        return np.zeros(1), np.ones(1)
    if scheme == "gauss_hermite":
        x, w = hermgauss(n)
        return np.sqrt(2.0) * sigma * x, w / w.sum()
    if scheme == "uniform_grid":
        x = np.linspace(-width_sigmas, width_sigmas, n)
        w = np.exp(-0.5 * x**2)
        return sigma * x, w / w.sum()
    offsets = np.sort(rng.normal(0.0, sigma, size=n))
    return offsets, np.full(n, 1.0 / n)


def enumerate_packets(dist: InhomogeneousDistribution,
                      gamma_hom: float = DEFAULT_GAMMA_HOM) -> List[SpinPacket]:
    """Deterministic, order-stable packet list with weights summing to one."""
    if dist.n_packets < 1:
        raise EnsembleError("distribution needs at least one packet")
    if gamma_hom <= 0:
        raise EnsembleError(f"homogeneous width must be positive, got {gamma_hom}")

    rng = np.random.default_rng(dist.seed)
    d_mean = dist.d_mean / 2.0

    if dist.mechanism == "zfs_spread":
        d_off, weights = _gaussian_nodes(dist.n_packets, dist.d_sigma, dist.scheme,
                                         dist.width_sigmas, rng)
        d_values = d_mean + d_off
        b_values = np.full_like(d_values, dist.b_mean)
    elif dist.mechanism == "field_spread":
        b_off, weights = _gaussian_nodes(dist.n_packets, dist.b_sigma, dist.scheme,
                                         dist.width_sigmas, rng)
        b_values = dist.b_mean + b_off
        d_values = np.full_like(b_values, d_mean)
    elif dist.scheme == "monte_carlo":
        d_values = d_mean + rng.normal(0.0, dist.d_sigma, size=dist.n_packets)
        b_values = dist.b_mean + rng.normal(0.0, dist.b_sigma, size=dist.n_packets)
        weights = np.full(dist.n_packets, 1.0 / dist.n_packets)
    else:
        # both mechanisms on a product grid, n_packets nodes per axis
        d_off, wd = _gaussian_nodes(dist.n_packets, dist.d_sigma, dist.scheme, dist.width_sigmas, rng)
        b_off, wb = _gaussian_nodes(dist.n_packets, dist.b_sigma, dist.scheme, dist.width_sigmas, rng)
        d_values = np.repeat(d_mean + d_off, b_off.size)
        b_values = np.tile(dist.b_mean + b_off, d_off.size)
        weights = np.outer(wd, wb).ravel()

    keep = weights > 0
    weights = weights[keep] / weights[keep].sum()
    packets = [
        SpinPacket(d_value=float(d), b_offset=float(b), gamma_hom=gamma_hom, weight=float(w))
        for d, b, w in zip(d_values[keep], b_values[keep], weights)
    ]
    log.debug(f"Enumerated {len(packets)} packets ({dist.mechanism}, {dist.scheme})")
    return packets


def packet_moments(packets: Sequence[SpinPacket]) -> tuple[float, float]:
    """Weighted mean and variance of the packets' D values."""
    d = np.array([p.d_value for p in packets])
    w = np.array([p.weight for p in packets])
    mean = float(np.sum(w * d))
    return mean, float(np.sum(w * (d - mean) ** 2))


# ---- Line shapes -------------------------------------------------------------

def lorentzian(freqs: np.ndarray, center: float, half_width: float) -> np.ndarray:
    """Unit-area Lorentzian of half-width ``half_width``."""
    return (half_width / np.pi) / ((freqs - center) ** 2 + half_width**2)


def inhomogeneous_line(packets: Sequence[SpinPacket],
                       transition_freqs: Iterable[Sequence[float]],
                       freqs: np.ndarray,
                       strengths: Iterable[Sequence[float]] | None = None) -> Spectrum:
    """Weighted sum of per-packet Lorentzians on a common grid.

    ``transition_freqs[k]`` lists packet k's resonances; ``strengths[k]``
    optionally scales each one.
    """
    freqs = np.asarray(freqs, dtype=float)
    transition_freqs = list(transition_freqs)
    if len(transition_freqs) != len(packets):
        raise EnsembleError("need one resonance list per packet")
    strengths = list(strengths) if strengths is not None else [None] * len(packets)

    rows = np.zeros((len(packets), freqs.size))
    for k, (packet, centers, amps) in enumerate(zip(packets, transition_freqs, strengths)):
        amps = np.ones(len(centers)) if amps is None else np.asarray(amps, dtype=float)
        for center, amp in zip(centers, amps):
            rows[k] += amp * lorentzian(freqs, center, packet.gamma_hom_mhz)
        rows[k] *= packet.weight

    # fixed reduction order
    values = np.sum(rows, axis=0)
    return Spectrum(freqs=freqs, values=values, meta={"n_packets": len(packets)})
