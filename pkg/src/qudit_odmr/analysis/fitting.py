"""
Fringe, spectrum and line-shape fitting.

Times arrive in ns and are fitted in µs so that frequencies come out in MHz.
"""

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import curve_fit, least_squares
from scipy.signal import find_peaks
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from qudit_odmr.errors import QuditOdmrError
from qudit_odmr.models.results import FftPeak, FringeFit, Spectrum, TimeTrace

log = logging.getLogger(__name__)

MIN_POINTS = 10
ZERO_PAD = 8
BROADENING_TOLERANCE = 1.2


class FitError(QuditOdmrError):
    pass


# ---- Models ------------------------------------------------------------------

def decaying_sinusoid(t, amplitude, freq, phase, decay, offset):
    return amplitude * np.cos(2 * np.pi * freq * t + phase) * np.exp(-t / decay) + offset


def lorentzian_peak(f, amplitude, center, half_width, offset):
    return amplitude * half_width**2 / ((f - center) ** 2 + half_width**2) + offset


def _covariance(jac: np.ndarray, residual: np.ndarray) -> np.ndarray:
    dof = max(1, residual.size - jac.shape[1])
    s2 = float(residual @ residual) / dof
    return np.linalg.pinv(jac.T @ jac) * s2


# ---- Decaying sinusoid -------------------------------------------------------

def _fft_guess(t: np.ndarray, y: np.ndarray) -> float:
    n = y.size * ZERO_PAD
    power = np.abs(np.fft.rfft(y - y.mean(), n=n)) ** 2
    freqs = np.fft.rfftfreq(n, d=float(np.mean(np.diff(t))))
    return float(freqs[1 + np.argmax(power[1:])])


def fit_decaying_sinusoid(trace: TimeTrace) -> FringeFit:
    """Fit A·cos(2πfτ + φ)·exp(-τ/T) + C and classify fringes against a plain decay.

    The result is tagged ``fid`` when the trace is flat, the oscillation
    amplitude is below twice its uncertainty, or f is below the record's
    frequency resolution.
    """
    t = trace.times * 1e-3
    y = trace.values
    if t.size < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points, got {t.size}")

    span = float(t[-1] - t[0])
    scale = float(np.ptp(y))
    if scale <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        log.info("Trace is flat; classifying as free decay")
        return FringeFit(f_r=0.0, f_r_err=0.0, t2_star=0.0, t2_err=0.0,
                         amplitude=0.0, offset=float(y.mean()), kind="fid")

    dt = float(np.min(np.diff(t)))
    nyquist = 0.5 / dt
    f0 = _fft_guess(t, y) if trace.is_uniform else 1.0 / span
    start = np.array([scale / 2.0, f0, 0.0, span / 3.0, float(y.mean())])
    lower = [0.0, 0.0, -2 * np.pi, dt / 10.0, -np.inf]
    upper = [np.inf, nyquist, 2 * np.pi, 100.0 * span, np.inf]

    def residual(p):
        return decaying_sinusoid(t - t[0], *p) - y

    attempt_no = 0

    def attempt():
        nonlocal attempt_no
        p0 = start.copy()
        if attempt_no:
            log.warning(f"Retrying decaying-sinusoid fit from a perturbed start (attempt {attempt_no + 1})")
            p0[1] *= 1.0 + 0.05 * attempt_no
            p0[2] = np.pi * attempt_no / 2.0
            p0[3] *= 1.5**attempt_no
        attempt_no += 1
        p0 = np.clip(p0, np.array(lower) + 1e-12, np.array(upper) - 1e-12)
        result = least_squares(residual, p0, bounds=(lower, upper), method="trf",
                               xtol=1e-10, max_nfev=500)
        if not result.success or not np.all(np.isfinite(result.x)):
            raise FitError(f"decaying-sinusoid fit did not converge: {result.message}")
        return result

    for retrying in Retrying(stop=stop_after_attempt(3), retry=retry_if_exception_type(FitError),
                             reraise=True):
        with retrying:
            result = attempt()

    amp, freq, phase, decay, offset = result.x
    errors = np.sqrt(np.abs(np.diag(_covariance(result.jac, result.fun))))
    amp_err, f_err, _, decay_err, _ = errors

    kind = "fringes"
    if amp < 2.0 * amp_err or freq < 1.0 / span:
        kind = "fid"
    log.debug(f"Fringe fit: f={freq:.4f}±{f_err:.4f} MHz, T={decay * 1e3:.1f} ns, kind={kind}")
    return FringeFit(
        f_r=float(freq), f_r_err=float(f_err),
        t2_star=float(decay * 1e3), t2_err=float(decay_err * 1e3),
        amplitude=float(amp), offset=float(offset), phase=float(phase), kind=kind,
    )


# ---- Lorentzian fits -----------------------------------------------------------

def fit_lorentzian(freqs: np.ndarray, values: np.ndarray, center: float,
                   half_width: float) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares Lorentzian peak; returns (amplitude, center, half_width, offset) and errors."""
    freqs = np.asarray(freqs, dtype=float)
    values = np.asarray(values, dtype=float)
    if freqs.size < 4:
        raise FitError("too few points for a Lorentzian fit")
    edge = float(np.median(np.concatenate([values[:2], values[-2:]])))
    k = int(np.argmin(np.abs(freqs - center)))
    p0 = [values[k] - edge, center, half_width, edge]
    lower = [-np.inf, freqs[0], 1e-6, -np.inf]
    upper = [np.inf, freqs[-1], float(np.ptp(freqs)), np.inf]
    p0[2] = float(np.clip(p0[2], lower[2] * 10, upper[2] / 2))
    try:
        popt, pcov = curve_fit(lorentzian_peak, freqs, values, p0=p0, bounds=(lower, upper),
                               maxfev=5000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"Lorentzian fit failed: {exc}") from exc
    return popt, np.sqrt(np.abs(np.diag(pcov)))


def fft_lorentzian(trace: TimeTrace, expected_t2: Optional[float] = None) -> FftPeak:
    """Lorentzian fit to the zero-padded power spectrum of a uniform trace.

    The half-width of |FFT|² for a decay time T is 1/(2πT). ``expected_t2``
    (ns) flags peaks broader than the decay alone explains.
    """
    if not trace.is_uniform:
        raise FitError("FFT analysis needs uniformly sampled delays")
    if trace.times.size < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points, got {trace.times.size}")

    t = trace.times * 1e-3
    dt = float(t[1] - t[0])
    span = float(t[-1] - t[0])
    y = trace.values - trace.values.mean()
    if np.ptp(trace.values) <= 1e-12 * max(1.0, float(np.max(np.abs(trace.values)))):
        return FftPeak(f_r=0.0, width=0.0, f_r_err=0.0, kind="fid")

    n = trace.times.size * ZERO_PAD
    power = np.abs(np.fft.rfft(y, n=n)) ** 2
    freqs = np.fft.rfftfreq(n, d=dt)

    peaks, props = find_peaks(power, height=0.0)
    resolution = 1.0 / span
    if peaks.size == 0:
        return FftPeak(f_r=0.0, width=0.0, f_r_err=0.0, kind="fid")
    main = int(peaks[np.argmax(props["peak_heights"])])
    if freqs[main] < resolution or power[main] < power[:main].max(initial=0.0):
        # dominant weight at zero frequency
        return FftPeak(f_r=0.0, width=0.0, f_r_err=0.0, kind="fid")

    half = power[main] / 2.0
    left, right = main, main
    while left > 0 and power[left] > half:
        left -= 1
    while right < power.size - 1 and power[right] > half:
        right += 1
    width_guess = max(0.5 * (freqs[right] - freqs[left]), float(freqs[1]))
    window = np.abs(freqs - freqs[main]) <= 4.0 * width_guess
    popt, perr = fit_lorentzian(freqs[window], power[window], float(freqs[main]), width_guess)
    f_r, width = float(popt[1]), float(abs(popt[2]))

    strong = peaks[props["peak_heights"] >= 0.25 * power[main]]
    separated = strong[np.abs(freqs[strong] - f_r) > max(3.0 * width, 2.0 * resolution)]
    broadened = False
    if expected_t2:
        broadened = width > BROADENING_TOLERANCE / (2.0 * np.pi * expected_t2 * 1e-3)

    kind = "fid" if f_r < resolution else "fringes"
    return FftPeak(f_r=max(0.0, f_r), width=width, f_r_err=float(perr[1]), kind=kind,
                   multimodal=bool(separated.size), broadened=bool(broadened))


def hole_width(spectrum: Spectrum, nu_pump: float, window: float = 1.0) -> float:
    """Lorentzian half-width (MHz) of the spectral hole burnt at ``nu_pump``."""
    mask = np.abs(spectrum.freqs - nu_pump) <= window
    if np.count_nonzero(mask) < 4:
        raise FitError(f"no spectrum points within {window} MHz of {nu_pump} MHz")
    popt, _ = fit_lorentzian(spectrum.freqs[mask], spectrum.values[mask], nu_pump, 0.25)
    return float(abs(popt[2]))
