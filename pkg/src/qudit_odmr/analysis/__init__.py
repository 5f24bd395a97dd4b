from qudit_odmr.analysis.fitting import (
    FitError,
    decaying_sinusoid,
    fft_lorentzian,
    fit_decaying_sinusoid,
    fit_lorentzian,
    hole_width,
    lorentzian_peak,
)
from qudit_odmr.analysis.magnetometry import (
    InversionError,
    MagnetometryError,
    b_eff_from_fringes,
    cross_packet_consistency,
    invert_field_from_lines,
    line_model,
)

__all__ = [
    "FitError",
    "InversionError",
    "MagnetometryError",
    "b_eff_from_fringes",
    "cross_packet_consistency",
    "decaying_sinusoid",
    "fft_lorentzian",
    "fit_decaying_sinusoid",
    "fit_lorentzian",
    "hole_width",
    "invert_field_from_lines",
    "line_model",
    "lorentzian_peak",
]
