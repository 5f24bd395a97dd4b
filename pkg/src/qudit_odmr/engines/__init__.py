from qudit_odmr.engines.base import PacketEngine
from qudit_odmr.engines.odmr import (
    MODE_OF,
    ModeLine,
    OdmrEngine,
    OdmrSolverError,
    default_grid,
    corner_fraction,
    exact_mode_frequencies,
    mode_frequencies,
    mode_signal,
    mode_signals,
    mode_strengths,
    ridge_positions,
    spectrum_difference,
    target_populations,
)
from qudit_odmr.engines.pulses import (
    PulseEngine,
    PulseError,
    calibrate_rabi,
    packet_selection_profile,
    rabi_from_power,
    selection_fwhm,
)

__all__ = [
    "MODE_OF",
    "ModeLine",
    "OdmrEngine",
    "OdmrSolverError",
    "PacketEngine",
    "PulseEngine",
    "PulseError",
    "calibrate_rabi",
    "default_grid",
    "corner_fraction",
    "exact_mode_frequencies",
    "mode_frequencies",
    "mode_signal",
    "mode_signals",
    "mode_strengths",
    "packet_selection_profile",
    "rabi_from_power",
    "ridge_positions",
    "selection_fwhm",
    "spectrum_difference",
    "target_populations",
]
