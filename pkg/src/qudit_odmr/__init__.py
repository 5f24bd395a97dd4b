"""Spin-3/2 color-center ODMR simulator: CW hole burning, pulsed control and field readout."""

__version__ = "0.1.0"
