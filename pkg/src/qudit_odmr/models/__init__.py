__all__ = [
	"CenterParams", "FieldConfig", "InhomogeneousDistribution", "SpinPacket",
	"DriveTone", "OpticalPump", "Pulse", "Delay", "Readout", "PulseSequence",
	"Spectrum", "TimeTrace", "FieldMap", "FringeFit", "FftPeak", "FieldEstimate",
	"LineInversion", "ConsistencyReport", "ExperimentConfig",
]

from .center import CenterParams, FieldConfig
from .ensemble import InhomogeneousDistribution, SpinPacket
from .drive import DriveTone, OpticalPump, Pulse, Delay, Readout, PulseSequence
from .results import (
	Spectrum, TimeTrace, FieldMap, FringeFit, FftPeak, FieldEstimate,
	LineInversion, ConsistencyReport,
)
from .experiment import ExperimentConfig
