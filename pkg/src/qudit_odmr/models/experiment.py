from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.drive import DriveTone, OpticalPump
from qudit_odmr.models.ensemble import InhomogeneousDistribution


def _arange(start: float, stop: float, step: float) -> np.ndarray:
	"""Inclusive grid with an exact integer point count."""
	n = int(round((stop - start) / step)) + 1
	return start + step * np.arange(n)


# ---- Per-subcommand sections ---------------------------------------------------

class RelaxationSettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	# auto: Δm=±1 kinetics when t_p:t_d:t_f = 3:1:1/2, else multipole times
	mode: Literal["auto", "delta_m_one", "multipole_times", "custom"] = "auto"
	rate_a: float = Field(default=0.0, ge=0)
	rate_b: float = Field(default=0.0, ge=0)


class CwSettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	gamma_hom: float = Field(default=125.0, gt=0, description="kHz")
	rabi_scale: float = Field(default=0.005, ge=0)
	pump_power: float = 14.0
	probe_power: float = 7.0
	nu_pump: Optional[float] = Field(default=None, description="MHz; null puts the pump on the mean nu1 line")
	span: float = Field(default=15.0, gt=0)
	step: float = Field(default=0.01, gt=0)
	pump_powers: List[float] = Field(default_factory=list, description="Optional hole-width power sweep (dBm)")

	def tone(self, freq: float, power: float) -> DriveTone:
		return DriveTone(freq=freq, power_dbm=power, rabi_scale=self.rabi_scale)


class ModeMapSettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	bperp: float = 60.0
	bz_start: float = 0.0
	bz_stop: float = 300.0
	bz_step: float = Field(default=25.0, gt=0)
	d_sigma: float = Field(default=2.0, ge=0, description="Wide D spread so every field finds resonant packets")
	n_packets: int = Field(default=321, ge=1)
	nu_pump: Optional[float] = None
	span: float = Field(default=15.0, gt=0)
	step: float = Field(default=0.01, gt=0)

	@model_validator(mode="after")
	def _ordered(self) -> "ModeMapSettings":
		if self.bz_stop < self.bz_start:
			raise ValueError("bz_stop must not be below bz_start")
		return self

	def bz_values(self) -> np.ndarray:
		return _arange(self.bz_start, self.bz_stop, self.bz_step)


class PulseSettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	pump_transition: str = "nu1"
	pump_t_pi: float = Field(default=1200.0, gt=0, description="ns at pump_power")
	pump_power: float = 11.0
	probe_transition: str = "nu5"
	probe_t_half_pi: float = Field(default=80.0, gt=0, description="ns at probe_power")
	probe_power: float = 33.0
	nu_pump: float = 21.80
	nu_probe: float = 11.70
	tau_stop: float = Field(default=1500.0, gt=0)
	tau_step: float = Field(default=10.0, gt=0)
	rabi_stop: float = Field(default=3000.0, gt=0)
	rabi_step: float = Field(default=10.0, gt=0)
	max_step: Optional[float] = Field(default=None, gt=0, description="ns; null picks the stability limit")
	coherence_decay: Literal["t2_star", "per_rank"] = "t2_star"
	selection: bool = True
	control: bool = True
	n_packets: int = Field(default=21, ge=1)

	def taus(self) -> np.ndarray:
		return _arange(0.0, self.tau_stop, self.tau_step)

	def rabi_durations(self) -> np.ndarray:
		return _arange(0.0, self.rabi_stop, self.rabi_step)


class AnalysisSettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	theta: Optional[float] = Field(default=None, description="deg; null takes the configured field angle")
	theta_err: float = Field(default=0.0, ge=0)
	expected_t2: Optional[float] = Field(default=357.0, gt=0)
	lines: Optional[List[Optional[float]]] = Field(default=None, description="nu1..nu4 (MHz), null for missing")
	d_known: Optional[float] = Field(default=None, gt=0, description="Half-splitting D (MHz)")
	exact: bool = True
	nu_probe: Optional[float] = Field(default=None, gt=0, description="beff probe (MHz); null takes pulses.nu_probe")
	f_r: Optional[float] = Field(default=None, ge=0, description="Measured fringe frequency (MHz)")
	f_r_err: float = Field(default=0.0, ge=0)

	@field_validator("lines")
	@classmethod
	def _four_lines(cls, v):
		if v is not None and len(v) != 4:
			raise ValueError("lines must list nu1..nu4")
		return v


class RelaxCurveSettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	t_stop: float = Field(default=500.0, gt=0, description="µs")
	t_step: float = Field(default=5.0, gt=0)
	p0: float = 0.1
	d0: Optional[float] = Field(default=None, description="null uses the optically pumped d0")
	f0: float = 0.05

	def times(self) -> np.ndarray:
		return _arange(0.0, self.t_stop, self.t_step)


class SelectionSettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	t_pi: float = Field(default=1200.0, gt=0, description="ns")
	span: float = Field(default=2.0, gt=0)
	step: float = Field(default=0.005, gt=0)

	def detunings(self) -> np.ndarray:
		return _arange(-self.span, self.span, self.step)


class ConsistencySettings(BaseModel):
	model_config = ConfigDict(extra="ignore")

	table: str = "ramsey_measurements.yaml"
	theta: float = 19.0
	theta_err: float = 0.0


# ---- Complete run description ------------------------------------------------

class ExperimentConfig(BaseModel):
	"""Everything one run needs; the resolved form is echoed next to the outputs."""
	model_config = ConfigDict(extra="ignore")

	seed: int = 0
	workers: int = Field(default=1, ge=1)
	center: CenterParams = Field(default_factory=CenterParams)
	field: FieldConfig = Field(default_factory=lambda: FieldConfig(bz=210.9, bperp=72.6))
	distribution: InhomogeneousDistribution = Field(default_factory=InhomogeneousDistribution)
	optical: OpticalPump = Field(default_factory=OpticalPump)
	relaxation: RelaxationSettings = Field(default_factory=RelaxationSettings)
	cw: CwSettings = Field(default_factory=CwSettings)
	modemap: ModeMapSettings = Field(default_factory=ModeMapSettings)
	pulses: PulseSettings = Field(default_factory=PulseSettings)
	analysis: AnalysisSettings = Field(default_factory=AnalysisSettings)
	relax: RelaxCurveSettings = Field(default_factory=RelaxCurveSettings)
	selection: SelectionSettings = Field(default_factory=SelectionSettings)
	consistency: ConsistencySettings = Field(default_factory=ConsistencySettings)

	@model_validator(mode="after")
	def _seed_distribution(self) -> "ExperimentConfig":
		# one seed drives every random stream of the run
		if self.distribution.seed != self.seed:
			self.distribution = self.distribution.model_copy(update={"seed": self.seed})
		return self

	def resolved(self) -> Dict[str, Any]:
		return self.model_dump(mode="json")
