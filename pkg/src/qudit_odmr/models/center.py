from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


# ---- Color-center parameters -------------------------------------------------

class CenterParams(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	site: str = "V3"
	two_d: float = Field(default=26.8, gt=0, description="Zero-field splitting 2D (MHz)")
	gamma: float = Field(default=28.0, gt=0, description="Gyromagnetic ratio (MHz/mT)")

	# Multipole population relaxation times (µs); Δm=±1 kinetics give 3:1:1/2
	t_p: float = Field(default=300.0, gt=0)
	t_d: float = Field(default=100.0, gt=0)
	t_f: float = Field(default=50.0, gt=0)

	t2_star: float = Field(default=357.0, gt=0, description="Packet dephasing time (ns)")
	pump_sign: Literal[1, -1] = Field(default=-1, description="+1 pumps ±3/2, -1 pumps ±1/2")

	@property
	def d(self) -> float:
		"""Half the zero-field splitting (MHz)."""
		return self.two_d / 2.0

	@property
	def gamma_per_ut(self) -> float:
		"""Gyromagnetic ratio in MHz/µT."""
		return self.gamma * 1e-3


# ---- Static magnetic field ---------------------------------------------------

class FieldConfig(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	bz: float = Field(default=0.0, description="Component along the c-axis (µT)")
	bperp: float = Field(default=0.0, description="Transverse component (µT)")

	@classmethod
	def from_polar(cls, magnitude: float, theta_deg: float) -> "FieldConfig":
		theta = math.radians(theta_deg)
		return cls(bz=magnitude * math.cos(theta), bperp=magnitude * math.sin(theta))

	@property
	def magnitude(self) -> float:
		return math.hypot(self.bz, self.bperp)

	@property
	def theta(self) -> float:
		"""Angle to the c-axis in radians."""
		return math.atan2(self.bperp, self.bz)

	@property
	def theta_deg(self) -> float:
		return math.degrees(self.theta)

	def shifted(self, dbz: float) -> "FieldConfig":
		"""Same field with a local offset added along z."""
		if dbz == 0.0:
			return self
		return FieldConfig(bz=self.bz + dbz, bperp=self.bperp)
