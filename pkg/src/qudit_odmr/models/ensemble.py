from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


# ---- Inhomogeneous distribution ----------------------------------------------

class InhomogeneousDistribution(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	mechanism: Literal["zfs_spread", "field_spread", "both"] = "zfs_spread"
	d_mean: float = Field(default=26.8, gt=0, description="Mean zero-field splitting 2D (MHz)")
	d_sigma: float = Field(default=0.25, ge=0, description="Standard deviation of D (MHz)")
	b_mean: float = Field(default=0.0, description="Mean local z-field offset (µT)")
	b_sigma: float = Field(default=0.0, ge=0, description="Spread of the local z-field (µT)")
	n_packets: int = Field(default=81, ge=0)
	scheme: Literal["gauss_hermite", "uniform_grid", "monte_carlo"] = "uniform_grid"
	width_sigmas: float = Field(default=4.0, gt=0, description="Half-span of the uniform grid in sigmas")
	seed: int = 0

	@property
	def exponent_width(self) -> float:
		"""Width δD in f(D) ∝ exp[-(D - D̄)²/δD²]; equals √2·d_sigma."""
		return math.sqrt(2.0) * self.d_sigma


# ---- Homogeneous packet ------------------------------------------------------

class SpinPacket(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	d_value: float = Field(description="This packet's D (MHz)")
	b_offset: float = Field(default=0.0, description="Local z-field offset (µT)")
	gamma_hom: float = Field(default=125.0, gt=0, description="Homogeneous half-width (kHz)")
	weight: float = Field(default=1.0, gt=0, le=1.0)

	@property
	def gamma_hom_mhz(self) -> float:
		return self.gamma_hom * 1e-3
