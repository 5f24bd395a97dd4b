from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from qudit_odmr.errors import ResultError


def _check_axis(name: str, axis: np.ndarray, values: np.ndarray) -> None:
	if axis.ndim != 1 or axis.size == 0:
		raise ResultError(f"{name} must be a non-empty 1-D grid")
	if axis.size > 1 and not np.all(np.diff(axis) > 0):
		raise ResultError(f"{name} must be strictly increasing")
	if not np.all(np.isfinite(values)):
		raise ResultError("values must be finite")


# ---- Observables ---------------------------------------------------------------

@dataclass
class Spectrum:
	"""Frequency-indexed ΔPL/PL contrast."""
	freqs: np.ndarray
	values: np.ndarray
	meta: Dict[str, Any] = field(default_factory=dict)

	def __post_init__(self):
		self.freqs = np.asarray(self.freqs, dtype=float)
		self.values = np.asarray(self.values, dtype=float)
		if self.values.shape != self.freqs.shape:
			raise ResultError("freqs and values must have the same shape")
		_check_axis("freqs", self.freqs, self.values)

	@property
	def step(self) -> float:
		return float(self.freqs[1] - self.freqs[0]) if self.freqs.size > 1 else 0.0


@dataclass
class TimeTrace:
	"""Time-indexed signal; times in ns."""
	times: np.ndarray
	values: np.ndarray
	meta: Dict[str, Any] = field(default_factory=dict)

	def __post_init__(self):
		self.times = np.asarray(self.times, dtype=float)
		self.values = np.asarray(self.values, dtype=float)
		if self.values.shape != self.times.shape:
			raise ResultError("times and values must have the same shape")
		_check_axis("times", self.times, self.values)

	@property
	def is_uniform(self) -> bool:
		if self.times.size < 3:
			return True
		steps = np.diff(self.times)
		return bool(np.allclose(steps, steps[0], rtol=1e-6, atol=0.0))


@dataclass
class FieldMap:
	"""Per-field lock-in spectra, each column normalized to its own maximum."""
	bz: np.ndarray
	freqs: np.ndarray
	values: np.ndarray  # shape (len(bz), len(freqs))
	meta: Dict[str, Any] = field(default_factory=dict)

	def __post_init__(self):
		self.bz = np.asarray(self.bz, dtype=float)
		self.freqs = np.asarray(self.freqs, dtype=float)
		self.values = np.asarray(self.values, dtype=float)
		if self.values.shape != (self.bz.size, self.freqs.size):
			raise ResultError("values must have shape (len(bz), len(freqs))")
		_check_axis("bz", self.bz, self.values)
		_check_axis("freqs", self.freqs, self.values)


# ---- Fit results -------------------------------------------------------------

class FringeFit(BaseModel):
	model_config = ConfigDict(extra="ignore")

	f_r: float = Field(ge=0, description="Fringe frequency (MHz)")
	f_r_err: float = Field(ge=0)
	t2_star: float = Field(description="Decay time (ns)")
	t2_err: float = Field(ge=0)
	amplitude: float = 0.0
	offset: float = 0.0
	phase: float = 0.0
	kind: Literal["fringes", "fid"] = "fringes"


class FftPeak(BaseModel):
	model_config = ConfigDict(extra="ignore")

	f_r: float = Field(ge=0)
	width: float = Field(ge=0, description="Lorentzian half-width (MHz)")
	f_r_err: float = Field(ge=0)
	kind: Literal["fringes", "fid"] = "fringes"
	multimodal: bool = False
	broadened: bool = False


class FieldEstimate(BaseModel):
	model_config = ConfigDict(extra="ignore")

	b_eff: float = Field(ge=0, description="µT")
	b_err: float = Field(ge=0)
	theta: float = Field(description="deg")


class LineInversion(BaseModel):
	model_config = ConfigDict(extra="ignore")

	bz: float
	bperp: float
	d: float = Field(description="Half the zero-field splitting (MHz)")
	residual: float
	starts: int = 0

	@property
	def theta_deg(self) -> float:
		return float(np.degrees(np.arctan2(self.bperp, self.bz)))


class ConsistencyReport(BaseModel):
	model_config = ConfigDict(extra="ignore")

	estimates: List[FieldEstimate]
	groups: List[List[int]]
	mean: float
	spread: float
	consistent: bool
	pairs: List[Tuple[int, int, bool]] = Field(default_factory=list)
	labels: Optional[List[str]] = None
