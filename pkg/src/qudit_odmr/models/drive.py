from __future__ import annotations

from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


# ---- Continuous-wave tones ---------------------------------------------------

class DriveTone(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	freq: float = Field(description="Tone frequency (MHz)")
	power_dbm: float = 0.0
	rabi_scale: float = Field(default=0.005, ge=0, description="MHz per unit field amplitude")

	@property
	def amplitude(self) -> float:
		"""Drive amplitude Ω (MHz) for this power."""
		return self.rabi_scale * 10.0 ** (self.power_dbm / 20.0)

	def at(self, freq: float) -> "DriveTone":
		return self.model_copy(update={"freq": freq})


class OpticalPump(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	rate: float = Field(default=0.0, ge=0, description="Extra repolarization rate (1/µs)")
	target_d0: float = Field(default=0.2, ge=-0.5, le=0.5)
	contrast_scale: float = Field(default=0.02, description="ΔPL/PL per unit change of d0")


# ---- Pulse sequences ---------------------------------------------------------

class Pulse(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	kind: Literal["pulse"] = "pulse"
	freq: float = Field(description="Carrier frequency (MHz)")
	rabi: float = Field(ge=0, description="Drive amplitude Ω (MHz)")
	duration: float = Field(ge=0, description="ns")
	phase: float = 0.0


class Delay(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	kind: Literal["delay"] = "delay"
	duration: float = Field(ge=0, description="ns")


class Readout(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	kind: Literal["readout"] = "readout"
	# None reads the quadrupole contrast; a transition label ("nu1") reads that pair
	pair: Optional[str] = None


SequenceElement = Annotated[Union[Pulse, Delay, Readout], Field(discriminator="kind")]


class PulseSequence(BaseModel):
	model_config = ConfigDict(extra="ignore", frozen=True)

	elements: List[SequenceElement]

	@model_validator(mode="after")
	def _single_trailing_readout(self) -> "PulseSequence":
		readouts = [i for i, el in enumerate(self.elements) if isinstance(el, Readout)]
		if len(readouts) != 1 or readouts[0] != len(self.elements) - 1:
			raise ValueError("sequence needs exactly one Readout and it must be last")
		return self

	@classmethod
	def of(cls, *elements: Union[Pulse, Delay], readout: Optional[Readout] = None) -> "PulseSequence":
		return cls(elements=[*elements, readout or Readout()])

	@property
	def readout(self) -> Readout:
		return self.elements[-1]

	@property
	def total_duration(self) -> float:
		return sum(el.duration for el in self.elements if not isinstance(el, Readout))
