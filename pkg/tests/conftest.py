import numpy as np
import pytest

from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.ensemble import InhomogeneousDistribution
from qudit_odmr.models.results import TimeTrace
from qudit_odmr.physics.spin_core import build_hamiltonian, exact_levels


@pytest.fixture
def params():
    return CenterParams()


@pytest.fixture
def table_field():
    """|B| = 223 µT at 19° from the c-axis."""
    return FieldConfig(bz=210.9, bperp=72.6)


@pytest.fixture
def moderate_field():
    return FieldConfig(bz=100.0, bperp=30.0)


@pytest.fixture
def single_packet():
    return InhomogeneousDistribution(d_mean=26.8, d_sigma=0.0, n_packets=1)


@pytest.fixture
def levels_at():
    def _levels(params, field, d=None):
        return exact_levels(build_hamiltonian(params, field, d_override=d))
    return _levels


@pytest.fixture
def decaying_trace():
    """Sampled A·cos(2πft + φ)·exp(-t/T) + C with times in ns."""
    def _trace(freq, t2_ns, stop=1500.0, step=10.0, amplitude=1.0, phase=0.3, offset=0.1):
        times = np.arange(0.0, stop + step / 2, step)
        t = times * 1e-3
        values = amplitude * np.cos(2 * np.pi * freq * t + phase) * np.exp(-t / (t2_ns * 1e-3)) + offset
        return TimeTrace(times=times, values=values)
    return _trace
