from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from qudit_odmr.logger import log_performance_metric
from qudit_odmr.models.center import CenterParams, FieldConfig
from qudit_odmr.models.ensemble import SpinPacket
from qudit_odmr.physics.multipole import RelaxationModel
from qudit_odmr.physics.spin_core import LevelSet, build_hamiltonian, exact_levels
from qudit_odmr.utils.parallel import ordered_map

log = logging.getLogger(__name__)


class PacketEngine(ABC):
    """Shared plumbing for engines that sweep independent spin packets."""

    def __init__(self, params: CenterParams, relax: Optional[RelaxationModel] = None,
                 workers: int = 1):
        self.params = params
        self.relax = relax or RelaxationModel.from_params(params)
        self.workers = max(1, int(workers))

    def packet_levels(self, packet: SpinPacket, field: FieldConfig) -> LevelSet:
        h = build_hamiltonian(self.params, field.shifted(packet.b_offset), d_override=packet.d_value)
        return exact_levels(h)

    def sweep(self, packets: Sequence[SpinPacket], fn: Callable[[SpinPacket], Any],
              operation: str) -> List[Any]:
        """Run ``fn`` per packet; results come back in packet order."""
        start = time.perf_counter()
        results = ordered_map(fn, packets, self.workers)
        log_performance_metric(operation, time.perf_counter() - start, len(packets))
        return results

    @staticmethod
    def weighted_sum(packets: Sequence[SpinPacket], rows: Sequence[np.ndarray]) -> np.ndarray:
        """Σ w_k·row_k in packet order."""
        weights = np.array([p.weight for p in packets])
        return np.tensordot(weights, np.asarray(rows), axes=1)

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        """Engine settings for run metadata."""
