"""Ensemble result containers shared by the simulation and statistics layers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = ["PathStatus", "EnsembleSummary"]


class PathStatus(IntEnum):
    """Terminal disposition of one simulated path."""

    COMPLETED = 0
    EXPLODED = 1
    HIT_ZERO = 2


@dataclass(frozen=True)
class EnsembleSummary:
    """Grid-aligned results of an independent-path Monte Carlo run.

    ``states`` holds X(t) at each grid time per path; rows after an
    explosion are NaN, rows after a zero hit carry the last state forward.
    ``terminal_states`` is the last positive recorded state of each path
    (the pre-overflow state for exploded paths), ``terminal_times`` its
    timestamp.  ``sup_martingale`` is present only when the run accumulated
    the exponential-martingale statistic, holding sup_{t<=T} S(t) per path.
    """

    time_grid: np.ndarray          # (g,)
    states: np.ndarray             # (g, n_paths, n)
    statuses: np.ndarray           # (n_paths,) PathStatus values
    status_times: np.ndarray       # (n_paths,) NaN for completed paths
    status_components: np.ndarray  # (n_paths,) species index, -1 unless zero hit
    terminal_states: np.ndarray    # (n_paths, n)
    terminal_times: np.ndarray     # (n_paths,)
    jump_counts: np.ndarray        # (n_paths,)
    horizon: float
    seed: int
    sup_martingale: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return int(self.statuses.size)

    @property
    def n_species(self) -> int:
        return int(self.terminal_states.shape[1])

    @property
    def terminal_norms(self) -> np.ndarray:
        """Euclidean norm of the last recorded state, per path."""
        return np.linalg.norm(self.terminal_states, axis=1)

    def status_counts(self) -> dict[PathStatus, int]:
        return {
            status: int(np.count_nonzero(self.statuses == status))
            for status in PathStatus
        }
