"""Vandermonde time matrices and observation-window partitioning.

Node times are normalized before forming powers: a node at (one-based,
window-local) sample position ``n`` maps to ``u = n / scale`` with ``scale``
defaulting to the window length. Raw times ``n*Ts`` with ``Ts`` of tens of
microseconds make the normal equations singular in double precision, while the
column space (and therefore every projector, channel estimate and SNR) is
unchanged by the rescaling. Polynomial coefficients are reported in this
normalized basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from .errors import IllConditioned, InvalidPartition, RankDeficient

# Gram systems with a larger condition number are treated as singular.
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class TimeMatrix:
    """Rows ``[1, u_n, ..., u_n**(L-1)]`` for each node, with a cached Gram factor."""

    matrix: np.ndarray = field(repr=False)
    nodes: tuple
    scale: float
    _chol: tuple = field(repr=False, default=None)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def order(self) -> int:
        return self.matrix.shape[1]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def fit(self, values: np.ndarray) -> np.ndarray:
        """Least-squares coefficients ``(T^T T)^{-1} T^T values`` along the last axis."""
        values = np.asarray(values)
        rhs = values @ self.matrix
        return linalg.cho_solve(self._chol, rhs.T).T

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        """``T @ c`` for each coefficient vector along the last axis."""
        return np.asarray(coeffs) @ self.matrix.T


def time_matrix(n_rows: int, L: int, node_times=None, scale: float | None = None) -> TimeMatrix:
    """Vandermonde matrix on ``node_times`` (default ``1..n_rows``)."""
    if node_times is None:
        node_times = np.arange(1, n_rows + 1)
    nodes = tuple(float(t) for t in node_times)
    if len(nodes) != n_rows:
        raise RankDeficient(f"{len(nodes)} node times for {n_rows} rows")
    if scale is None:
        scale = float(n_rows)
    return _cached_time_matrix(nodes, int(L), float(scale))


@lru_cache(maxsize=256)
def _cached_time_matrix(nodes: tuple, L: int, scale: float) -> TimeMatrix:
    n_rows = len(nodes)
    if L < 1:
        raise RankDeficient(f"polynomial order must be >= 1, got {L}")
    if n_rows < L:
        raise RankDeficient(f"{n_rows} nodes cannot support order {L}")
    if len(set(nodes)) != n_rows:
        raise RankDeficient("node times must be distinct")
    if scale <= 0:
        raise ValueError("scale must be positive")
    u = np.asarray(nodes) / scale
    T = np.vander(u, L, increasing=True)
    T.setflags(write=False)
    gram = T.T @ T
    if np.linalg.cond(gram) > MAX_CONDITION:
        raise IllConditioned(f"time-matrix Gram condition {np.linalg.cond(gram):.3g}")
    chol = linalg.cho_factor(gram)
    return TimeMatrix(T, nodes, scale, chol)


@dataclass(frozen=True)
class WindowPartition:
    N: int
    window: int

    @property
    def K(self) -> int:
        return self.N // self.window

    def ranges(self) -> list[range]:
        return [range(k * self.window, (k + 1) * self.window) for k in range(self.K)]

    def split(self, x: np.ndarray) -> np.ndarray:
        """Reshape ``(..., N)`` into ``(..., K, window)``."""
        x = np.asarray(x)
        return x.reshape(x.shape[:-1] + (self.K, self.window))


def partition(N: int, window: int) -> WindowPartition:
    if window < 1 or N < 1 or N % window:
        raise InvalidPartition(f"window {window} does not divide N={N}")
    return WindowPartition(N, window)
