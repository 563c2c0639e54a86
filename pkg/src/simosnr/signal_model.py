"""Constellations, symbol draws, pilot layouts and nearest-point detection.

Point ordering is fixed so that posterior tables index the same way on every
run:

* PSK: ``exp(j(phi0 + 2*pi*m/M))`` by increasing angle, with ``phi0 = 0`` for
  BPSK and ``pi/M`` otherwise (QPSK is then ``(+-1 +- j)/sqrt(2)``).
* PAM: real levels ``-(M-1), ..., M-1`` in steps of 2.
* QAM: square grid, row-major with the imaginary level as the row (ascending)
  and the real level as the column (ascending).

All alphabets are scaled to unit average energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidPartition, UnsupportedOrder

ModulationKind = Literal["psk", "pam", "qam"]


@dataclass(frozen=True, eq=False)
class Constellation:
    kind: str
    order: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size != self.order:
            raise UnsupportedOrder(f"expected {self.order} points, got shape {pts.shape}")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise UnsupportedOrder("constellation must have unit average energy")
        if np.unique(pts).size != pts.size:
            raise UnsupportedOrder("constellation points must be distinct")

    @property
    def energies(self) -> np.ndarray:
        return np.abs(self.points) ** 2

    @property
    def unit_modulus(self) -> bool:
        """True when every point has ``|a_m| = 1`` (PSK-like alphabets)."""
        return bool(np.all(np.abs(self.energies - 1.0) <= 1e-12))

    @property
    def min_distance(self) -> float:
        if self.order < 2:
            return np.inf
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(d[~np.eye(self.order, dtype=bool)].min())

    def spec(self) -> str:
        return f"{self.kind}:{self.order}"

    def __repr__(self):
        return f"Constellation({self.spec()!r})"


def build_constellation(kind: str, order: int) -> Constellation:
    kind = kind.lower()
    order = int(order)
    if order < 2:
        raise UnsupportedOrder(f"order must be >= 2, got {order}")
    if kind == "psk":
        phi0 = 0.0 if order == 2 else np.pi / order
        pts = np.exp(1j * (phi0 + 2 * np.pi * np.arange(order) / order))
        if order == 2:
            pts = np.array([1.0, -1.0], dtype=np.complex128)
    elif kind == "pam":
        pts = np.arange(-(order - 1), order, 2).astype(np.complex128)
    elif kind == "qam":
        side = int(round(np.sqrt(order)))
        if side * side != order:
            raise UnsupportedOrder(f"QAM order must be a perfect square, got {order}")
        levels = np.arange(-(side - 1), side, 2, dtype=float)
        im, re = np.meshgrid(levels, levels, indexing="ij")
        pts = (re + 1j * im).ravel()
    else:
        raise UnsupportedOrder(f"unknown modulation family {kind!r}")
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(kind, order, pts)


def parse_constellation(text: str) -> Constellation:
    """Build a constellation from a string such as ``"qam:16"``."""
    try:
        kind, order = text.strip().split(":")
        return build_constellation(kind, int(order))
    except ValueError as exc:
        if isinstance(exc, UnsupportedOrder):
            raise
        raise UnsupportedOrder(f"cannot parse constellation {text!r}") from exc


@dataclass(frozen=True, eq=False)
class SymbolFrame:
    symbols: np.ndarray
    indices: np.ndarray
    constellation: Constellation
    Ts: float = 1.0

    @property
    def N(self) -> int:
        return int(self.symbols.size)


def draw_symbols(c: Constellation, count: int, seed=None, Ts: float = 1.0) -> SymbolFrame:
    """Draw ``count`` i.i.d. equiprobable symbols from ``c``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, c.order, size=count)
    return SymbolFrame(c.points[idx], idx, c, Ts)


def detect_indices(c: Constellation, z) -> np.ndarray:
    """Index of the nearest point for each entry of ``z``; ties go to the lowest index."""
    z = np.asarray(z, dtype=np.complex128)
    d = np.abs(z[..., None] - c.points) ** 2
    return np.argmin(d, axis=-1)


def hard_detect(c: Constellation, z):
    """Nearest constellation point to ``z`` (scalar or array)."""
    out = c.points[detect_indices(c, z)]
    return out[()] if np.ndim(z) == 0 else out


@dataclass(frozen=True)
class PilotLayout:
    N: int
    Np: int
    pilot_indices: np.ndarray = field(repr=False)

    @property
    def n_pilots(self) -> int:
        return self.N // self.Np

    def data_mask(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=bool)
        mask[self.pilot_indices] = False
        return mask


def pilot_layout(N: int, Np: int, offset: int | None = None) -> PilotLayout:
    """One pilot every ``Np`` symbols.

    Pilots sit at zero-based positions ``offset + k*Np``. The default offset
    ``Np - 1`` puts the k-th pilot at one-based time ``k*Np``, which keeps pilot
    node times on the same grid as the full-window time axis.
    """
    if Np < 1:
        raise InvalidPartition(f"pilot period must be >= 1, got {Np}")
    if N % Np:
        raise InvalidPartition(f"pilot period {Np} does not divide N={N}")
    if offset is None:
        offset = Np - 1
    if not 0 <= offset < Np:
        raise InvalidPartition(f"offset must lie in [0, {Np}), got {offset}")
    idx = np.arange(offset, N, Np)
    idx.setflags(write=False)
    return PilotLayout(N, Np, idx)
