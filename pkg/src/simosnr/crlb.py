"""Cramer-Rao lower bound for data-aided instantaneous SNR estimation.

Two evaluation paths are offered. ``crlb_da`` is the closed form
``(rho/N) (2 + rho/n_rx)``. ``crlb_via_fim`` assembles the Fisher information
of ``theta = [Re h, Im h, sigma^2]`` block by block from the channel, the known
symbols and the noise level and evaluates the quadratic form ``g^T I^{-1} g``.
The full ``(2 N n_rx + 1)``-square matrix is never built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingularFim, ZeroNoise


@dataclass(frozen=True)
class CrlbResult:
    bound: float
    rho: float
    N: int
    n_rx: int
    path: str  # "closed-form" or "fim"


def crlb_da(rho: float, N: int, n_rx: int) -> CrlbResult:
    if N < 1 or n_rx < 1:
        raise ValueError("N and n_rx must be >= 1")
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return CrlbResult(float(rho / N * (2.0 + rho / n_rx)), float(rho), int(N), int(n_rx), "closed-form")


@dataclass(frozen=True, eq=False)
class FimBlocks:
    """Diagonal of each ``Re h_i`` / ``Im h_i`` block (they are ``A^H A / sigma^2``) and the noise entry."""

    channel_diag: np.ndarray = field(repr=False)  # (N,), shared by all 2*n_rx blocks
    noise: float
    n_rx: int

    @property
    def size(self) -> int:
        return 2 * self.n_rx * self.channel_diag.size + 1

    def dense(self) -> np.ndarray:
        """Full matrix, for tests on small problems only."""
        d = np.concatenate([np.tile(self.channel_diag, 2 * self.n_rx), [self.noise]])
        return np.diag(d)


def fim_blocks(symbols: np.ndarray, noise_var: float, n_rx: int) -> FimBlocks:
    a = np.asarray(symbols, dtype=np.complex128).ravel()
    if noise_var <= 0:
        raise ZeroNoise("Fisher information needs sigma^2 > 0")
    energy = np.abs(a) ** 2
    if not np.any(energy > 0):
        raise SingularFim("every symbol is zero")
    return FimBlocks(energy / noise_var, a.size * n_rx / noise_var ** 2, int(n_rx))


def snr_gradient(h: np.ndarray, symbols: np.ndarray, noise_var: float, antenna: int):
    """Nonzero parts of ``d rho_i / d theta``: the ``Re h_i``, ``Im h_i`` and ``sigma^2`` entries."""
    a = np.asarray(symbols, dtype=np.complex128).ravel()
    hi = np.asarray(h)[antenna]
    N = a.size
    w = np.abs(a) ** 2
    g_re = w * hi.real / (N * noise_var)
    g_im = w * hi.imag / (N * noise_var)
    g_s2 = -np.sum(w * np.abs(hi) ** 2) / (2 * N * noise_var ** 2)
    return g_re, g_im, g_s2


def crlb_via_fim(h: np.ndarray, symbols: np.ndarray, noise_var: float, antenna: int = 0) -> CrlbResult:
    """Bound on antenna ``antenna`` for channel ``h`` of shape ``(n_rx, N)`` and all-known symbols.

    Symbol positions with ``a = 0`` carry no information about ``h`` there, but
    the SNR does not depend on ``h`` at those positions either, so they are
    dropped from the quadratic form instead of inverting a zero block.
    """
    h = np.atleast_2d(np.asarray(h, dtype=np.complex128))
    a = np.asarray(symbols, dtype=np.complex128).ravel()
    n_rx, N = h.shape
    if a.size != N:
        raise DimensionMismatch(f"{a.size} symbols for a channel of length {N}")
    if not 0 <= antenna < n_rx:
        raise DimensionMismatch(f"antenna {antenna} out of range for n_rx={n_rx}")
    blocks = fim_blocks(a, noise_var, n_rx)
    g_re, g_im, g_s2 = snr_gradient(h, a, noise_var, antenna)
    live = blocks.channel_diag > 0
    d = blocks.channel_diag[live]
    quad = np.sum(g_re[live] ** 2 / d) + np.sum(g_im[live] ** 2 / d) + g_s2 ** 2 / blocks.noise
    rho = float(np.sum(np.abs(a) ** 2 * np.abs(h[antenna]) ** 2) / (N * 2 * noise_var))
    return CrlbResult(float(quad), rho, N, n_rx, "fim")
