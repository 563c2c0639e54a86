"""Shared constructions for the tests: observations with an exactly known SNR."""

import numpy as np

from simosnr import SimoObservation, build_constellation


def polynomial_channel(rng, n_rx, N, L, scale=None):
    """Random complex polynomial channel of order L on the normalized time axis."""
    scale = scale or N
    u = np.arange(1, N + 1) / scale
    coeffs = rng.standard_normal((n_rx, L)) + 1j * rng.standard_normal((n_rx, L))
    return coeffs @ np.vander(u, L, increasing=True).T, coeffs


def fixed_snr_observation(rng, rho, N, n_rx, L, constellation="psk:4", noise_var=0.5):
    """Polynomial channel scaled so every antenna has SNR exactly ``rho`` for unit-modulus symbols.

    Returns the observation, the transmitted symbols and their indices.
    """
    kind, order = constellation.split(":")
    c = build_constellation(kind, int(order))
    idx = rng.integers(0, c.order, N)
    a = c.points[idx]
    h, _ = polynomial_channel(rng, n_rx, N, L)
    energy = np.sum(np.abs(h) ** 2 * np.abs(a) ** 2, axis=1) / (N * 2 * noise_var)
    h = h * np.sqrt(rho / energy)[:, None] if rho > 0 else np.zeros_like(h)
    w = rng.standard_normal((n_rx, N)) + 1j * rng.standard_normal((n_rx, N))
    y = h * a + np.sqrt(noise_var) * w
    return SimoObservation(y, noise_var), a, idx, h
