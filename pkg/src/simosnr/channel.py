"""Time-varying flat-fading SIMO channels, AWGN and the true instantaneous SNR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, UnsupportedModel, ZeroNoise
from .poly_basis import partition, time_matrix
from .signal_model import SymbolFrame

SPEED_OF_LIGHT = 3e8
MODELS = ("jakes", "polynomial", "constant")


@dataclass(frozen=True)
class FadingConfig:
    n_rx: int
    N: int
    Ts: float = 71.42e-6
    fd_ts: float = 7e-3
    model: str = "jakes"
    oscillators: int = 64
    seed: int | None = None
    # polynomial model only: (n_rx, L) coefficients on u = n / poly_scale
    poly_coeffs: np.ndarray | None = field(default=None, repr=False)
    poly_scale: float | None = None

    def __post_init__(self):
        if self.n_rx < 1 or self.N < 1:
            raise ValueError("n_rx and N must be >= 1")
        if self.fd_ts < 0:
            raise ValueError("normalized Doppler must be non-negative")
        if self.model == "jakes" and self.oscillators < 8:
            raise ValueError("Jakes model needs at least 8 oscillators")

    @property
    def doppler_hz(self) -> float:
        return self.fd_ts / self.Ts


@dataclass(frozen=True, eq=False)
class ChannelTrace:
    gains: np.ndarray = field(repr=False)  # (n_rx, N)
    config: FadingConfig

    @property
    def n_rx(self) -> int:
        return self.gains.shape[0]

    @property
    def N(self) -> int:
        return self.gains.shape[1]


@dataclass(frozen=True, eq=False)
class SimoObservation:
    samples: np.ndarray = field(repr=False)  # (n_rx, N)
    noise_var: float  # per real dimension
    Ts: float = 1.0

    @property
    def n_rx(self) -> int:
        return self.samples.shape[0]

    @property
    def N(self) -> int:
        return self.samples.shape[1]


def jakes_gains(fd_ts: float, N: int, n_rx: int, oscillators: int, rng) -> np.ndarray:
    """Clarke/Jakes sum of sinusoids with unit average power.

    Each antenna uses ``oscillators`` equally spaced arrival angles under an
    independent random rotation plus i.i.d. uniform phases, which gives the
    ``J0(2*pi*fd_ts*lag)`` autocorrelation in the ensemble average.
    """
    n = np.arange(1, N + 1)
    k = np.arange(oscillators)
    rot = rng.uniform(0.0, 1.0, size=(n_rx, 1))
    theta = 2 * np.pi * (k[None, :] + rot) / oscillators
    phase = rng.uniform(0.0, 2 * np.pi, size=(n_rx, oscillators))
    freq = 2 * np.pi * fd_ts * np.cos(theta)  # (n_rx, K)
    arg = freq[:, :, None] * n[None, None, :] + phase[:, :, None]
    return np.exp(1j * arg).sum(axis=1) / np.sqrt(oscillators)


def generate_fading(cfg: FadingConfig) -> ChannelTrace:
    rng = np.random.default_rng(cfg.seed)
    if cfg.model == "jakes":
        h = jakes_gains(cfg.fd_ts, cfg.N, cfg.n_rx, cfg.oscillators, rng)
    elif cfg.model == "constant":
        g = (rng.standard_normal(cfg.n_rx) + 1j * rng.standard_normal(cfg.n_rx)) / np.sqrt(2)
        h = np.repeat(g[:, None], cfg.N, axis=1)
    elif cfg.model == "polynomial":
        if cfg.poly_coeffs is None:
            raise UnsupportedModel("polynomial model needs poly_coeffs")
        c = np.atleast_2d(np.asarray(cfg.poly_coeffs, dtype=np.complex128))
        if c.shape[0] != cfg.n_rx:
            raise DimensionMismatch(f"coefficients for {c.shape[0]} antennas, n_rx={cfg.n_rx}")
        scale = cfg.poly_scale if cfg.poly_scale is not None else float(cfg.N)
        u = np.arange(1, cfg.N + 1) / scale
        h = c @ np.vander(u, c.shape[1], increasing=True).T
    else:
        raise UnsupportedModel(f"unknown fading model {cfg.model!r}")
    return ChannelTrace(h, cfg)


def transmit(trace: ChannelTrace, frame: SymbolFrame, noise_var: float, seed=None) -> SimoObservation:
    """``y_i(n) = h_i(n) a(n) + w_i(n)``; ``w`` has variance ``noise_var`` per real dimension."""
    if frame.N != trace.N:
        raise DimensionMismatch(f"frame length {frame.N} != trace length {trace.N}")
    if noise_var < 0:
        raise ValueError("noise variance must be non-negative")
    rng = np.random.default_rng(seed)
    shape = trace.gains.shape
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    y = trace.gains * frame.symbols[None, :] + np.sqrt(noise_var) * w
    return SimoObservation(y, float(noise_var), frame.Ts)


def true_instantaneous_snr(trace: ChannelTrace, frame: SymbolFrame, noise_var: float) -> np.ndarray:
    """Per-antenna ``sum_n |h_i(n)|^2 |a(n)|^2 / (N * 2 sigma^2)``."""
    if noise_var <= 0:
        raise ZeroNoise("true SNR undefined for zero noise variance")
    if frame.N != trace.N:
        raise DimensionMismatch(f"frame length {frame.N} != trace length {trace.N}")
    energy = np.abs(trace.gains) ** 2 @ np.abs(frame.symbols) ** 2
    return energy / (trace.N * 2.0 * noise_var)


def doppler_to_velocity(fd_hz: float, carrier_hz: float) -> float:
    """User speed (m/s) producing a maximum Doppler shift ``fd_hz`` at ``carrier_hz``."""
    return fd_hz * SPEED_OF_LIGHT / carrier_hz


def project_onto_polynomials(trace: ChannelTrace, window: int, L: int) -> ChannelTrace:
    """Replace each window of the trace by its least-squares degree ``L-1`` fit.

    The result is exactly polynomial per window, so it follows the local model
    with no truncation remainder while keeping the fading statistics.
    """
    part = partition(trace.N, window)
    T = time_matrix(window, L)
    blocks = part.split(trace.gains)
    fitted = T.evaluate(T.fit(blocks))
    return ChannelTrace(fitted.reshape(trace.gains.shape), trace.config)
