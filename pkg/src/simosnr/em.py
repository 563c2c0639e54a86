"""Non-data-aided SNR estimation by expectation-maximization.

Each window of ``nbar`` samples is modeled as ``y_i(n) = a(n) t(n)^T c_i + w_i(n)``
with unknown equiprobable symbols ``a(n)``. The E-step forms symbol posteriors
per snapshot (the ``n_rx`` samples at one instant). The M-step maximizes the
expected complete-data log-likelihood in the coefficients, which gives a
weighted least-squares problem

    (sum_n w_n t t^T) c_i = sum_n conj(a_hat_n) y_i(n) t(n),

with ``w_n = E|a|^2`` (soft detection) or ``|a_bar|^2`` (hard detection). For
unit-modulus alphabets ``w_n = 1`` and the left side is the plain Gram matrix.
The noise update minimizes the same objective in ``sigma^2``; by default it is
evaluated at the previous coefficients, which keeps the iteration a
generalized EM and so preserves likelihood ascent.

Detection modes:

``sd``   soft symbols throughout.
``ihd``  soft symbols are rounded to the nearest point before every M-step.
``fhd``  soft iterations to convergence, then one rounding and a refit of the
         coefficients and noise on the decided symbols.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .channel import SimoObservation
from .da import NOISE_FLOOR, check_gram, fit_window, unbias
from .errors import DegenerateNoiseEstimate, DimensionMismatch, NonMonotoneLikelihood, NumericalUnderflow
from .poly_basis import TimeMatrix, partition, time_matrix
from .signal_model import Constellation, PilotLayout, hard_detect

MODES = ("sd", "ihd", "fhd")
INITS = ("hybrid", "arbitrary")
ASCENT_TOL = 1e-8


@dataclass(frozen=True)
class EmConfig:
    nbar: int
    L: int
    max_iterations: int = 10
    tol: float = 1e-6  # on the relative change of 2 sigma^2
    mode: str = "sd"
    init: str = "hybrid"
    fresh_noise: bool = False  # noise update with the new coefficients instead of the previous ones
    m2: str = "sum"  # "mean" divides the received energy by the window length
    law: str = "exact"

    def __post_init__(self):
        if self.nbar < self.L or self.L < 1:
            raise ValueError(f"need nbar >= L >= 1, got nbar={self.nbar}, L={self.L}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.m2 not in ("sum", "mean"):
            raise ValueError("m2 must be 'sum' or 'mean'")


@dataclass(frozen=True, eq=False)
class WindowState:
    coeffs: np.ndarray = field(repr=False)  # (n_rx, L)
    noise_var: float
    iteration: int = 0
    loglik: tuple = ()  # observed-data log-likelihood at theta^(0), theta^(1), ...
    noise_trace: tuple = ()


@dataclass(frozen=True, eq=False)
class EmState:
    """Initial or current parameters of every window: ``coeffs`` is ``(K, n_rx, L)``."""

    coeffs: np.ndarray = field(repr=False)
    noise_var: np.ndarray

    @property
    def K(self) -> int:
        return self.coeffs.shape[0]

    def window(self, k: int) -> WindowState:
        return WindowState(self.coeffs[k], float(self.noise_var[k]))


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    probs: np.ndarray = field(repr=False)  # (M, n), columns sum to one
    soft: np.ndarray = field(repr=False)  # (n,)
    alpha: np.ndarray = field(repr=False)  # (n,), posterior mean energy
    loglik: float  # observed-data log-likelihood of the window at the conditioning parameters


def log_weights(y: np.ndarray, coeffs: np.ndarray, noise_var: float, basis: TimeMatrix,
                c: Constellation) -> np.ndarray:
    """``log p(y(n) | a_m) + log(1/M)`` for every point and snapshot: ``(M, n)``."""
    h = basis.evaluate(coeffs)  # (n_rx, n)
    diff = y[None, :, :] - c.points[:, None, None] * h[None, :, :]
    dist = np.sum(diff.real ** 2 + diff.imag ** 2, axis=1)
    n_rx = y.shape[0]
    return -dist / (2 * noise_var) - n_rx * np.log(2 * np.pi * noise_var) - np.log(c.order)


def e_step(state: WindowState, y: np.ndarray, c: Constellation, basis: TimeMatrix) -> PosteriorTable:
    if not state.noise_var > 0:
        raise DegenerateNoiseEstimate(f"noise variance {state.noise_var} is not positive")
    y = np.atleast_2d(y)
    logw = log_weights(y, state.coeffs, state.noise_var, basis, c)
    norm = logsumexp(logw, axis=0)
    if not np.all(np.isfinite(norm)):
        raise NumericalUnderflow("every symbol hypothesis has zero likelihood")
    probs = np.exp(logw - norm)
    probs /= probs.sum(axis=0)
    soft = c.points @ probs
    alpha = np.ones(y.shape[1]) if c.unit_modulus else c.energies @ probs
    return PosteriorTable(probs, soft, alpha, float(norm.sum()))


def one_hot_posteriors(indices: np.ndarray, c: Constellation) -> PosteriorTable:
    """Posterior table concentrated on known symbol indices (the loglik is left as nan)."""
    idx = np.asarray(indices)
    probs = np.zeros((c.order, idx.size))
    probs[idx, np.arange(idx.size)] = 1.0
    return PosteriorTable(probs, c.points[idx], c.energies[idx], float("nan"))


def _weighted_fit(y, symbols, weights, basis):
    T = basis.matrix
    gram = (T * weights[:, None]).T @ T
    check_gram(gram)
    rhs = (np.conj(symbols)[None, :] * y) @ T  # (n_rx, L)
    return np.linalg.solve(gram, rhs.T).T


def expected_residual(y, coeffs, symbols, weights, basis, m2: str = "sum") -> float:
    """``sum_i (M2_i + eta_i)`` with ``eta_i = sum_n w_n |t^T c_i|^2 - 2 Re(conj(y) a t^T c_i)``."""
    h = basis.evaluate(coeffs)
    energy = np.sum(np.abs(y) ** 2, axis=1)
    if m2 == "mean":
        energy = energy / y.shape[1]
    eta = np.sum(weights * np.abs(h) ** 2 - 2 * np.real(np.conj(y) * symbols * h), axis=1)
    return float(np.sum(energy + eta))


def m_step(post: PosteriorTable, y: np.ndarray, basis: TimeMatrix, state: WindowState, config: EmConfig,
           c: Constellation | None = None) -> WindowState:
    """Coefficient and noise update from a posterior table.

    In ``ihd`` mode the soft symbols are first rounded to the nearest point of
    ``c`` and the weights become the energies of the decisions.
    """
    y = np.atleast_2d(y)
    symbols, weights = post.soft, post.alpha
    if config.mode == "ihd":
        if c is None:
            raise ValueError("hard detection needs the constellation")
        symbols = hard_detect(c, post.soft)
        weights = np.abs(symbols) ** 2
    coeffs = _weighted_fit(y, symbols, weights, basis)
    ref = coeffs if config.fresh_noise else state.coeffs
    noise = expected_residual(y, ref, symbols, weights, basis, config.m2) / (2 * y.shape[1] * y.shape[0])
    if noise < NOISE_FLOOR:
        raise DegenerateNoiseEstimate(f"noise variance {noise:.3g} below {NOISE_FLOOR}")
    return WindowState(coeffs, noise, state.iteration + 1, state.loglik, state.noise_trace + (noise,))


@dataclass(frozen=True, eq=False)
class WindowResult:
    state: WindowState
    posteriors: PosteriorTable = field(repr=False)
    symbols: np.ndarray = field(repr=False)  # symbols entering the SNR numerator
    converged: bool


def observed_loglik(y, state: WindowState, c: Constellation, basis: TimeMatrix) -> float:
    return e_step(state, y, c, basis).loglik


def em_window(y: np.ndarray, c: Constellation, basis: TimeMatrix, init: WindowState, config: EmConfig,
              oracle_indices: np.ndarray | None = None) -> WindowResult:
    """Iterate E and M steps on one window.

    ``oracle_indices`` clamps the posteriors one-hot at known symbols; the
    recursion then reduces to the data-aided fit.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.complex128))
    if y.shape[1] != basis.n_rows:
        raise DimensionMismatch(f"window of {y.shape[1]} samples for a {basis.n_rows}-row basis")
    soft_config = replace(config, mode="sd") if config.mode == "fhd" else config
    state = replace(init, iteration=0, loglik=(), noise_trace=(init.noise_var,))
    converged = False
    post = None
    for _ in range(config.max_iterations):
        post = e_step(state, y, c, basis)
        state = replace(state, loglik=state.loglik + (post.loglik,))
        if oracle_indices is not None:
            post = one_hot_posteriors(oracle_indices, c)
        new = m_step(post, y, basis, state, soft_config, c)
        change = abs(new.noise_var - state.noise_var) / state.noise_var
        state = new
        if change < config.tol:
            converged = True
            break
    final = e_step(state, y, c, basis)
    state = replace(state, loglik=state.loglik + (final.loglik,))
    if oracle_indices is not None:
        final = one_hot_posteriors(oracle_indices, c)
    if config.mode == "sd" and oracle_indices is None and np.any(np.diff(state.loglik) < -ASCENT_TOL):
        warnings.warn("observed-data log-likelihood decreased in soft-detection EM", NonMonotoneLikelihood,
                      stacklevel=2)
    symbols = final.soft
    if config.mode == "ihd":
        symbols = hard_detect(c, final.soft)
    elif config.mode == "fhd":
        symbols = hard_detect(c, final.soft)
        refit = fit_window(y, symbols, basis)
        state = replace(state, coeffs=refit.coeffs, noise_var=refit.noise_var,
                        noise_trace=state.noise_trace + (refit.noise_var,))
    return WindowResult(state, final, symbols, converged)


def init_arbitrary(obs: SimoObservation, nbar: int, L: int) -> EmState:
    """All coefficients ``1 + 0j``; noise from the sample second moment."""
    K = partition(obs.N, nbar).K
    coeffs = np.ones((K, obs.n_rx, L), dtype=np.complex128)
    noise = float(np.mean(np.abs(obs.samples) ** 2) / 2)
    return EmState(coeffs, np.full(K, noise))


def init_hybrid(obs: SimoObservation, layout: PilotLayout, pilots: np.ndarray, nbar_da: int, nbar_nda: int,
                L_da: int, L_nda: int) -> EmState:
    """Seed every NDA window from the pilot-only DA fit.

    The DA channel estimate is expanded to all positions on the ``nbar_da``
    grid, cut into ``nbar_nda`` blocks and projected onto the order-``L_nda``
    basis. The pooled DA noise estimate initializes every window; when the
    pilots exactly determine the polynomial it is zero and is raised to the
    noise floor.
    """
    N = obs.N
    if layout.N != N:
        raise DimensionMismatch(f"layout for N={layout.N}, observation has N={N}")
    pilots = np.asarray(pilots, dtype=np.complex128)
    if pilots.size != N:
        raise DimensionMismatch(f"{pilots.size} symbols for N={N}")
    part_da = partition(N, nbar_da)
    part_nda = partition(N, nbar_nda)
    if nbar_da % layout.Np:
        raise DimensionMismatch(f"DA window {nbar_da} is not a multiple of the pilot period {layout.Np}")
    per_window = nbar_da // layout.Np
    basis = time_matrix(per_window, L_da, layout.pilot_indices[:per_window] + 1, scale=nbar_da)
    full = time_matrix(nbar_da, L_da)
    h_hat, noises = [], []
    for k in range(part_da.K):
        pos = layout.pilot_indices[k * per_window:(k + 1) * per_window]
        est = fit_window(obs.samples[:, pos], pilots[pos], basis, k)
        h_hat.append(full.evaluate(est.coeffs))
        noises.append(est.noise_var)
    h_hat = np.concatenate(h_hat, axis=1)
    T = time_matrix(nbar_nda, L_nda)
    coeffs = np.moveaxis(T.fit(part_nda.split(h_hat)), 0, 1)  # (K, n_rx, L)
    noise = max(float(np.mean(noises)), NOISE_FLOOR)
    return EmState(coeffs, np.full(part_nda.K, noise))


@dataclass(frozen=True, eq=False)
class NdaSnrEstimate:
    rho: np.ndarray
    rho_unbiased: np.ndarray
    noise_var: float
    windows: list = field(repr=False)
    eps: float
    mode: str

    @property
    def iterations(self) -> np.ndarray:
        return np.array([w.state.iteration for w in self.windows])

    @property
    def loglik_traces(self) -> list:
        return [np.array(w.state.loglik) for w in self.windows]

    @property
    def soft_symbols(self) -> np.ndarray:
        return np.concatenate([w.posteriors.soft for w in self.windows])

    @property
    def symbols(self) -> np.ndarray:
        return np.concatenate([w.symbols for w in self.windows])

    def channel(self, basis: TimeMatrix) -> np.ndarray:
        return np.concatenate([basis.evaluate(w.state.coeffs) for w in self.windows], axis=1)


def run_em(obs: SimoObservation, config: EmConfig, init: EmState, c: Constellation,
           oracle_indices: np.ndarray | None = None) -> NdaSnrEstimate:
    """EM on every window, pooled noise, then the SNR and its bias correction."""
    part = partition(obs.N, config.nbar)
    if init.K != part.K:
        raise DimensionMismatch(f"initial state has {init.K} windows, partition has {part.K}")
    basis = time_matrix(config.nbar, config.L)
    blocks = part.split(obs.samples)  # (n_rx, K, nbar)
    windows = []
    for k in range(part.K):
        idx = None if oracle_indices is None else np.asarray(oracle_indices)[k * config.nbar:(k + 1) * config.nbar]
        windows.append(em_window(blocks[:, k], c, basis, init.window(k), config, idx))
    noise = float(np.mean([w.state.noise_var for w in windows]))
    num = sum(np.abs(w.symbols) ** 2 @ (np.abs(basis.evaluate(w.state.coeffs)) ** 2).T for w in windows)
    rho = num / (obs.N * 2 * noise)
    eps = config.L / config.nbar
    return NdaSnrEstimate(rho, unbias(rho, obs.N, obs.n_rx, eps, config.law), noise, windows, eps, config.mode)
