"""Closed-form data-aided SNR estimation on local polynomial channel windows.

Two families of moment formulas are provided through ``law``:

``"exact"`` (default)
    Moments of the estimator under circular complex Gaussian noise. Each
    complex sample carries two real degrees of freedom, so the numerator is
    ``sigma^2 * chi2(2*nu1, 2*lambda)`` and the pooled residual is
    ``sigma^2 * chi2(2*nu2)``. This is what Monte-Carlo runs reproduce.

``"nominal"``
    Closed forms that count one degree of freedom per complex sample in the
    numerator, so only the denominator and the noncentrality carry the factor
    two. They differ from ``"exact"``
    by ``eps/2`` in the mean and in lower-order variance terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .channel import SimoObservation
from .errors import (DegenerateNoiseEstimate, DegreesOfFreedomTooSmall, DimensionMismatch,
                     IllConditioned, InvalidPartition)
from .poly_basis import MAX_CONDITION, TimeMatrix, partition, time_matrix
from .signal_model import PilotLayout

NOISE_FLOOR = 1e-15
LAWS = ("exact", "nominal")


@dataclass(frozen=True, eq=False)
class DaWindowEstimate:
    coeffs: np.ndarray = field(repr=False)  # (n_rx, L), normalized basis
    noise_var: float
    window: int = 0
    residual: np.ndarray = field(default=None, repr=False)


def check_gram(gram: np.ndarray) -> None:
    """Raise ``IllConditioned`` unless the real symmetric ``gram`` is safely positive definite."""
    if not np.all(np.isfinite(gram)):
        raise IllConditioned("Gram matrix has non-finite entries")
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= 0 or ev[-1] > MAX_CONDITION * ev[0]:
        raise IllConditioned("Gram matrix is numerically singular for this symbol pattern")


def fit_window(y: np.ndarray, symbols: np.ndarray, basis: TimeMatrix, window: int = 0) -> DaWindowEstimate:
    """Least-squares polynomial fit of one window with known symbols.

    ``y`` is ``(n_rx, n)`` and ``symbols`` ``(n,)``. Every antenna shares the
    regressor ``Phi = diag(a) T`` so a single ``L x L`` Gram factorization serves
    all of them.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.complex128))
    a = np.asarray(symbols, dtype=np.complex128)
    if y.shape[1] != a.size or a.size != basis.n_rows:
        raise DimensionMismatch(f"window of {y.shape[1]} samples, {a.size} symbols, {basis.n_rows} basis rows")
    phi = a[:, None] * basis.matrix
    gram = (basis.matrix * np.abs(a[:, None]) ** 2).T @ basis.matrix
    check_gram(gram)
    rhs = phi.conj().T @ y.T
    coeffs = np.linalg.solve(gram, rhs).T
    resid = y - coeffs @ phi.T
    noise = float(np.sum(np.abs(resid) ** 2) / (2.0 * a.size * y.shape[0]))
    return DaWindowEstimate(coeffs, noise, window, resid)


def projector(phi: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the column space of ``phi``."""
    phi = np.asarray(phi)
    return phi @ np.linalg.solve(phi.conj().T @ phi, phi.conj().T)


def predict_channel(coeffs: np.ndarray, basis: TimeMatrix) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-1] != basis.order:
        raise DimensionMismatch(f"{coeffs.shape[-1]} coefficients for an order-{basis.order} basis")
    return basis.evaluate(coeffs)


@dataclass(frozen=True, eq=False)
class DaSnrEstimate:
    rho: np.ndarray  # biased, per antenna
    rho_unbiased: np.ndarray
    noise_var: float
    windows: list = field(repr=False)
    eps: float
    N: int
    n_rx: int
    nbar: int
    L: int
    Np: int
    pilot_basis: TimeMatrix = field(repr=False)
    h_pilots: np.ndarray = field(repr=False)  # (n_rx, N / Np)

    @property
    def coeffs(self) -> np.ndarray:
        """``(K, n_rx, L)`` coefficients, basis normalized by the window length."""
        return np.stack([w.coeffs for w in self.windows])

    def channel(self) -> np.ndarray:
        """Channel estimate at every position, pilot and data alike: ``(n_rx, N)``."""
        full = time_matrix(self.nbar, self.L)
        h = predict_channel(self.coeffs, full)  # (K, n_rx, nbar)
        return np.concatenate(list(h), axis=1)


def estimate_da(obs: SimoObservation, layout: PilotLayout, symbols: np.ndarray, nbar: int, L: int,
                law: str = "exact") -> DaSnrEstimate:
    """DA SNR estimate from the pilots of ``layout``.

    ``symbols`` holds the known transmitted symbols at full length ``N`` (only
    pilot positions are read). Windows of ``nbar`` samples each hold
    ``nbar / Np`` pilots; their node times are the one-based pilot positions
    inside the window normalized by ``nbar``. The bias correction treats the
    pilot sub-grid as the observation: ``N / Np`` samples and
    ``eps = L Np / nbar``, which reduces to ``eps = L / nbar`` for ``Np = 1``.
    """
    N = obs.N
    if layout.N != N:
        raise DimensionMismatch(f"layout for N={layout.N}, observation has N={N}")
    part = partition(N, nbar)
    if nbar % layout.Np:
        raise InvalidPartition(f"window {nbar} is not a multiple of the pilot period {layout.Np}")
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.size != N:
        raise DimensionMismatch(f"{symbols.size} symbols for N={N}")
    per_window = nbar // layout.Np
    local = layout.pilot_indices[:per_window]
    basis = time_matrix(per_window, L, local + 1, scale=nbar)
    windows, h_pilots = [], []
    for k, rng_k in enumerate(part.ranges()):
        pos = layout.pilot_indices[k * per_window:(k + 1) * per_window]
        est = fit_window(obs.samples[:, pos], symbols[pos], basis, k)
        windows.append(est)
        h_pilots.append(predict_channel(est.coeffs, basis))
    noise = float(np.mean([w.noise_var for w in windows]))
    if noise < NOISE_FLOOR:
        raise DegenerateNoiseEstimate(f"pooled noise variance {noise:.3g} below {NOISE_FLOOR}")
    h_pilots = np.concatenate(h_pilots, axis=1)
    a_p = symbols[layout.pilot_indices]
    num = np.sum(np.abs(a_p) ** 2 * np.abs(h_pilots) ** 2, axis=1)
    rho = num / (layout.n_pilots * 2.0 * noise)
    eps = L / per_window
    rho_ub = unbias(rho, layout.n_pilots, obs.n_rx, eps, law)
    return DaSnrEstimate(rho, rho_ub, noise, windows, eps, N, obs.n_rx, nbar, L, layout.Np, basis, h_pilots)


def _check_dof(N, n_rx, eps, law):
    if law not in LAWS:
        raise ValueError(f"law must be one of {LAWS}")
    d = n_rx * N * (1.0 - eps)
    # variance needs nu2 > 4 on the real degrees of freedom actually used
    if (law == "exact" and d <= 2) or (law == "nominal" and d <= 4):
        raise DegreesOfFreedomTooSmall(f"n_rx*N*(1-eps) = {d:g} too small for {law} moments")
    return d


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    bias: float
    unbiased_variance: float


def analytic_moments(rho, N: int, n_rx: int, eps: float, law: str = "exact") -> Moments:
    """Mean, variance and bias of the biased DA estimate, and variance after correction."""
    d = _check_dof(N, n_rx, eps, law)
    nn = n_rx * N
    if law == "exact":
        mean = nn * (rho + eps) / (d - 1)
        bracket = (eps + rho) ** 2 + (eps + 2 * rho) * (d - 1) / N
    else:
        mean = nn * (rho + eps / 2) / (d - 1)
        bracket = (rho ** 2 + rho * (2 * n_rx * (1 - eps) + eps - 2 / N)
                   + (n_rx / 2 - 1 / (2 * N)) * eps - (n_rx / 2 - 0.25) * eps ** 2)
    variance = nn ** 2 * bracket / ((d - 1) ** 2 * (d - 2))
    return Moments(mean, variance, mean - rho, bracket / (d - 2))


def unbias(rho_hat, N: int, n_rx: int, eps: float, law: str = "exact"):
    """Affine bias correction; the inverse of the mean map of ``analytic_moments``.

    Results can be slightly negative at very low SNR and are not clamped.
    """
    d = _check_dof(N, n_rx, eps, law)
    shift = eps if law == "exact" else eps / 2
    return (d - 1) / (n_rx * N) * np.asarray(rho_hat) - shift


@dataclass(frozen=True)
class NoncentralFParams:
    """Noncentral-F law of the DA estimate: ``estimate = scale * F(nu1, nu2, nc)``."""

    nu1: float
    nu2: float
    nc: float
    scale: float

    def complex_law(self) -> "NoncentralFParams":
        """Parameters on real degrees of freedom (all three doubled, same scale)."""
        return NoncentralFParams(2 * self.nu1, 2 * self.nu2, 2 * self.nc, self.scale)

    def to_f(self, estimates) -> np.ndarray:
        return np.asarray(estimates) / self.scale

    def cdf(self, x) -> np.ndarray:
        return noncentral_f_cdf(x, self.nu1, self.nu2, self.nc)


def f_params(N: int, nbar: int, L: int, n_rx: int, rho: float) -> NoncentralFParams:
    partition(N, nbar)
    nu1 = N // nbar * L
    nu2 = n_rx * (N - nu1)
    if nu2 <= 0:
        raise DegreesOfFreedomTooSmall(f"nu2 = {nu2} for N={N}, nbar={nbar}, L={L}")
    return NoncentralFParams(float(nu1), float(nu2), float(N * rho), nu1 * n_rx / nu2)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
# panel edges as upper-tail probabilities of the chi2 denominator
_TAIL_EDGES = np.concatenate([[1.0 - 1e-16, 1.0 - 1e-8, 1.0 - 1e-4, 0.99],
                              np.linspace(0.95, 0.05, 10), [0.01, 1e-4, 1e-8, 1e-16]])


def _denominator_rule(nu2: float):
    """Composite Gauss-Legendre nodes with chi2(nu2)-density weights.

    Panels are bounded by quantiles so every panel carries comparable mass.
    Below two degrees of freedom the density is singular at zero; the
    substitution ``s = t**2`` on the first panel keeps the rule accurate there.
    """
    edges = special.chdtri(nu2, _TAIL_EDGES)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    s = mid + half * _GL_NODES
    w = half * _GL_WEIGHTS * stats.chi2.pdf(s, nu2)
    if nu2 < 2:
        t_hi = np.sqrt(edges[1])
        t = 0.5 * t_hi * (_GL_NODES + 1.0)
        s[0] = t ** 2
        w[0] = 0.5 * t_hi * _GL_WEIGHTS * 2 * t * stats.chi2.pdf(s[0], nu2)
    return s.ravel(), w.ravel()


def noncentral_f_cdf(x, nu1: float, nu2: float, nc: float) -> np.ndarray:
    """CDF of ``(X1/nu1) / (X2/nu2)``, ``X1 ~ chi2(nu1, nc)``, ``X2 ~ chi2(nu2)``.

    Conditions on the central denominator, ``P(F <= x) = E[ncx2.cdf(x*nu1*X2/nu2)]``,
    and takes the expectation by composite Gauss-Legendre quadrature over the
    bulk of the ``chi2(nu2)`` density.
    """
    x = np.asarray(x, dtype=float)
    s, w = _denominator_rule(nu2)
    arg = np.maximum(x[..., None], 0.0) * nu1 * s / nu2
    inner = stats.ncx2.cdf(arg, nu1, nc) if nc > 0 else stats.chi2.cdf(arg, nu1)
    return np.clip(inner @ w, 0.0, 1.0)
