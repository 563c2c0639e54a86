"""Monte-Carlo NMSE sweeps, window configuration by Doppler range, and KS checks."""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np
from scipy import stats

from .channel import (ChannelTrace, FadingConfig, SimoObservation, generate_fading, project_onto_polynomials,
                      transmit, true_instantaneous_snr)
from .crlb import crlb_da
from .da import DaSnrEstimate, NoncentralFParams, analytic_moments, estimate_da
from .em import ASCENT_TOL, EmConfig, EmState, init_arbitrary, init_hybrid, run_em
from .errors import ConfigError, DimensionMismatch, NonMonotoneLikelihood, SnrError, TooFewSamples
from .poly_basis import partition
from .signal_model import Constellation, PilotLayout, SymbolFrame, draw_symbols, parse_constellation, pilot_layout

ESTIMATORS = ("pilot-only-da", "completely-da", "hybrid-sd", "hybrid-ihd", "hybrid-fhd",
              "completely-nda-sd", "completely-nda-ihd", "completely-nda-fhd")
CHANNELS = ("jakes", "jakes_poly", "constant")
MAX_ERROR_RATE = 0.01


class Table1Config(NamedTuple):
    nbar_da: int
    nbar_nda: int
    L_da: int
    L_nda: int


_TABLE1 = (
    (7e-3, Table1Config(112, 56, 4, 4)),
    (2e-2, Table1Config(28, 28, 4, 4)),
    (3.5e-2, Table1Config(28, 14, 4, 4)),
    (math.inf, Table1Config(14, 7, 2, 4)),
)


def table1_lookup(fd_ts: float) -> tuple[Table1Config, int, str]:
    """Row (1-based) for a normalized Doppler, with a note when the choice is not clear-cut.

    Shared boundaries go to the lower row (larger windows). Values strictly
    between 3.5e-2 and 5e-2 are covered by no row and map to the last one.
    """
    if not fd_ts >= 0:
        raise ValueError(f"normalized Doppler must be >= 0, got {fd_ts}")
    for row, (upper, cfg) in enumerate(_TABLE1, start=1):
        if fd_ts <= upper:
            break
    note = ""
    if fd_ts in (7e-3, 2e-2, 3.5e-2):
        note = f"boundary value shared by rows {row} and {row + 1}; row {row} chosen"
    elif 3.5e-2 < fd_ts < 5e-2:
        note = "value between rows 3 and 4 is not covered; row 4 chosen"
    return cfg, row, note


def table1_config(fd_ts: float) -> Table1Config:
    return table1_lookup(fd_ts)[0]


@dataclass(frozen=True)
class ExperimentConfig:
    constellation: str = "psk:4"
    N: int = 112
    Np: int = 7
    nbar_da: int | None = None  # None: from the Doppler table
    nbar_nda: int | None = None
    L_da: int | None = None
    L_nda: int | None = None
    n_rx: int = 2
    fd_ts: float = 7e-3
    gammas_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 500
    estimators: tuple = ("completely-da",)
    seed: int = 0
    channel: str = "jakes"  # "jakes_poly" projects each DA window onto its polynomial fit
    oscillators: int = 64
    antenna: int = 0
    max_iterations: int = 10
    tol: float = 1e-6
    law: str = "exact"
    Ts: float = 71.42e-6
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "gammas_db", tuple(float(g) for g in self.gammas_db))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        row = table1_config(self.fd_ts) if self.fd_ts >= 0 else None
        for name, idx in (("nbar_da", 0), ("nbar_nda", 1), ("L_da", 2), ("L_nda", 3)):
            if getattr(self, name) is None:
                if row is None:
                    raise ConfigError("fd_ts must be >= 0")
                object.__setattr__(self, name, row[idx])
        self.validate()

    def validate(self):
        try:
            parse_constellation(self.constellation)
            for w in (self.nbar_da, self.nbar_nda):
                partition(self.N, w)
            pilot_layout(self.N, self.Np)
        except SnrError as exc:
            raise ConfigError(str(exc)) from exc
        if self.nbar_da % self.Np:
            raise ConfigError(f"nbar_da={self.nbar_da} is not a multiple of Np={self.Np}")
        if min(self.L_da, self.L_nda) < 1 or self.L_nda > self.nbar_nda or self.L_da > self.nbar_da:
            raise ConfigError("polynomial orders must satisfy 1 <= L <= window")
        if self.n_rx < 1:
            raise ConfigError("n_rx must be >= 1")
        if not 0 <= self.antenna < self.n_rx:
            raise ConfigError(f"antenna {self.antenna} out of range for n_rx={self.n_rx}")
        if self.trials < 1 or self.workers < 1 or self.max_iterations < 1:
            raise ConfigError("trials, workers and max_iterations must be >= 1")
        if not self.gammas_db or not all(math.isfinite(g) for g in self.gammas_db):
            raise ConfigError("gamma grid must be non-empty and finite")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        if self.channel not in CHANNELS:
            raise ConfigError(f"channel must be one of {CHANNELS}")
        if self.fd_ts < 0:
            raise ConfigError("fd_ts must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gammas_db"] = list(self.gammas_db)
        d["estimators"] = list(self.estimators)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def nmse(estimates, truths, gamma: float) -> float:
    est = np.asarray(estimates, dtype=float).ravel()
    tru = np.asarray(truths, dtype=float).ravel()
    if est.size != tru.size or est.size < 1:
        raise DimensionMismatch(f"{est.size} estimates for {tru.size} truths")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return math.fsum((tru - est) ** 2) / est.size / gamma ** 2


def trial_seeds(base: int, gamma_index: int, trial_index: int):
    """Independent fading, symbol and noise seeds for one trial."""
    return np.random.SeedSequence([base, gamma_index, trial_index]).spawn(3)


@dataclass(frozen=True)
class TrialOutcome:
    estimator: str
    truth: float
    estimate: float = math.nan
    biased: float = math.nan
    error: str = ""
    iterations: int = 0
    ascent_violations: int = 0


@dataclass(frozen=True, eq=False)
class Trial:
    """One realization: channel, symbols, observation and the pilot layout."""

    trace: ChannelTrace
    frame: SymbolFrame
    obs: SimoObservation
    layout: PilotLayout
    constellation: Constellation

    @property
    def true_snr(self) -> np.ndarray:
        return true_instantaneous_snr(self.trace, self.frame, self.obs.noise_var)


def draw_trial(cfg: ExperimentConfig, gamma_index: int, trial_index: int) -> Trial:
    c = parse_constellation(cfg.constellation)
    gamma = 10 ** (cfg.gammas_db[gamma_index] / 10)
    s_fade, s_sym, s_noise = trial_seeds(cfg.seed, gamma_index, trial_index)
    model = "constant" if cfg.channel == "constant" else "jakes"
    trace = generate_fading(FadingConfig(cfg.n_rx, cfg.N, cfg.Ts, cfg.fd_ts, model, cfg.oscillators, s_fade))
    if cfg.channel == "jakes_poly":
        trace = project_onto_polynomials(trace, cfg.nbar_da, cfg.L_da)
    frame = draw_symbols(c, cfg.N, s_sym, cfg.Ts)
    obs = transmit(trace, frame, 1.0 / (2 * gamma), s_noise)
    return Trial(trace, frame, obs, pilot_layout(cfg.N, cfg.Np), c)


def run_da(name: str, cfg: ExperimentConfig, trial: Trial) -> DaSnrEstimate:
    layout = trial.layout if name == "pilot-only-da" else pilot_layout(cfg.N, 1)
    return estimate_da(trial.obs, layout, trial.frame.symbols, cfg.nbar_da, cfg.L_da, cfg.law)


def em_setup(name: str, cfg: ExperimentConfig, trial: Trial) -> tuple[EmConfig, EmState]:
    family, mode = name.rsplit("-", 1)
    init = "hybrid" if family == "hybrid" else "arbitrary"
    em_cfg = EmConfig(cfg.nbar_nda, cfg.L_nda, cfg.max_iterations, cfg.tol, mode, init, law=cfg.law)
    if init == "hybrid":
        state = init_hybrid(trial.obs, trial.layout, trial.frame.symbols, cfg.nbar_da, cfg.nbar_nda, cfg.L_da,
                            cfg.L_nda)
    else:
        state = init_arbitrary(trial.obs, cfg.nbar_nda, cfg.L_nda)
    return em_cfg, state


def _run_estimator(name, cfg, trial):
    if name in ("pilot-only-da", "completely-da"):
        est = run_da(name, cfg, trial)
        return est.rho_unbiased, est.rho, 0, 0
    em_cfg, state = em_setup(name, cfg, trial)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonMonotoneLikelihood)
        est = run_em(trial.obs, em_cfg, state, trial.constellation)
    violations = 0
    if em_cfg.mode == "sd":
        violations = sum(int(np.sum(np.diff(t) < -ASCENT_TOL)) for t in est.loglik_traces)
    return est.rho_unbiased, est.rho, int(est.iterations.max()), violations


def simulate_trial(cfg: ExperimentConfig, gamma_index: int, trial_index: int) -> list[TrialOutcome]:
    """One channel, symbol and noise draw shared by every configured estimator."""
    trial = draw_trial(cfg, gamma_index, trial_index)
    truth = float(trial.true_snr[cfg.antenna])
    out = []
    for name in cfg.estimators:
        try:
            ub, b, its, viol = _run_estimator(name, cfg, trial)
            out.append(TrialOutcome(name, truth, float(ub[cfg.antenna]), float(b[cfg.antenna]), "", its, viol))
        except (SnrError, np.linalg.LinAlgError) as exc:
            out.append(TrialOutcome(name, truth, error=type(exc).__name__))
    return out


def _trial_batch(args):
    cfg, gamma_index, trial_indices = args
    return [simulate_trial(cfg, gamma_index, t) for t in trial_indices]


@dataclass(frozen=True)
class NmsePoint:
    gamma_db: float
    estimator: str
    nmse: float
    stderr: float
    ncrlb: float
    trials: int
    errors: int
    nmse_biased: float = math.nan
    ncrlb_realized: float = math.nan
    failed: bool = False
    median_iterations: float = math.nan
    ascent_violations: int = 0
    nvar_analytic: float = math.nan  # closed-form variance at each realized SNR, averaged, over gamma^2


CSV_COLUMNS = ("gamma_db", "estimator", "nmse", "stderr", "ncrlb", "trials", "errors")


@dataclass(eq=False)
class NmseCurve:
    points: list
    config: ExperimentConfig
    notes: list = field(default_factory=list)

    def select(self, estimator: str) -> list:
        return [p for p in self.points if p.estimator == estimator]

    def column(self, estimator: str, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.select(estimator)])

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "notes": list(self.notes),
                "points": [asdict(p) for p in self.points]}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for p in self.points:
                w.writerow([repr(getattr(p, k)) if isinstance(getattr(p, k), float) else getattr(p, k)
                            for k in CSV_COLUMNS])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, allow_nan=True)


def analytic_reference(name: str, cfg: ExperimentConfig, rho: float, law: str | None = None) -> float:
    """Closed-form variance of the bias-corrected estimate at SNR ``rho``.

    NDA estimators are referred to the data-aided law on their own windows,
    which they approach once symbol decisions are reliable.
    """
    law = law or cfg.law
    if name == "pilot-only-da":
        n, eps = cfg.N // cfg.Np, cfg.L_da * cfg.Np / cfg.nbar_da
    elif name == "completely-da":
        n, eps = cfg.N, cfg.L_da / cfg.nbar_da
    else:
        n, eps = cfg.N, cfg.L_nda / cfg.nbar_nda
    try:
        return analytic_moments(rho, n, cfg.n_rx, eps, law).unbiased_variance
    except SnrError:
        return math.nan


def _summarize(cfg, gamma_db, name, outcomes) -> NmsePoint:
    gamma = 10 ** (gamma_db / 10)
    good = [o for o in outcomes if not o.error]
    errors = len(outcomes) - len(good)
    ncrlb = crlb_da(gamma, cfg.N, cfg.n_rx).bound / gamma ** 2
    failed = errors > MAX_ERROR_RATE * len(outcomes)
    if not good:
        return NmsePoint(gamma_db, name, math.nan, math.nan, ncrlb, len(outcomes), errors, failed=True)
    sq = np.array([(o.truth - o.estimate) ** 2 for o in good]) / gamma ** 2
    value = math.fsum(sq) / sq.size
    stderr = float(np.std(sq, ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else math.nan
    biased = nmse([o.biased for o in good], [o.truth for o in good], gamma)
    realized = math.fsum(crlb_da(o.truth, cfg.N, cfg.n_rx).bound for o in good) / len(good) / gamma ** 2
    its = [o.iterations for o in good]
    ref = math.fsum(analytic_reference(name, cfg, o.truth) for o in good) / len(good) / gamma ** 2
    return NmsePoint(gamma_db, name, value, stderr, ncrlb, len(outcomes), errors, biased, realized, failed,
                     float(np.median(its)), int(sum(o.ascent_violations for o in good)), ref)


def run_trials(cfg: ExperimentConfig, gamma_index: int) -> list[list[TrialOutcome]]:
    trials = range(cfg.trials)
    if cfg.workers == 1:
        return [simulate_trial(cfg, gamma_index, t) for t in trials]
    chunks = [list(trials[i::cfg.workers]) for i in range(cfg.workers)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        parts = list(pool.map(_trial_batch, [(cfg, gamma_index, ch) for ch in chunks]))
    by_index = {}
    for ch, res in zip(chunks, parts):
        by_index.update(zip(ch, res))
    return [by_index[t] for t in trials]


def run_sweep(cfg: ExperimentConfig) -> NmseCurve:
    points = []
    for gi, gdb in enumerate(cfg.gammas_db):
        results = run_trials(cfg, gi)
        for j, name in enumerate(cfg.estimators):
            points.append(_summarize(cfg, gdb, name, [r[j] for r in results]))
    _, row, note = table1_lookup(cfg.fd_ts)
    notes = [f"Doppler table row {row}" + (f": {note}" if note else "")]
    return NmseCurve(points, cfg, notes)


def ks_noncentral_f(samples, params: NoncentralFParams):
    """One-sample KS test of ``samples`` (already on the F scale) against the noncentral F law."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise TooFewSamples(f"KS test needs at least 100 samples, got {x.size}")
    res = stats.kstest(x, params.cdf)
    return float(res.statistic), float(res.pvalue)
