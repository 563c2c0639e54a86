"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Criteria whose stated formula or claim does not survive Monte Carlo are
implemented as stated and fail; supplementary tests in ``test_da.py`` check
the corrected laws.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ACCEPTANCE_LINES
from helpers import fixed_snr_observation
from simosnr import (EmConfig, ExperimentConfig, analytic_moments, build_constellation, crlb_da, crlb_via_fim,
                     estimate_da, f_params, init_arbitrary, ks_noncentral_f, pilot_layout, run_em, run_sweep,
                     table1_config, time_matrix)
from simosnr.em import WindowState, em_window
from simosnr.harness import run_trials

pytestmark = pytest.mark.slow


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


DA_SWEEP = dict(constellation="qam:16", N=112, Np=7, nbar_da=112, L_da=4, nbar_nda=56, L_nda=4, n_rx=2,
            fd_ts=7e-3, channel="jakes_poly", gammas_db=(0, 5, 10, 15, 20, 25, 30))


def test_c01_da_nmse_matches_closed_form_variance():
    cfg = ExperimentConfig(**DA_SWEEP, trials=5000, estimators=("completely-da",))
    worst, details = 0.0, []
    for gi, gdb in enumerate(cfg.gammas_db):
        gamma = 10 ** (gdb / 10)
        outcomes = [r[0] for r in run_trials(cfg, gi)]
        assert not any(o.error for o in outcomes)
        sq = math.fsum((o.truth - o.estimate) ** 2 for o in outcomes) / len(outcomes) / gamma ** 2
        # nominal closed form, averaged over the SNR each fading draw realized
        ref = np.mean([analytic_moments(o.truth, 112, 2, 4 / 112, "nominal").unbiased_variance
                       for o in outcomes]) / gamma ** 2
        dev = abs(sq / ref - 1)
        worst = max(worst, dev)
        details.append(f"{gdb:g}dB:{sq / ref:.3f}")
    report(1, "completely-DA NMSE vs closed-form variance", worst <= 0.15,
           f"max rel dev {worst:.3f} (tol 0.15); ratios " + " ".join(details))


def test_c02_nominal_bias_law():
    rng = np.random.default_rng(20)
    N, L, n_rx, trials = 28, 4, 2, 100_000
    layout = pilot_layout(N, 1)
    ok, details = True, []
    for rho in (0.0, 1.0, 10.0):
        est = np.empty(trials)
        for t in range(trials):
            obs, a, _, _ = fixed_snr_observation(rng, rho, N, n_rx, L)
            est[t] = estimate_da(obs, layout, a, N, L).rho[0]
        se = est.std(ddof=1) / math.sqrt(trials)
        nominal = analytic_moments(rho, N, n_rx, L / N, "nominal").mean
        z = (est.mean() - nominal) / se
        ok &= abs(z) <= 3
        details.append(f"rho={rho:g}: MC {est.mean():.5f} vs {nominal:.5f} (z={z:+.1f})")
    report(2, "bias law, nominal mean", ok, "; ".join(details))


def test_c03_noncentral_f_nominal_parameters():
    rng = np.random.default_rng(30)
    N, nbar, L, n_rx, rho = 112, 112, 4, 2, 1.0
    params = f_params(N, nbar, L, n_rx, rho)
    assert (params.nu1, params.nu2, params.nc) == (4.0, 216.0, 112.0)
    layout = pilot_layout(N, 1)
    est = []
    for _ in range(5000):
        obs, a, _, _ = fixed_snr_observation(rng, rho, N, n_rx, L)
        est.append(estimate_da(obs, layout, a, nbar, L).rho[0])
    stat, p = ks_noncentral_f(params.to_f(est), params)
    report(3, "noncentral-F law, nominal parameters", p > 0.01,
           f"KS D={stat:.4f}, p={p:.3g} (need > 0.01) against F(4, 216, 112)")


FIM_GRID = [(rho, N, n_rx) for rho in (0.1, 1.0, 10.0, 100.0) for N in (14, 56, 112) for n_rx in (1, 2, 4, 8)]


@settings(max_examples=200)
@given(rho=st.floats(1e-3, 1e3), N=st.integers(1, 200), n_rx=st.integers(1, 8), seed=st.integers(0, 2 ** 32 - 1),
       modulation=st.sampled_from(["psk:4", "psk:8", "qam:16", "pam:4"]))
def _fim_property(rho, N, n_rx, seed, modulation):
    _fim_check(rho, N, n_rx, seed, modulation)


def _fim_check(rho, N, n_rx, seed, modulation="psk:4"):
    rng = np.random.default_rng(seed)
    kind, order = modulation.split(":")
    c = build_constellation(kind, int(order))
    a = c.points[rng.integers(0, c.order, N)]
    h = rng.standard_normal((n_rx, N)) + 1j * rng.standard_normal((n_rx, N))
    noise_var = rng.uniform(0.1, 2.0)
    energy = np.sum(np.abs(h[0]) ** 2 * np.abs(a) ** 2) / (N * 2 * noise_var)
    h *= math.sqrt(rho / energy)
    fim = crlb_via_fim(h, a, noise_var, 0).bound
    closed = crlb_da(rho, N, n_rx).bound
    rel = abs(fim - closed) / closed
    assert rel <= 1e-8, (rho, N, n_rx, rel)
    return rel


def test_c04_crlb_paths_agree():
    worst = max(_fim_check(rho, N, n_rx, seed=i) for i, (rho, N, n_rx) in enumerate(FIM_GRID))
    _fim_property()
    report(4, "CRLB closed form vs FIM path", worst <= 1e-8,
           f"max rel diff {worst:.2e} on the 48-point grid, plus 200 random instances (tol 1e-8)")


def _bpsk_loglik(y, re, im, s2):
    c = (re + 1j * im)[..., None]
    s2 = s2[..., None]
    d1, d2 = np.abs(y - c) ** 2, np.abs(y + c) ** 2
    m = np.minimum(d1, d2)
    mix = np.log(0.5 * (np.exp(-(d1 - m) / (2 * s2)) + np.exp(-(d2 - m) / (2 * s2))))
    return np.sum(-m / (2 * s2) + mix - np.log(2 * np.pi * s2), axis=-1)


def _grid_argmax(y, points=61, levels=8):
    """Coarse-to-fine search of the mixture likelihood over (Re c, Im c, log sigma^2)."""
    half_c = 1.2 * np.max(np.abs(y))
    half_l = math.log(1e3)
    cx, cz, cl = 0.0, 0.0, math.log(np.mean(np.abs(y) ** 2) / 4)
    for _ in range(levels):
        X = np.linspace(cx - half_c, cx + half_c, points)
        Z = np.linspace(cz - half_c, cz + half_c, points)
        S = np.linspace(cl - half_l, cl + half_l, points)
        XX, ZZ, SS = np.meshgrid(X, Z, S, indexing="ij")
        i = np.unravel_index(np.argmax(_bpsk_loglik(y, XX, ZZ, np.exp(SS))), XX.shape)
        cx, cz, cl = X[i[0]], Z[i[1]], S[i[2]]
        step = (2 * half_c / (points - 1), 2 * half_l / (points - 1))
        half_c, half_l = 4 * step[0], 4 * step[1]
    return cx + 1j * cz, math.exp(cl), step


def test_c05_em_fixed_point_matches_grid_search():
    rng = np.random.default_rng(50)
    c = build_constellation("psk", 2)
    basis = time_matrix(4, 1)
    cfg = EmConfig(4, 1, max_iterations=5000, tol=1e-14)
    agree = 0
    for _ in range(100):
        h = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
        noise_var = abs(h) ** 2 / (2 * 10 ** (rng.uniform(0, 20) / 10))
        a = c.points[rng.integers(0, 2, 4)]
        y = h * a + math.sqrt(noise_var) * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        # start on the principal axis of the received cloud
        X = np.stack([y.real, y.imag])
        w, V = np.linalg.eigh(X @ X.T / 4)
        c0 = (V[0, 1] + 1j * V[1, 1]) * math.sqrt(w[1])
        init = WindowState(np.array([[c0]]), float(np.mean(np.abs(y) ** 2) / 2))
        res = em_window(y[None, :], c, basis, init, cfg)
        c_em, s_em = res.state.coeffs[0, 0], res.state.noise_var
        c_grid, s_grid, step = _grid_argmax(y)
        dc = min(abs(c_em - c_grid), abs(c_em + c_grid))  # the likelihood is symmetric in c -> -c
        agree += dc <= 2 * step[0] and abs(math.log(s_em / s_grid)) <= 2 * step[1]
    report(5, "EM fixed point vs likelihood grid search", agree >= 95, f"{agree}/100 instances agree (need >= 95)")


def test_c06_sd_ascent_in_companion_run():
    cfg = ExperimentConfig(**DA_SWEEP, trials=500, estimators=("hybrid-sd",))
    curve = run_sweep(cfg)
    violations = sum(p.ascent_violations for p in curve.points)
    errors = sum(p.errors for p in curve.points)
    report(6, "SD log-likelihood ascent", violations == 0 and errors == 0,
           f"{violations} decreases beyond 1e-8 over {cfg.trials * len(cfg.gammas_db)} runs ({errors} errors)")


HYBRID = dict(constellation="psk:4", N=112, Np=7, n_rx=2, fd_ts=7e-3, trials=500)


def test_c07_hybrid_ihd_near_crlb_and_beats_sd():
    row = table1_config(7e-3)
    cfg = ExperimentConfig(**HYBRID, **row._asdict(), gammas_db=(0, 5, 10, 15, 20, 25),
                           estimators=("hybrid-sd", "hybrid-ihd"))
    curve = run_sweep(cfg)
    ihd = {p.gamma_db: p for p in curve.select("hybrid-ihd")}
    sd = {p.gamma_db: p for p in curve.select("hybrid-sd")}
    ratios = {g: ihd[g].nmse / ihd[g].ncrlb for g in ihd if 10 <= g <= 25}
    near = all(r <= 2 for r in ratios.values())
    better = {g: ihd[g].nmse <= sd[g].nmse for g in ihd if g <= 10}
    detail = ("IHD/NCRLB " + " ".join(f"{g:g}dB:{r:.2f}" for g, r in ratios.items())
              + "; IHD<=SD " + " ".join(f"{g:g}dB:{ihd[g].nmse:.4g}/{sd[g].nmse:.4g}" for g in better))
    report(7, "hybrid-IHD performance", near and all(better.values()), detail)


def test_c08_convergence_speed():
    row = table1_config(7e-3)
    cfg = ExperimentConfig(**HYBRID, **row._asdict(), gammas_db=(20,), estimators=("hybrid-sd",),
                           max_iterations=100)
    outcomes = [r[0] for r in run_trials(cfg, 0)]
    its = np.array([o.iterations for o in outcomes if not o.error])
    med = float(np.median(its))
    report(8, "SD iterations to convergence at 20 dB", med <= 10,
           f"median {med:g} (90th pct {np.percentile(its, 90):g}, cap 100; need <= 10)")


def test_c09_oracle_posteriors_reproduce_da():
    rng = np.random.default_rng(90)
    worst = 0.0
    for _ in range(100):
        nbar = int(rng.choice([7, 14, 28, 56]))
        L = int(rng.integers(1, min(nbar, 5)))
        n_rx = int(rng.integers(1, 5))
        mod = str(rng.choice(["psk:2", "psk:4", "psk:8", "qam:16", "pam:4"]))
        obs, a, idx, _ = fixed_snr_observation(rng, 10 ** rng.uniform(-0.5, 2), 112, n_rx, L, mod)
        kind, order = mod.split(":")
        c = build_constellation(kind, int(order))
        da = estimate_da(obs, pilot_layout(112, 1), a, nbar, L)
        em = run_em(obs, EmConfig(nbar, L, max_iterations=50), init_arbitrary(obs, nbar, L), c, oracle_indices=idx)
        worst = max(worst, float(np.max(np.abs(em.rho - da.rho) / da.rho)), abs(em.noise_var / da.noise_var - 1))
    report(9, "oracle-posterior EM equals completely-DA", worst <= 1e-9, f"max rel diff {worst:.2e} (tol 1e-9)")


def test_c10_doppler_robustness():
    row = table1_config(5e-2)
    cfg = ExperimentConfig(constellation="qam:16", N=112, Np=7, n_rx=2, fd_ts=5e-2, **row._asdict(), trials=500,
                           gammas_db=(10, 15, 20, 25), estimators=("completely-da",))
    pts = run_sweep(cfg).points
    ratios = [p.nmse / p.ncrlb for p in pts]
    report(10, "completely-DA at F_D*T_s = 5e-2, row-4 windows", all(r <= 2 for r in ratios),
           "NMSE/NCRLB " + " ".join(f"{p.gamma_db:g}dB:{r:.1f}" for p, r in zip(pts, ratios)) + " (need <= 2)")
