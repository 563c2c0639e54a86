"""Command-line front end: ``python -m simosnr {sweep,crlb,trace,table1}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error. Errors are
reported on stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .crlb import crlb_da, crlb_via_fim
from .em import run_em
from .errors import ConfigError, SnrError
from .harness import ExperimentConfig, draw_trial, em_setup, run_da, run_sweep, table1_lookup
from .poly_basis import time_matrix
from .signal_model import build_constellation, hard_detect

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def load_config(path) -> ExperimentConfig:
    """Read a flat JSON config. A sweep's JSON output is accepted too (its ``config`` block is used)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in data and "points" in data:
        data = data["config"]
    return ExperimentConfig.from_dict(data)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.estimators:
        changes["estimators"] = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    if args.antennas is not None:
        changes["n_rx"] = args.antennas
    if not changes:
        return cfg
    try:
        return replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = _out_dir(args.out)
    curve = run_sweep(cfg)
    stem = Path(args.config).stem
    curve.write_csv(out / f"{stem}.csv")
    curve.write_json(out / f"{stem}.json")
    failed = [f"{p.estimator}@{p.gamma_db:g}dB" for p in curve.points if p.failed]
    print(json.dumps({"csv": str(out / f"{stem}.csv"), "json": str(out / f"{stem}.json"), "failed_points": failed}))
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


def cmd_crlb(args) -> int:
    if args.n_rx < 1 or args.N < 1:
        raise ConfigError("N and n_rx must be >= 1")
    rhos = _parse_grid(args.rho)
    if any(r < 0 for r in rhos):
        raise ConfigError("rho must be non-negative")
    out = _out_dir(args.out)
    qpsk = build_constellation("psk", 4)
    rng = np.random.default_rng(args.seed or 0)
    a = qpsk.points[rng.integers(0, 4, args.N)]
    h = rng.standard_normal((args.n_rx, args.N)) + 1j * rng.standard_normal((args.n_rx, args.N))
    rows = []
    for rho in rhos:
        closed = crlb_da(rho, args.N, args.n_rx).bound
        # scale the channel so that antenna 0 has SNR rho at unit noise variance
        energy = np.sum(np.abs(h[0]) ** 2) / (2 * args.N)
        fim = crlb_via_fim(h * np.sqrt(rho / energy), a, 1.0, 0).bound
        rows.append((rho, args.N, args.n_rx, closed, fim))
    path = out / "crlb.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("rho", "N", "n_rx", "closed_form", "fim"))
        for r in rows:
            w.writerow([repr(float(r[0])), r[1], r[2], repr(float(r[3])), repr(float(r[4]))])
    print(json.dumps({"csv": str(path), "rows": len(rows)}))
    return EXIT_OK


def single_trace(cfg: ExperimentConfig, gamma_index: int = 0) -> dict:
    """Diagnostic record of one trial: channels, symbols and EM iteration traces."""
    trial = draw_trial(cfg, gamma_index, 0)
    c = trial.constellation

    def cplx(z):
        z = np.asarray(z)
        return {"re": z.real.tolist(), "im": z.imag.tolist()}

    record = {"config": cfg.to_dict(), "gamma_db": cfg.gammas_db[gamma_index],
              "true_snr": trial.true_snr.tolist(), "h": cplx(trial.trace.gains),
              "symbols": cplx(trial.frame.symbols), "estimators": {}}
    basis = time_matrix(cfg.nbar_nda, cfg.L_nda)
    for name in cfg.estimators:
        if name in ("pilot-only-da", "completely-da"):
            est = run_da(name, cfg, trial)
            record["estimators"][name] = {"rho": est.rho.tolist(), "rho_unbiased": est.rho_unbiased.tolist(),
                                          "noise_var": est.noise_var, "h_hat": cplx(est.channel())}
            continue
        em_cfg, init = em_setup(name, cfg, trial)
        est = run_em(trial.obs, em_cfg, init, c)
        h_init = np.concatenate([basis.evaluate(init.coeffs[k]) for k in range(init.K)], axis=1)
        record["estimators"][name] = {
            "rho": est.rho.tolist(), "rho_unbiased": est.rho_unbiased.tolist(), "noise_var": est.noise_var,
            "h_init": cplx(h_init), "h_hat": cplx(est.channel(basis)), "soft_symbols": cplx(est.soft_symbols),
            "hard_symbols": cplx(hard_detect(c, est.soft_symbols)),
            "windows": [{"iterations": w.state.iteration, "converged": w.converged,
                         "noise_var": list(w.state.noise_trace), "loglik": list(w.state.loglik)}
                        for w in est.windows]}
    return record


def cmd_trace(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if cfg.trials != 1:
        raise ConfigError(f"trace needs trials = 1, got {cfg.trials}")
    out = _out_dir(args.out)
    path = out / f"{Path(args.config).stem}_trace.json"
    path.write_text(json.dumps(single_trace(cfg), indent=1))
    print(json.dumps({"json": str(path)}))
    return EXIT_OK


def cmd_table1(args) -> int:
    rows = []
    for fd in _parse_grid(args.fd_ts):
        try:
            cfg, row, note = table1_lookup(fd)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        rows.append({"fd_ts": fd, "row": row, **cfg._asdict(), "note": note})
    print(json.dumps(rows, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simosnr", description="Instantaneous SNR estimation over SIMO fading channels")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="flat JSON experiment config")
        sp.add_argument("--out", default="results", help="output directory")
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--estimators", help="comma-separated estimator names")
        sp.add_argument("--antennas", type=int, help="number of receive antennas")

    common(sub.add_parser("sweep", help="NMSE sweep over the SNR grid"))
    common(sub.add_parser("trace", help="diagnostic trace of a single trial"))
    cr = sub.add_parser("crlb", help="CRLB on an SNR grid by both evaluation paths")
    cr.add_argument("--rho", default="0.1,1,10", help="comma-separated linear SNR values")
    cr.add_argument("--N", type=int, default=112)
    cr.add_argument("--n-rx", type=int, default=2)
    cr.add_argument("--out", default="results")
    cr.add_argument("--seed", type=int)
    t1 = sub.add_parser("table1", help="window configuration for normalized Doppler values")
    t1.add_argument("--fd-ts", required=True, help="comma-separated normalized Doppler values")
    return p


COMMANDS = {"sweep": cmd_sweep, "crlb": cmd_crlb, "trace": cmd_trace, "table1": cmd_table1}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except (SnrError, OSError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
