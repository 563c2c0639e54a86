"""Run every sweep config in configs/ and print an NMSE/NCRLB table per estimator.

    python3 scripts/run_sweeps.py [--out results] [--trials 100] [configs/high_doppler.json ...]
"""

import argparse
import sys
from pathlib import Path

from simosnr.cli import load_config
from simosnr.harness import run_sweep

ROOT = Path(__file__).resolve().parent.parent


def table(curve) -> str:
    lines = [f"{'estimator':<20}" + "".join(f"{g:>9g}" for g in curve.config.gammas_db) + "   (NMSE / NCRLB per dB)"]
    for name in curve.config.estimators:
        ratio = curve.column(name, "nmse") / curve.column(name, "ncrlb")
        lines.append(f"{name:<20}" + "".join(f"{r:9.2f}" for r in ratio))
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--trials", type=int, help="override the trial count of every config")
    args = ap.parse_args(argv)
    paths = args.configs or sorted(p for p in (ROOT / "configs").glob("*.json") if p.stem != "trace")
    args.out.mkdir(parents=True, exist_ok=True)
    for path in paths:
        cfg = load_config(path)
        if args.trials:
            cfg = type(cfg).from_dict({**cfg.to_dict(), "trials": args.trials})
        curve = run_sweep(cfg)
        curve.write_csv(args.out / f"{path.stem}.csv")
        curve.write_json(args.out / f"{path.stem}.json")
        print(f"== {path.stem} ({cfg.trials} trials; {'; '.join(curve.notes)})")
        print(table(curve))
        failed = [f"{p.estimator}@{p.gamma_db:g}dB" for p in curve.points if p.failed]
        if failed:
            print("failed points:", ", ".join(failed))
    return 0


if __name__ == "__main__":
    sys.exit(main())
