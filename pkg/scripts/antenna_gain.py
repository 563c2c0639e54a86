"""Sign test of the receive-diversity gain: NMSE with four antennas against two.

    python3 scripts/antenna_gain.py [--trials 1000]
"""

import argparse
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from simosnr.cli import load_config
from simosnr.harness import run_sweep

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int)
    args = ap.parse_args(argv)
    curves = {}
    for n in (2, 4):
        cfg = load_config(CONFIGS / f"antennas_{n}.json")
        if args.trials:
            cfg = type(cfg).from_dict({**cfg.to_dict(), "trials": args.trials})
        curves[n] = run_sweep(cfg)
    for name in curves[2].config.estimators:
        two, four = curves[2].column(name, "nmse"), curves[4].column(name, "nmse")
        wins = int(np.sum(four < two))
        p = stats.binomtest(wins, two.size, 0.5, alternative="greater").pvalue
        print(f"{name:<16} 4-antenna wins {wins}/{two.size} (one-sided sign test p = {p:.3g})")
        for g, a, b in zip(curves[2].config.gammas_db, two, four):
            print(f"    {g:5g} dB  N_r=2 {a:.4g}  N_r=4 {b:.4g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
