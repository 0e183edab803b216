"""Sweep mismatch_loss and report the two quantities it trades off.

A stale beam costs ``mismatch_loss`` dB of SINR. Larger values widen the
SRS-mode spread under RBOpt but also depress RBOpt against Postpone, so the
chosen value is the one that keeps the spread inside 2%..41% while the
RBOpt/Postpone ratio stays as high as possible.

    python3 scripts/calibrate_mismatch.py --values 6 7 8 --seeds 1 2 3 4 5
"""

import argparse
import itertools
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from fhsim import SimConfig, run

MODES = ["FixedDelay", "DynFreqMux", "DynTimeMux"]
PERIODS = {"config1": 50.0, "config2": 25.0}


def one(args):
    loss, strategy, mode, period, seed, duration = args
    cfg = SimConfig(mismatch_loss=loss, dl_strategy=strategy, srs_mode=mode, srs_period=period,
                    seed=seed, duration=duration)
    return args, run(cfg).mean_upt


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--values", type=float, nargs="+", default=[6.0, 7.0, 8.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--duration", type=float, default=10.0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    a = ap.parse_args(argv)

    jobs = [(v, s, m, p, seed, a.duration)
            for v, (s, m), p, seed in itertools.product(
                a.values, [("RBOpt", m) for m in MODES] + [("Postpone", "DynTimeMux")],
                PERIODS.values(), a.seeds)]
    with ProcessPoolExecutor(a.workers) as ex:
        res = list(ex.map(one, jobs))
    mean = {}
    for (v, s, m, p, _, _), u in res:
        mean.setdefault((v, s, m, p), []).append(u)
    mean = {k: float(np.mean(x)) for k, x in mean.items()}

    print(f"{'loss':>5} {'config':8} {'spread %':>9} {'RBOpt/Postpone':>15}")
    for v in a.values:
        for name, p in PERIODS.items():
            rb = [mean[(v, "RBOpt", m, p)] for m in MODES]
            spread = 100 * (max(rb) / min(rb) - 1)
            ratio = mean[(v, "RBOpt", "DynTimeMux", p)] / mean[(v, "Postpone", "DynTimeMux", p)]
            print(f"{v:5.1f} {name:8} {spread:9.2f} {ratio:15.2f}")


if __name__ == "__main__":
    main()
