"""Strategy x SRS-mode x SRS-config campaign over several seeds.

Writes one summary row per run to <out>/campaign.csv and prints the
seed-averaged table. Usage:

    python3 scripts/campaign.py --seeds 1 2 3 4 5 --duration 10 --out results/campaign
"""

import argparse
import csv
import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from fhsim import SimConfig, load_config, run

STRATEGIES = ["Drop", "Postpone", "RBOpt", "MCSOpt"]
MODES = ["FixedDelay", "DynFreqMux", "DynTimeMux"]
PERIODS = {"config1": 50.0, "config2": 25.0}


def one(args):
    base, strategy, mode, cfg_name, seed, duration = args
    cfg = base.replace(dl_strategy=strategy, srs_mode=mode, srs_period=PERIODS[cfg_name],
                       seed=seed, duration=duration)
    t0 = time.time()
    r = run(cfg)
    return {"strategy": strategy, "srs_mode": mode, "srs_config": cfg_name, "seed": seed,
            "mean_upt": r.mean_upt, "p5_upt": r.p5_upt, "p50_upt": r.p50_upt, "p95_upt": r.p95_upt,
            "n_files": r.n_files, "n_completed": r.n_completed,
            "srs_delivered": r.counters["srs_delivered"], "srs_generated": r.counters["srs_generated"],
            "wall_s": round(time.time() - t0, 2)}


def aggregate(rows):
    """Seed-mean of each metric per (config, strategy, mode)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["srs_config"], r["strategy"], r["srs_mode"]), []).append(r)
    out = {}
    for k, rs in groups.items():
        out[k] = {m: float(np.mean([x[m] for x in rs])) for m in ("mean_upt", "p5_upt", "p95_upt")}
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--duration", type=float, default=10.0)
    ap.add_argument("--strategies", nargs="+", default=STRATEGIES)
    ap.add_argument("--modes", nargs="+", default=MODES)
    ap.add_argument("--configs", nargs="+", default=list(PERIODS))
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default="results/campaign")
    ap.add_argument("--set", nargs="*", default=[], metavar="KEY=VALUE",
                    help="extra config overrides, values parsed as float when possible")
    a = ap.parse_args(argv)

    base = load_config(a.config) if a.config else SimConfig()
    extra = {}
    for kv in a.set:
        k, v = kv.split("=", 1)
        try:
            extra[k] = float(v) if "." in v else int(v)
        except ValueError:
            extra[k] = v
    if extra:
        base = base.replace(**extra)

    jobs = [(base, s, m, c, seed, a.duration)
            for c, s, m, seed in itertools.product(a.configs, a.strategies, a.modes, a.seeds)]
    if a.workers > 1:
        with ProcessPoolExecutor(a.workers) as ex:
            rows = list(ex.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]

    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "campaign.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)

    agg = aggregate(rows)
    print(f"{'config':8} {'strategy':9} {'mode':11} {'mean':>8} {'p5':>8} {'p95':>8}")
    for (c, s, m), v in sorted(agg.items()):
        print(f"{c:8} {s:9} {m:11} {v['mean_upt']:8.2f} {v['p5_upt']:8.2f} {v['p95_upt']:8.2f}")


if __name__ == "__main__":
    main()
