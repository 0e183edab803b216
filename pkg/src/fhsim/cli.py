"""Command-line front end: ``fhsim run`` and ``fhsim sweep``.

Exit codes: 0 success, 1 run failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import statistics
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, SimConfig, config_from_dict, load_config
from .metrics import percentile, run_dir_name, write_cdf, write_outputs, cdf

log = logging.getLogger("fhsim")

EXIT_OK, EXIT_RUN_FAILURE, EXIT_CONFIG = 0, 1, 2

DL_FLAGS = {"drop": "Drop", "postpone": "Postpone", "mcs-limit": "MCSLimit",
            "rb-opt": "RBOpt", "mcs-opt": "MCSOpt"}
SRS_MODE_FLAGS = {"fixed": "FixedDelay", "dyn-freq": "DynFreqMux", "dyn-time": "DynTimeMux"}
SRS_SHAPE_FLAGS = {"symbol": "SymbolBySymbol", "prioritized": "Prioritized",
                   "partial": "PrioritizedPartial"}


def output_root(cli_value) -> Path:
    return Path(cli_value or os.environ.get("FHSIM_OUT") or "results")


def overrides_from_args(a) -> dict:
    o = {}
    if a.dl_strategy:
        o["dl_strategy"] = DL_FLAGS[a.dl_strategy]
    if a.srs_mode:
        o["srs_mode"] = SRS_MODE_FLAGS[a.srs_mode]
    if a.srs_transfer:
        o["srs_transfer_shape"] = SRS_SHAPE_FLAGS[a.srs_transfer]
    if a.srs_period_ms is not None:
        o["srs_period"] = a.srs_period_ms
    if a.fh_dl_gbps is not None:
        o["fh_capacity_dl"] = a.fh_dl_gbps * 1e9
    if a.fh_ul_gbps is not None:
        o["fh_capacity_ul"] = a.fh_ul_gbps * 1e9
    if a.seed is not None:
        o["seed"] = a.seed
    if getattr(a, "duration_s", None) is not None:
        o["duration"] = a.duration_s
    return o


def build_config(path, overrides: dict) -> SimConfig:
    if path is None:
        return config_from_dict({}, **overrides)
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    return load_config(p, **overrides)


def execute(config: SimConfig, root: Path):
    """Run one simulation and write its run directory; returns (report, run_dir)."""
    from .engine import run
    report = run(config)
    out = write_outputs(report, root / run_dir_name(config.to_dict()))
    return report, out


# --- run ---------------------------------------------------------------------

def cmd_run(a) -> int:
    try:
        config = build_config(a.config, overrides_from_args(a))
    except FileNotFoundError as exc:
        print(f"error: config file not found: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, out = execute(config, output_root(a.out))
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001, any engine failure is a run failure
        print(f"error: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    print(report.summary_line())
    print(f"outputs: {out}")
    return EXIT_OK


# --- sweep -------------------------------------------------------------------

def load_campaign(path) -> dict:
    """Campaign JSON: base config, axes and optional overrides.

    {"base_config": "baseline.json", "dl_strategy": [...], "srs_mode": [...],
     "srs_period": [50, 25], "seeds": [1, 2, 3], "overrides": {...}}
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(str(p))
    try:
        camp = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    known = {"base_config", "dl_strategy", "srs_mode", "srs_period", "seeds", "overrides"}
    unknown = sorted(set(camp) - known)
    if unknown:
        raise ConfigError(f"unknown campaign key(s): {', '.join(unknown)}", unknown[0])
    base = camp.get("base_config")
    if base is not None:
        bp = Path(base)
        camp["base_config"] = str(bp if bp.is_absolute() else p.parent / bp)
    for axis in ("dl_strategy", "srs_mode", "srs_period", "seeds"):
        v = camp.get(axis)
        if v is not None and (not isinstance(v, list) or not v):
            raise ConfigError("must be a non-empty list", axis)
    return camp


def expand(camp: dict, base: SimConfig) -> list:
    """Every axis combination as a list of (combo_key, config)."""
    strategies = camp.get("dl_strategy") or [base.dl_strategy.value]
    modes = camp.get("srs_mode") or [base.srs_mode.value]
    periods = camp.get("srs_period") or [base.srs_period]
    seeds = camp.get("seeds") or [base.seed]
    out = []
    for s, m, per, seed in itertools.product(strategies, modes, periods, seeds):
        cfg = base.replace(dl_strategy=s, srs_mode=m, srs_period=float(per), seed=int(seed))
        out.append(((cfg.dl_strategy.value, cfg.srs_mode.value, cfg.srs_period), cfg))
    return out


def _sweep_job(args):
    cfg, root = args
    try:
        report, out = execute(cfg, root)
    except Exception as exc:  # noqa: BLE001
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}
    return {"ok": True, "run_dir": str(out), "upt": report.upt_mbps,
            "mean": report.mean_upt, "p5": report.p5_upt, "p50": report.p50_upt,
            "p95": report.p95_upt}


def combo_name(key) -> str:
    s, m, per = key
    return f"{s}_{m}_{per:g}ms"


def comparison_rows(results: dict) -> list:
    """Seed-averaged statistics per combination plus gains over Postpone and Drop."""
    rows = []
    for key in sorted(results):
        runs = [r for r in results[key] if r["ok"] and r["upt"]]
        if not runs:
            continue
        row = {"dl_strategy": key[0], "srs_mode": key[1], "srs_period_ms": key[2],
               "n_seeds": len(runs)}
        for stat in ("mean", "p5", "p50", "p95"):
            row[f"{stat}_upt_mbps"] = statistics.fmean(r[stat] for r in runs)
        pooled = [x for r in runs for x in r["upt"]]
        row["pooled_mean_upt_mbps"] = statistics.fmean(pooled)
        row["pooled_p5_upt_mbps"] = percentile(pooled, 0.05)
        row["pooled_p95_upt_mbps"] = percentile(pooled, 0.95)
        rows.append(row)
    ref = {(r["dl_strategy"], r["srs_mode"], r["srs_period_ms"]): r["mean_upt_mbps"] for r in rows}
    for r in rows:
        for base in ("Postpone", "Drop"):
            b = ref.get((base, r["srs_mode"], r["srs_period_ms"]))
            r[f"gain_vs_{base.lower()}"] = r["mean_upt_mbps"] / b if b else ""
    return rows


def cmd_sweep(a) -> int:
    try:
        camp = load_campaign(a.campaign)
        overrides = dict(camp.get("overrides") or {})
        if a.duration_s is not None:
            overrides["duration"] = a.duration_s
        base = build_config(camp.get("base_config"), overrides)
        jobs = expand(camp, base)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: invalid campaign: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    root = output_root(a.out)
    runs_root = root / "runs"
    args = [(cfg, runs_root) for _, cfg in jobs]
    if a.workers > 1:
        with ProcessPoolExecutor(a.workers) as ex:
            outcomes = list(ex.map(_sweep_job, args))
    else:
        outcomes = [_sweep_job(x) for x in args]

    results, manifest = {}, []
    for (key, cfg), res in zip(jobs, outcomes):
        results.setdefault(key, []).append(res)
        entry = {"dl_strategy": key[0], "srs_mode": key[1], "srs_period_ms": key[2],
                 "seed": cfg.seed, "run_dir": run_dir_name(cfg.to_dict()),
                 "status": "ok" if res["ok"] else "failed"}
        if not res["ok"]:
            entry["error"] = res["error"]
            print(f"run failed: {combo_name(key)} seed {cfg.seed}: {res['error']}", file=sys.stderr)
        manifest.append(entry)

    cdf_dir = root / "cdf"
    cdf_dir.mkdir(parents=True, exist_ok=True)
    for key, rs in sorted(results.items()):
        pooled = [x for r in rs if r["ok"] for x in r["upt"]]
        if pooled:
            write_cdf(cdf_dir / f"{combo_name(key)}.csv", cdf(pooled))

    rows = comparison_rows(results)
    if rows:
        with open(root / "comparison.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    failed = sum(1 for m in manifest if m["status"] != "ok")
    with open(root / "manifest.json", "w") as fh:
        json.dump({"campaign": str(a.campaign), "base": base.to_dict(), "runs": manifest,
                   "n_runs": len(manifest), "n_failed": failed}, fh, indent=2, sort_keys=True)

    for r in rows:
        gain = r["gain_vs_postpone"]
        gain_s = f"{gain:.2f}x" if gain != "" else "-"
        print(f"{combo_name((r['dl_strategy'], r['srs_mode'], r['srs_period_ms'])):32} "
              f"mean {r['mean_upt_mbps']:8.2f}  p5 {r['p5_upt_mbps']:7.2f}  "
              f"p95 {r['p95_upt_mbps']:8.2f}  vs Postpone {gain_s}")
    print(f"{len(manifest) - failed}/{len(manifest)} runs ok; outputs in {root}")
    return EXIT_RUN_FAILURE if failed else EXIT_OK


# --- entry point -------------------------------------------------------------

def _add_run_flags(p):
    p.add_argument("--config", help="JSON config file (defaults: built-in baseline scenario)")
    p.add_argument("--dl-strategy", choices=list(DL_FLAGS))
    p.add_argument("--srs-mode", choices=list(SRS_MODE_FLAGS))
    p.add_argument("--srs-transfer", choices=list(SRS_SHAPE_FLAGS))
    p.add_argument("--srs-period-ms", type=float)
    p.add_argument("--fh-dl-gbps", type=float)
    p.add_argument("--fh-ul-gbps", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration-s", type=float)
    p.add_argument("--out", help="output root (default: $FHSIM_OUT or ./results)")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fhsim", description="Shared-fronthaul compression control simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="single simulation run")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)
    p_sw = sub.add_parser("sweep", help="strategy x SRS mode x SRS period x seed campaign")
    p_sw.add_argument("campaign", help="campaign JSON file")
    p_sw.add_argument("--out", help="output root (default: $FHSIM_OUT or ./results)")
    p_sw.add_argument("--workers", type=int, default=1)
    p_sw.add_argument("--duration-s", type=float)
    p_sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse usage errors are configuration errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return a.func(a)


if __name__ == "__main__":
    sys.exit(main())
