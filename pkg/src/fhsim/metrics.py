"""UPT statistics, empirical CDFs and run-directory outputs."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .fronthaul import Direction
from .traffic import upt


def cdf(values: Sequence[float]) -> list:
    """Empirical CDF as [(value, i/n), ...] over sorted values."""
    if len(values) == 0:
        raise ValueError("cdf of an empty sample")
    xs = sorted(values)
    n = len(xs)
    return [(x, (i + 1) / n) for i, x in enumerate(xs)]


def percentile(values: Sequence[float], p: float) -> float:
    """Nearest-rank percentile, ``p`` in [0, 1]."""
    if len(values) == 0:
        raise ValueError("percentile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    xs = sorted(values)
    rank = max(1, math.ceil(p * len(xs) - 1e-12))
    return xs[rank - 1]


FILE_HEADER = ["file_id", "ue_id", "cell_id", "arrival_time", "completion_time",
               "bytes_delivered", "bytes_lost", "upt_mbps"]


@dataclass
class MetricsReport:
    config: dict
    files: list = field(default_factory=list)        # rows matching FILE_HEADER
    upt_mbps: list = field(default_factory=list)
    mean_upt: float = float("nan")
    p5_upt: float = float("nan")
    p50_upt: float = float("nan")
    p95_upt: float = float("nan")
    cdf: list = field(default_factory=list)
    fh_utilization_dl: float = 0.0
    fh_utilization_ul: float = 0.0
    counters: dict = field(default_factory=dict)
    srs_delays_ms: list = field(default_factory=list)
    n_files: int = 0
    n_completed: int = 0
    n_pending: int = 0
    n_excluded: int = 0
    srs_records: list = field(default_factory=list)
    sched_rows: Optional[list] = None
    fh_trace: Optional[dict] = None

    def summary(self) -> dict:
        d = {
            "mean_upt_mbps": self.mean_upt, "p5_upt_mbps": self.p5_upt,
            "p50_upt_mbps": self.p50_upt, "p95_upt_mbps": self.p95_upt,
            "fh_util_dl": self.fh_utilization_dl, "fh_util_ul": self.fh_utilization_ul,
            "n_files": self.n_files, "n_completed": self.n_completed,
            "n_pending": self.n_pending, "n_excluded": self.n_excluded,
            "srs_mean_delay_ms": statistics.fmean(self.srs_delays_ms) if self.srs_delays_ms
            else float("nan"),
        }
        d.update(self.counters)
        return d

    def fingerprint(self) -> str:
        """Hash of every reported number, for byte-identity comparisons."""
        payload = json.dumps({"files": self.files, "summary": self.summary()},
                             sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()

    def summary_line(self) -> str:
        return (f"mean {self.mean_upt:.2f} Mbps | p5 {self.p5_upt:.2f} | p95 {self.p95_upt:.2f} | "
                f"FH util DL {self.fh_utilization_dl:.3f} UL {self.fh_utilization_ul:.3f} | "
                f"files {self.n_completed}/{self.n_files}")


def build_report(sim) -> MetricsReport:
    report = MetricsReport(config=sim.config.to_dict())
    rows, values = [], []
    n_excluded = 0
    for fid in sorted(sim.traffic.files):
        f = sim.traffic.files[fid]
        u = upt(f)
        if f.completion_time is not None and u is None:
            n_excluded += 1
        mbps = None if u is None else u / 1e6
        rows.append([f.file_id, f.ue_id, f.cell_id, f.arrival_time, f.completion_time,
                     f.bytes_delivered, f.bytes_lost, mbps])
        if mbps is not None:
            values.append(mbps)
    report.files = rows
    report.upt_mbps = values
    report.n_files = len(rows)
    report.n_completed = sum(1 for r in rows if r[4] is not None)
    report.n_pending = report.n_files - report.n_completed
    report.n_excluded = n_excluded
    if values:
        report.mean_upt = statistics.fmean(values)
        report.p5_upt = percentile(values, 0.05)
        report.p50_upt = percentile(values, 0.50)
        report.p95_upt = percentile(values, 0.95)
        report.cdf = cdf(values)
    report.fh_utilization_dl = sim.link.utilization(Direction.DL, sim.n_symbols)
    report.fh_utilization_ul = sim.link.utilization(Direction.UL, sim.n_symbols)
    report.counters = dict(vars(sim.counters))
    report.srs_records = sim.srs_records
    report.srs_delays_ms = [r[4] for r in sim.srs_records]
    report.sched_rows = sim.sched_rows
    if sim.config.fh_trace:
        report.fh_trace = {d.value: sim.link.committed_array(d, sim.n_symbols) for d in Direction}
        report.fh_trace["budget"] = dict((d.value, sim.link.budget[d]) for d in Direction)
    return report


def config_hash(config: dict) -> str:
    body = {k: v for k, v in config.items() if k != "seed"}
    return hashlib.sha1(json.dumps(body, sort_keys=True, default=str).encode()).hexdigest()[:10]


def run_dir_name(config: dict) -> str:
    return f"{config_hash(config)}_seed{config['seed']}"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_outputs(report: MetricsReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as fh:
        json.dump(report.config, fh, indent=2, sort_keys=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        s = report.summary()
        w.writerow(list(s))
        w.writerow([_fmt(v) for v in s.values()])
    with open(out / "files.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FILE_HEADER)
        for r in report.files:
            w.writerow([_fmt(v) for v in r])
    write_cdf(out / "cdf.csv", report.cdf)
    from .srs import write_srs_trace
    write_srs_trace(out / "srs_trace.csv", report.srs_records)
    if report.sched_rows is not None:
        with open(out / "sched_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slot", "cell", "ue", "n_rb", "mcs", "tbs", "fh_bits", "outcome"])
            w.writerows(report.sched_rows)
    if report.fh_trace is not None:
        with open(out / "fh_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["symbol_index", "direction", "committed_bits", "budget_bits"])
            for d in ("dl", "ul"):
                arr = report.fh_trace[d]
                budget = report.fh_trace["budget"][d]
                for i, v in enumerate(arr):
                    if v:
                        w.writerow([i, d, int(v), budget])
    return out


def write_cdf(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["upt_mbps", "probability"])
        for x, p in points:
            w.writerow([repr(x), repr(p)])
