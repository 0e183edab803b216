import statistics

import pytest
from hypothesis import given, settings, strategies as st

from fhsim.config import DlStrategy, SimConfig, SrsMode, SrsTransferShape
from fhsim.engine import Simulation, run
from fhsim.srs import InfeasibleTransfer


def in_harq(sim, file_id):
    return sum(n for procs in sim.harq for p in procs if p is not None
               for fid, n in p.segments if fid == file_id)


def test_duration_zero(small_config):
    r = run(small_config.replace(duration=0.0))
    assert r.n_files == 0 and r.upt_mbps == [] and r.cdf == []


def test_deterministic(small_config):
    assert run(small_config).fingerprint() == run(small_config).fingerprint()


def test_seed_changes_outcome(small_config):
    assert run(small_config).fingerprint() != run(small_config.replace(seed=2)).fingerprint()


@settings(max_examples=8)
@given(st.sampled_from(list(DlStrategy)), st.sampled_from(list(SrsMode)),
       st.sampled_from([0.05e9, 0.2e9, 0.5e9]), st.integers(1, 50))
def test_byte_conservation(strategy, mode, cap, seed):
    cfg = SimConfig(n_sites=1, ues_per_cell=4, srs_period=25.0,
                    dl_strategy=strategy, srs_mode=mode, fh_capacity_dl=cap,
                    seed=seed, duration=0.1, file_rate=200.0)
    sim = Simulation(cfg)
    report = sim.run()
    for f in sim.traffic.files.values():
        held = sim.traffic.bytes_in_buffer(f.file_id) + in_harq(sim, f.file_id)
        assert f.bytes_delivered + f.bytes_lost + held == f.size
        assert f.bytes_delivered + f.bytes_lost <= f.size
        if f.done:
            assert f.completion_time > f.arrival_time or f.bytes_delivered == 0
    if report.upt_mbps:
        assert report.mean_upt == statistics.fmean(report.upt_mbps)


def test_postpone_never_loses_to_fronthaul(small_config):
    r = run(small_config.replace(dl_strategy=DlStrategy.POSTPONE, fh_capacity_dl=0.1e9,
                                 file_rate=200.0))
    assert r.counters["postponed"] > 0
    assert r.counters["bytes_lost_fh"] == 0


def test_drop_counts_fronthaul_losses_only_without_harq(small_config):
    cfg = small_config.replace(dl_strategy=DlStrategy.DROP, fh_capacity_dl=0.1e9,
                               file_rate=200.0, drop_triggers_harq=False)
    r = run(cfg)
    assert r.counters["dropped"] > 0 and r.counters["bytes_lost_fh"] > 0


def test_mean_matches_file_records(small_config):
    r = run(small_config)
    vals = [row[-1] for row in r.files if row[-1] is not None]
    assert r.mean_upt == statistics.fmean(vals)
    assert r.p5_upt <= r.p50_upt <= r.p95_upt


def test_unconstrained_fronthaul_equalizes_strategies(small_config):
    base = small_config.replace(fh_capacity_dl=1e12, fh_capacity_ul=1e12)
    prints = {s: run(base.replace(dl_strategy=s)).files for s in DlStrategy}
    first = prints[DlStrategy.DROP]
    assert all(v == first for v in prints.values())


def test_symbol_by_symbol_runtime_aborts(small_config):
    with pytest.raises(InfeasibleTransfer):
        run(small_config.replace(srs_transfer_shape=SrsTransferShape.SYMBOL_BY_SYMBOL))


def test_ledger_never_over_budget(small_config):
    cfg = small_config.replace(fh_trace=True, fh_capacity_dl=0.2e9, fh_capacity_ul=0.2e9)
    r = run(cfg)
    for d in ("dl", "ul"):
        assert (r.fh_trace[d] <= r.fh_trace["budget"][d]).all()


def test_srs_deliveries_reported(small_config):
    r = run(small_config.replace(duration=0.5))
    assert r.counters["srs_generated"] > 0
    assert all(d > 0 for d in r.srs_delays_ms)


def test_sched_trace_tags(small_config):
    r = run(small_config.replace(sched_trace=True, dl_strategy=DlStrategy.RB_OPT,
                                 fh_capacity_dl=0.1e9, file_rate=200.0))
    tags = {row[-1] for row in r.sched_rows}
    assert "shrunk" in tags and tags <= {"kept", "dropped", "postponed", "shrunk"}
    assert sum(row[-1] == "shrunk" for row in r.sched_rows) == r.counters["shrunk"]
