import numpy as np
import pytest
from hypothesis import given, strategies as st

from fhsim.config import SimConfig
from fhsim.fronthaul import (Direction, FhLink, dl_fh_bits, peak_fh_throughput, pusch_symbol_bits,
                             srs_bulk_bits)

DL, UL = Direction.DL, Direction.UL


def test_budget_is_integer_floor_of_capacity_times_symbol(baseline_config):
    link = FhLink.from_config(baseline_config)
    # 0.5e9 * 0.5e-3 / 14 = 17857.14...
    assert link.budget[DL] == link.budget[UL] == 17857


def test_dl_fh_bits_examples():
    # 100 RB x 12 sc x 12 symbols x 8 bits = 115,200 bits; QPSK is a quarter of that
    assert dl_fh_bits(100, 8, 12) == 115_200
    assert dl_fh_bits(100, 2, 12) == 28_800
    assert dl_fh_bits(0, 8, 12) == 0
    assert dl_fh_bits(1, 8, 1, prb_overhead_bits=5) == 12 * 8 + 5


@given(st.integers(0, 273), st.sampled_from([2, 4, 6, 8]), st.sampled_from([2, 4, 6, 8]),
       st.integers(1, 14))
def test_dl_fh_bits_monotone_in_modulation(n_rb, q1, q2, n_sym):
    lo, hi = sorted((q1, q2))
    assert dl_fh_bits(n_rb, lo, n_sym) <= dl_fh_bits(n_rb, hi, n_sym)


def test_srs_bulk_examples():
    assert srs_bulk_bits(SimConfig()) == 1_048_320
    one = SimConfig(n_rx_antennas=1, n_prb=1, iq_bitwidth=8)
    assert srs_bulk_bits(one) == 192
    assert srs_bulk_bits(SimConfig(iq_bitwidth=32)) == 2 * 1_048_320


def test_pusch_load_is_full_band_iq_per_cell():
    c = SimConfig()
    assert pusch_symbol_bits(c) == 9 * 3276 * 2 * 16
    assert pusch_symbol_bits(c.replace(pusch_fh_occupancy=0.0)) == 0


def test_peak_fh_throughput_oracle(baseline_config):
    # hand evaluation: 9 * 273 * 12 * 0.96 * 8 * 28000 * 0.5
    assert peak_fh_throughput(baseline_config) == pytest.approx(3.1701e9, rel=1e-4)
    assert abs(peak_fh_throughput(baseline_config) / 3.6e9 - 1) <= 0.15
    assert peak_fh_throughput(baseline_config, multiplexing_gain=1.0) == pytest.approx(
        2 * peak_fh_throughput(baseline_config))


@given(st.integers(1, 5), st.floats(0.1, 1.0))
def test_peak_linear_in_cells_and_gain(n_sites, gain):
    c1 = SimConfig(n_sites=1)
    cn = SimConfig(n_sites=n_sites)
    assert peak_fh_throughput(cn, multiplexing_gain=gain) == pytest.approx(
        n_sites * peak_fh_throughput(c1, multiplexing_gain=gain))
    assert peak_fh_throughput(c1, multiplexing_gain=gain) == pytest.approx(
        gain * peak_fh_throughput(c1, multiplexing_gain=1.0))


def test_quote_boundaries():
    link = FhLink(1000, 1000)
    q = link.quote(DL, 5, 1000)
    assert q.fits and q.residual == 1000
    assert not link.quote(DL, 5, 1001).fits
    assert link.commit(DL, 5, 500)
    q = link.quote(DL, 5, 500)
    assert q.fits and q.residual == 500


def test_commit_rejects_whole_and_directions_are_independent():
    link = FhLink(1000, 1000)
    assert link.commit(DL, 0, 1000)
    assert not link.commit(DL, 0, 1)
    assert link.committed(DL, 0) == 1000
    assert link.commit(UL, 0, 1000)
    assert link.commit(DL, 1, 500) and link.commit(DL, 1, 500)


def test_commit_range_is_all_or_nothing():
    link = FhLink(100, 100)
    link.commit(DL, 3, 60)
    assert not link.commit_range(DL, 0, 5, 50)
    assert link.committed_array(DL, 5).tolist() == [0, 0, 0, 60, 0]
    assert link.residual_range(DL, 0, 5) == 40


@given(st.lists(st.tuples(st.sampled_from([DL, UL]), st.integers(0, 50), st.integers(0, 50),
                          st.integers(0, 1200)), max_size=60))
def test_ledger_safety_under_any_sequence(ops):
    link = FhLink(1000, 700, horizon=8)
    for d, a, length, bits in ops:
        link.commit_range(d, a, a + length, bits)
    link.check()
    for d in (DL, UL):
        assert link.committed_array(d, 120).max() <= link.budget[d]


def test_ledger_grows_beyond_horizon():
    link = FhLink(10, 10, horizon=2)
    assert link.commit(UL, 500, 10)
    assert link.committed(UL, 500) == 10 and link.residual(UL, 10_000) == 10


def test_utilization_and_trace(tmp_path):
    link = FhLink(100, 100)
    link.commit_range(DL, 0, 2, 50)
    assert link.utilization(DL, 4) == pytest.approx(0.25)
    link.write_trace(tmp_path / "t.csv", 4)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "symbol_index,direction,committed_bits,budget_bits"
    assert lines[1:] == ["0,dl,50,100", "1,dl,50,100"]
