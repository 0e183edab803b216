import json

import pytest
from hypothesis import given, strategies as st

from fhsim.config import (ConfigError, DlStrategy, SimConfig, SlotType, SrsMode, load_config,
                          config_from_dict, parse_tdd_pattern, slot_type_at, srs_opportunity_count)
from fhsim.deployment import build_deployment


def test_parse_pattern_baseline_value():
    p = parse_tdd_pattern("D D D F U")
    assert [s.value for s in p.slots] == ["D", "D", "D", "F", "U"]
    assert p.slot_duration_ms == 0.5


def test_parse_pattern_single_and_bracketed():
    assert parse_tdd_pattern("D").slots == (SlotType.D,)
    assert parse_tdd_pattern("[D D D F U]") == parse_tdd_pattern("D D D F U")


def test_parse_pattern_rejects_unknown_token():
    with pytest.raises(ConfigError, match="unknown slot type X"):
        parse_tdd_pattern("D D X U")


def test_slot_type_at_examples():
    p = parse_tdd_pattern("D D D F U")
    assert slot_type_at(p, 3) is SlotType.F
    assert slot_type_at(p, 4) is SlotType.U
    assert slot_type_at(p, 5) is SlotType.D


@given(st.text(alphabet="DFU", min_size=1, max_size=12), st.integers(0, 10_000))
def test_slot_type_is_cyclic(pattern, i):
    p = parse_tdd_pattern(" ".join(pattern))
    assert slot_type_at(p, i) == slot_type_at(p, i + len(p))


def test_srs_opportunities():
    p = parse_tdd_pattern("D D D F U")
    assert srs_opportunity_count(p, 50) == 20
    assert srs_opportunity_count(p, 25) == 10
    assert srs_opportunity_count(parse_tdd_pattern("D D U U U"), 50) == 0


@given(st.integers(1, 40))
def test_srs_opportunities_linear_in_period(k):
    p = parse_tdd_pattern("D D D F U")
    assert srs_opportunity_count(p, 2 * 2.5 * k) == 2 * srs_opportunity_count(p, 2.5 * k)


def test_period_must_be_pattern_multiple():
    with pytest.raises(ConfigError):
        srs_opportunity_count(parse_tdd_pattern("D D D F U"), 26)


def test_defaults_match_scenario(baseline_config):
    c = baseline_config
    assert (c.n_cells, c.n_ues) == (9, 90)
    assert c.inter_site_distance == 200 and c.tx_power == 30 and c.carrier_freq == 2e9
    assert c.bandwidth == 100e6 and c.numerology == 1 and c.rb_overhead == 0.04
    assert c.fh_capacity_dl == c.fh_capacity_ul == 0.5e9
    assert c.file_size == 50_000 and c.file_rate == 50 and c.duration == 10
    assert c.channel_update_slots == 80


@pytest.mark.parametrize("field,value", [
    ("n_sites", 0), ("fh_capacity_ul", 0), ("rb_overhead", 1.5), ("pusch_fh_occupancy", -0.1),
    ("tdd_pattern", "D Q"), ("dl_strategy", "Fastest"), ("srs_period", 27.0),
])
def test_invalid_values_name_the_field(field, value):
    with pytest.raises(ConfigError) as e:
        SimConfig(**{field: value})
    assert e.value.field == field


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="fh_capcity_dl"):
        config_from_dict({"fh_capcity_dl": 1e9})


def test_enum_coercion_accepts_names_and_values():
    assert SimConfig(dl_strategy="rbopt").dl_strategy is DlStrategy.RB_OPT
    assert SimConfig(dl_strategy="MCS_OPT").dl_strategy is DlStrategy.MCS_OPT
    assert SimConfig(srs_mode="DynFreqMux").srs_mode is SrsMode.DYN_FREQ_MUX


def test_load_config_roundtrip_and_override(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(SimConfig(seed=3).to_dict()))
    assert load_config(path) == SimConfig(seed=3)
    assert load_config(path, seed=7).seed == 7


def test_deployment_shape_and_determinism(baseline_config):
    d1 = build_deployment(baseline_config)
    d2 = build_deployment(baseline_config)
    assert len(d1.cells) == 9 and len(d1.ues) == 90
    assert (d1.ue_positions() == d2.ue_positions()).all()
    for cell in d1.cells:
        assert len(d1.ues_of(cell.cell_id)) == 10
    assert sorted({c.boresight for c in d1.cells}) == [0.0, 120.0, 240.0]


def test_minimal_deployment():
    d = build_deployment(SimConfig(n_sites=1, cells_per_site=1, ues_per_cell=1))
    assert len(d.cells) == 1 and len(d.ues) == 1


@given(st.integers(0, 2**31 - 1))
def test_ues_inside_their_sector(seed):
    import numpy as np
    c = SimConfig(seed=seed)
    d = build_deployment(c)
    radius = c.inter_site_distance / np.sqrt(3)
    for u in d.ues:
        cell = d.cells[u.serving_cell_id]
        v = np.asarray(u.position) - np.asarray(cell.position)
        r = np.hypot(*v)
        assert c.min_ue_distance - 1e-9 <= r <= radius + 1e-9
        off = (np.degrees(np.arctan2(v[1], v[0])) - cell.boresight + 180) % 360 - 180
        assert abs(off) <= 60 + 1e-9
