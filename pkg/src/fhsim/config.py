"""Simulation configuration, TDD frame structure and JSON loading."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

SYMBOLS_PER_SLOT = 14


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DlStrategy(str, enum.Enum):
    DROP = "Drop"
    POSTPONE = "Postpone"
    MCS_LIMIT = "MCSLimit"
    RB_OPT = "RBOpt"
    MCS_OPT = "MCSOpt"


class SrsMode(str, enum.Enum):
    FIXED_DELAY = "FixedDelay"
    DYN_FREQ_MUX = "DynFreqMux"
    DYN_TIME_MUX = "DynTimeMux"


class SrsTransferShape(str, enum.Enum):
    SYMBOL_BY_SYMBOL = "SymbolBySymbol"
    PRIORITIZED = "Prioritized"
    PRIORITIZED_PARTIAL = "PrioritizedPartial"


class SlotType(str, enum.Enum):
    D = "D"
    F = "F"
    U = "U"


@dataclass(frozen=True)
class TddPattern:
    slots: tuple[SlotType, ...]
    numerology: int = 1
    symbols_per_slot: int = SYMBOLS_PER_SLOT

    @property
    def slot_duration_ms(self) -> float:
        return 1.0 / (2 ** self.numerology)

    @property
    def duration_ms(self) -> float:
        return len(self.slots) * self.slot_duration_ms

    def __len__(self) -> int:
        return len(self.slots)


def parse_tdd_pattern(text: str, numerology: int = 1) -> TddPattern:
    """Parse ``"D D D F U"`` / ``"[D D D F U]"`` / ``"DDDFU"`` into a pattern."""
    body = text.strip().strip("[]")
    tokens = [t for t in re.split(r"[\s,]+", body) if t]
    # compact form "DDDFU"
    if len(tokens) == 1 and len(tokens[0]) > 1:
        tokens = list(tokens[0])
    if not tokens:
        raise ConfigError("empty TDD pattern", "tdd_pattern")
    slots = []
    for tok in tokens:
        try:
            slots.append(SlotType(tok.upper()))
        except ValueError:
            raise ConfigError(f"unknown slot type {tok}", "tdd_pattern") from None
    return TddPattern(tuple(slots), numerology)


def slot_type_at(pattern: TddPattern, slot_index: int) -> SlotType:
    return pattern.slots[slot_index % len(pattern.slots)]


def period_in_slots(pattern: TddPattern, period_ms: float, name: str = "srs_period") -> int:
    """Convert a period to slots, requiring a whole number of pattern repetitions."""
    n_slots = period_ms / pattern.slot_duration_ms
    n_int = round(n_slots)
    if n_int <= 0 or not math.isclose(n_slots, n_int, abs_tol=1e-9) or n_int % len(pattern):
        raise ConfigError(
            f"{period_ms} ms is not a multiple of the {pattern.duration_ms} ms TDD pattern", name)
    return n_int


def srs_opportunity_count(pattern: TddPattern, srs_period_ms: float) -> int:
    """Number of F slots (SRS opportunities) inside one SRS period."""
    n_slots = period_in_slots(pattern, srs_period_ms)
    per_pattern = sum(1 for s in pattern.slots if s is SlotType.F)
    return per_pattern * (n_slots // len(pattern))


@dataclass
class SimConfig:
    # deployment
    n_sites: int = 3
    cells_per_site: int = 3
    ues_per_cell: int = 10
    inter_site_distance: float = 200.0
    ru_height: float = 10.0
    ue_height: float = 1.5
    min_ue_distance: float = 10.0
    cell_radius: Optional[float] = None          # None -> ISD / sqrt(3)
    # radio
    tx_power: float = 30.0                       # dBm
    carrier_freq: float = 2e9
    bandwidth: float = 100e6
    numerology: int = 1
    n_prb: int = 273
    rb_overhead: float = 0.04
    noise_figure: float = 7.0
    pathloss_ref_db: Optional[float] = None      # None -> free space at ref distance
    pathloss_ref_distance: float = 1.0
    pathloss_exponent: float = 3.0
    element_gain: float = 8.0
    element_beamwidth: float = 65.0
    element_front_back: float = 30.0
    array_gain: float = 10.0
    mismatch_loss: float = 7.0                   # dB, calibrated (scripts/calibrate_mismatch.py)
    realization_std: float = 4.0
    channel_update_period: float = 40.0          # ms
    sinr_gap: float = 3.0
    # HARQ
    harq_processes: int = 20
    max_harq_retx: int = 4
    harq_gain_db: float = 3.0
    harq_feedback_delay: int = 4                 # slots
    drop_triggers_harq: bool = True              # a high-PHY drop looks like a NACK to MAC
    # frame
    tdd_pattern: str = "D D D F U"
    control_symbols: int = 1
    srs_period: float = 50.0                     # ms
    # fronthaul
    fh_capacity_dl: float = 0.5e9
    fh_capacity_ul: float = 0.5e9
    fh_prb_overhead_bits: int = 0                # per PRB per data symbol
    iq_bitwidth: int = 16
    n_rx_antennas: int = 10
    pusch_fh_occupancy: float = 1.0
    multiplexing_gain: float = 0.5
    # strategies
    dl_strategy: DlStrategy = DlStrategy.RB_OPT
    mcs_caps: Any = None                         # int, per-cell list, or None -> derived
    srs_mode: SrsMode = SrsMode.DYN_TIME_MUX
    srs_transfer_shape: SrsTransferShape = SrsTransferShape.PRIORITIZED
    srs_queue: str = "newest"                    # order of a cell's waiting bulks: fifo | newest
    srs_priority: Optional[list] = None          # cell order for time multiplexing
    # traffic
    file_size: int = 50_000
    file_rate: float = 50.0
    ip_overhead_bytes: int = 0                   # per transport block
    duration: float = 10.0
    seed: int = 1
    # outputs
    fh_trace: bool = False
    sched_trace: bool = False

    def __post_init__(self):
        self.dl_strategy = _coerce_enum(DlStrategy, self.dl_strategy, "dl_strategy")
        self.srs_mode = _coerce_enum(SrsMode, self.srs_mode, "srs_mode")
        self.srs_transfer_shape = _coerce_enum(
            SrsTransferShape, self.srs_transfer_shape, "srs_transfer_shape")
        self.validate()

    # derived quantities -------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.n_sites * self.cells_per_site

    @property
    def n_ues(self) -> int:
        return self.n_cells * self.ues_per_cell

    @property
    def pattern(self) -> TddPattern:
        return parse_tdd_pattern(self.tdd_pattern, self.numerology)

    @property
    def slot_duration(self) -> float:
        """Seconds."""
        return 1e-3 / (2 ** self.numerology)

    @property
    def symbol_duration(self) -> float:
        return self.slot_duration / SYMBOLS_PER_SLOT

    @property
    def n_subcarriers(self) -> int:
        return self.n_prb * 12

    @property
    def n_slots(self) -> int:
        return int(math.floor(self.duration / self.slot_duration + 1e-9))

    @property
    def srs_period_slots(self) -> int:
        return period_in_slots(self.pattern, self.srs_period)

    @property
    def channel_update_slots(self) -> int:
        n = self.channel_update_period * 1e-3 / self.slot_duration
        if n < 1 or not math.isclose(n, round(n), abs_tol=1e-9):
            raise ConfigError("must be a whole number of slots", "channel_update_period")
        return int(round(n))

    def validate(self) -> None:
        for name in ("n_sites", "cells_per_site", "ues_per_cell", "n_prb", "harq_processes",
                     "iq_bitwidth", "n_rx_antennas"):
            if int(getattr(self, name)) < 1:
                raise ConfigError("must be >= 1", name)
        for name in ("fh_capacity_dl", "fh_capacity_ul", "inter_site_distance", "bandwidth",
                     "carrier_freq", "file_rate", "file_size", "channel_update_period",
                     "pathloss_ref_distance", "multiplexing_gain"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", name)
        for name in ("rb_overhead", "pusch_fh_occupancy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError("must be in [0, 1]", name)
        if self.duration < 0:
            raise ConfigError("must be >= 0", "duration")
        if self.srs_queue not in ("fifo", "newest"):
            raise ConfigError(f"unknown queue discipline {self.srs_queue!r}", "srs_queue")
        if self.max_harq_retx < 0:
            raise ConfigError("must be >= 0", "max_harq_retx")
        if not 0 <= self.control_symbols < SYMBOLS_PER_SLOT - 1:
            raise ConfigError("out of range", "control_symbols")
        if self.numerology not in range(0, 5):
            raise ConfigError("must be in 0..4", "numerology")
        self.pattern  # raises on bad tokens
        self.srs_period_slots
        self.channel_update_slots
        if self.srs_priority is not None and sorted(self.srs_priority) != list(range(self.n_cells)):
            raise ConfigError("must be a permutation of cell ids", "srs_priority")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, enum.Enum) else v
        return out


def _coerce_enum(kind, value, name):
    if isinstance(value, kind):
        return value
    for member in kind:
        if str(value).lower() in (member.value.lower(), member.name.lower()):
            return member
    raise ConfigError(f"unknown value {value!r}; expected one of "
                      f"{[m.value for m in kind]}", name)


CONFIG_FIELDS = frozenset(f.name for f in dataclasses.fields(SimConfig))


def config_from_dict(data: dict, **overrides) -> SimConfig:
    unknown = sorted(set(data) - CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}", unknown[0])
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return SimConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> SimConfig:
    path = Path(path)
    with path.open() as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data, **overrides)
