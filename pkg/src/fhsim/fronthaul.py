"""Shared full-duplex fronthaul link with a per-symbol bit ledger, and FH load formulas."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .config import SYMBOLS_PER_SLOT, SimConfig


class Direction(str, enum.Enum):
    DL = "dl"
    UL = "ul"


class LedgerViolation(AssertionError):
    pass


@dataclass(frozen=True)
class FhLoadQuote:
    bits: int
    fits: bool
    residual: int


class FhLink:
    """Per-(direction, symbol) committed-bit ledger with a fixed per-symbol budget.

    The two directions are independent. A commit either fits entirely or is
    rejected; the ledger never exceeds the budget.
    """

    def __init__(self, budget_per_symbol_dl: int, budget_per_symbol_ul: int, horizon: int = 1024):
        self.budget = {Direction.DL: int(budget_per_symbol_dl),
                       Direction.UL: int(budget_per_symbol_ul)}
        self._ledger = {d: np.zeros(max(1, horizon), dtype=np.int64) for d in Direction}

    @classmethod
    def from_capacity(cls, capacity_dl: float, capacity_ul: float, symbol_duration: float,
                      horizon: int = 1024) -> "FhLink":
        # integer bit budgets; the fractional bit per symbol is never usable
        return cls(math.floor(capacity_dl * symbol_duration + 1e-9),
                   math.floor(capacity_ul * symbol_duration + 1e-9), horizon)

    @classmethod
    def from_config(cls, config: SimConfig) -> "FhLink":
        return cls.from_capacity(config.fh_capacity_dl, config.fh_capacity_ul,
                                 config.symbol_duration,
                                 horizon=(config.n_slots + 8) * SYMBOLS_PER_SLOT)

    def _ensure(self, direction: Direction, stop: int) -> np.ndarray:
        arr = self._ledger[direction]
        if stop > len(arr):
            grown = np.zeros(max(stop, 2 * len(arr)), dtype=np.int64)
            grown[:len(arr)] = arr
            self._ledger[direction] = arr = grown
        return arr

    def committed(self, direction, symbol_index: int) -> int:
        direction = Direction(direction)
        arr = self._ledger[direction]
        return int(arr[symbol_index]) if symbol_index < len(arr) else 0

    def residual(self, direction, symbol_index: int) -> int:
        direction = Direction(direction)
        return self.budget[direction] - self.committed(direction, symbol_index)

    def quote(self, direction, symbol_index: int, bits: int) -> FhLoadQuote:
        res = self.residual(direction, symbol_index)
        return FhLoadQuote(int(bits), bits <= res, res)

    def commit(self, direction, symbol_index: int, bits: int) -> bool:
        return self.commit_range(direction, symbol_index, symbol_index + 1, bits)

    def residual_range(self, direction, start: int, stop: int) -> int:
        """Smallest residual over ``[start, stop)``."""
        direction = Direction(direction)
        arr = self._ensure(direction, stop)
        return self.budget[direction] - int(arr[start:stop].max())

    def commit_range(self, direction, start: int, stop: int, bits_per_symbol: int) -> bool:
        """Commit the same load on every symbol of ``[start, stop)``, all or nothing."""
        direction = Direction(direction)
        if bits_per_symbol < 0:
            raise ValueError("negative load")
        if stop <= start or bits_per_symbol == 0:
            return True
        arr = self._ensure(direction, stop)
        window = arr[start:stop]
        if int(window.max()) + bits_per_symbol > self.budget[direction]:
            return False
        window += bits_per_symbol
        return True

    def commit_profile(self, direction, start: int, bits: np.ndarray) -> bool:
        """Commit a per-symbol load profile starting at ``start``, all or nothing."""
        direction = Direction(direction)
        bits = np.asarray(bits, dtype=np.int64)
        arr = self._ensure(direction, start + len(bits))
        window = arr[start:start + len(bits)]
        if np.any(window + bits > self.budget[direction]) or np.any(bits < 0):
            return False
        window += bits
        return True

    def check(self) -> None:
        for d in Direction:
            peak = int(self._ledger[d].max())
            if peak > self.budget[d]:
                raise LedgerViolation(f"{d.value} ledger {peak} > budget {self.budget[d]}")

    def committed_array(self, direction, n_symbols: int) -> np.ndarray:
        direction = Direction(direction)
        return self._ensure(direction, n_symbols)[:n_symbols].copy()

    def utilization(self, direction, n_symbols: int) -> float:
        if n_symbols <= 0:
            return 0.0
        direction = Direction(direction)
        used = self.committed_array(direction, n_symbols).sum()
        return float(used) / (self.budget[direction] * n_symbols)

    def write_trace(self, path, n_symbols: int) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["symbol_index", "direction", "committed_bits", "budget_bits"])
            for d in Direction:
                arr = self.committed_array(d, n_symbols)
                for i in np.flatnonzero(arr):
                    w.writerow([int(i), d.value, int(arr[i]), self.budget[d]])


def dl_fh_bits_per_symbol(n_rb: int, modulation_order: int, prb_overhead_bits: int = 0) -> int:
    if n_rb <= 0:
        return 0
    return n_rb * (12 * modulation_order + prb_overhead_bits)


def dl_fh_bits(n_rb: int, modulation_order: int, n_data_symbols: int,
               prb_overhead_bits: int = 0) -> int:
    """Modulation-compressed PDSCH load: one modulation order of bits per RE."""
    return n_data_symbols * dl_fh_bits_per_symbol(n_rb, modulation_order, prb_overhead_bits)


def srs_bulk_bits(config: SimConfig) -> int:
    """Uncompressed IQ samples of a one-symbol, full-band SRS over all receive antennas."""
    return config.n_rx_antennas * config.n_subcarriers * 2 * config.iq_bitwidth


def pusch_symbol_bits(config: SimConfig) -> int:
    """Aggregate PUSCH IQ load offered per U-slot symbol by all cells."""
    per_cell = config.pusch_fh_occupancy * config.n_subcarriers * 2 * config.iq_bitwidth
    return int(round(per_cell * config.n_cells))


def peak_fh_throughput(config: SimConfig, max_modulation_order: int = 8,
                       multiplexing_gain: float | None = None) -> float:
    """Dimensioning estimate: every RB of every symbol at the top modulation order."""
    gain = config.multiplexing_gain if multiplexing_gain is None else multiplexing_gain
    symbols_per_second = SYMBOLS_PER_SLOT / config.slot_duration
    return (config.n_cells * config.n_prb * 12 * (1.0 - config.rb_overhead)
            * max_modulation_order * symbols_per_second * gain)
