"""SRS bulk generation, FH uplink transfer under the three multiplexing methods, beam updates.

The transfer engine is symbol-granular but advances in constant-rate spans: within
one slot the residual UL capacity is constant, so the per-bulk rates only change
when a bulk completes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .config import (SYMBOLS_PER_SLOT, ConfigError, SimConfig, SlotType, SrsMode,
                     SrsTransferShape, TddPattern, slot_type_at, srs_opportunity_count)
from .fronthaul import Direction, FhLink


class InfeasibleTransfer(RuntimeError):
    """A transfer shape would exceed the FH uplink capacity."""


@dataclass
class SrsBulk:
    cell_id: int
    ue_id: int
    measured_epoch: int
    bits: int
    arrival_symbol: int
    remaining: int = -1
    delivered_symbol: Optional[int] = None
    abandoned: bool = False
    # runs of (start_symbol, stop_symbol, bits_per_symbol)
    transfer_plan: list = field(default_factory=list)

    def __post_init__(self):
        if self.remaining < 0:
            self.remaining = self.bits

    @property
    def started(self) -> bool:
        return self.remaining < self.bits

    @property
    def transferred(self) -> int:
        return sum((b - a) * r for a, b, r in self.transfer_plan)

    def symbols(self) -> list:
        """Expanded per-symbol plan [(symbol, bits), ...]."""
        return [(s, r) for a, b, r in self.transfer_plan for s in range(a, b)]

    def delay_symbols(self) -> Optional[int]:
        if self.delivered_symbol is None:
            return None
        return self.delivered_symbol - self.arrival_symbol

    def _add(self, start: int, stop: int, rate: int) -> None:
        if stop <= start or rate <= 0:
            return
        if self.transfer_plan and self.transfer_plan[-1][1] == start and self.transfer_plan[-1][2] == rate:
            a, _, r = self.transfer_plan[-1]
            self.transfer_plan[-1] = (a, stop, r)
        else:
            self.transfer_plan.append((start, stop, rate))
        self.remaining -= (stop - start) * rate
        if self.remaining == 0:
            self.delivered_symbol = stop - 1


# --- calendar -------------------------------------------------------------------

class SrsCalendar:
    """Which UE of each cell sounds at each F slot.

    UEs of a cell take opportunities ``offset + k * spacing`` within a period,
    spacing = opportunities // UEs. Cells are staggered by ``offset = cell % spacing``,
    so with spare opportunities not every cell is active at every F slot.
    """

    def __init__(self, pattern: TddPattern, srs_period_ms: float, ue_ids_by_cell: Sequence[Sequence[int]]):
        self.pattern = pattern
        self.opportunities = srs_opportunity_count(pattern, srs_period_ms)
        self.ue_ids_by_cell = [sorted(u) for u in ue_ids_by_cell]
        n_ues = max((len(u) for u in self.ue_ids_by_cell), default=0)
        if n_ues > self.opportunities:
            raise ConfigError(f"{self.opportunities} SRS opportunities per period cannot "
                              f"sound {n_ues} UEs per cell", "srs_period")
        self.spacing = self.opportunities // n_ues if n_ues else 1
        self.f_positions = [i for i, s in enumerate(pattern.slots) if s is SlotType.F]
        self._table = []
        for cell, ues in enumerate(self.ue_ids_by_cell):
            row = [None] * self.opportunities
            offset = cell % self.spacing
            for k, ue in enumerate(ues):
                row[offset + k * self.spacing] = ue
            self._table.append(row)

    def opportunity_index(self, slot_index: int) -> Optional[int]:
        """Index of the F slot within its SRS period, or None for non-F slots."""
        n = len(self.pattern)
        pos = slot_index % n
        if self.pattern.slots[pos] is not SlotType.F:
            return None
        k = (slot_index // n) * len(self.f_positions) + self.f_positions.index(pos)
        return k % self.opportunities

    def sounding(self, slot_index: int) -> list:
        """[(cell_id, ue_id), ...] sounding in this slot."""
        opp = self.opportunity_index(slot_index)
        if opp is None:
            return []
        return [(c, row[opp]) for c, row in enumerate(self._table) if row[opp] is not None]

    def active_count(self, cell_id: int) -> int:
        return sum(1 for x in self._table[cell_id] if x is not None)


def srs_calendar_build(config: SimConfig, ue_ids_by_cell=None) -> SrsCalendar:
    if ue_ids_by_cell is None:
        n = config.ues_per_cell
        ue_ids_by_cell = [list(range(c * n, (c + 1) * n)) for c in range(config.n_cells)]
    return SrsCalendar(config.pattern, config.srs_period, ue_ids_by_cell)


# --- transfer engine ----------------------------------------------------------------

class SrsTransport:
    """Moves pending SRS bulks over the FH uplink ledger.

    mode         sharing rule between cells (fixed / dynamic frequency, time multiplexing)
    shape        Prioritized: no SRS bits in symbols carrying PUSCH;
                 PrioritizedPartial: SRS also uses the residual left by PUSCH
    queue        order of a cell's waiting bulks: "fifo" (oldest first) or "newest"
    """

    def __init__(self, link: FhLink, mode: SrsMode, n_sharing_cells: int,
                 shape: SrsTransferShape = SrsTransferShape.PRIORITIZED,
                 priority: Optional[Sequence[int]] = None, queue: str = "fifo",
                 pusch_symbol: Optional[Callable[[int], bool]] = None):
        if shape is SrsTransferShape.SYMBOL_BY_SYMBOL:
            raise InfeasibleTransfer("symbol-by-symbol transfer is not a shared-link runtime mode")
        if queue not in ("fifo", "newest"):
            raise ValueError(f"unknown queue discipline {queue!r}")
        self.link = link
        self.mode = SrsMode(mode)
        self.n_sharing = n_sharing_cells
        self.shape = SrsTransferShape(shape)
        self.rank = {c: i for i, c in enumerate(priority if priority is not None
                                               else range(n_sharing_cells))}
        self.queue = queue
        self.pusch_symbol = pusch_symbol or (lambda s: False)
        self.pending: list[SrsBulk] = []
        self.next_symbol = 0

    # queue management ----------------------------------------------------------
    def add(self, bulk: SrsBulk) -> Optional[SrsBulk]:
        """Queue a bulk; an unfinished older bulk of the same UE is abandoned and returned."""
        old = None
        for b in self.pending:
            if b.ue_id == bulk.ue_id:
                old = b
                break
        if old is not None:
            old.abandoned = True
            self.pending.remove(old)
        self.pending.append(bulk)
        return old

    def _cell_order(self, bulks):
        started = [b for b in bulks if b.started]
        waiting = [b for b in bulks if not b.started]
        if self.queue == "newest":
            waiting.sort(key=lambda b: (-b.arrival_symbol, b.ue_id))
        else:
            waiting.sort(key=lambda b: (b.arrival_symbol, b.ue_id))
        return started + waiting

    def _groups(self, ready):
        """Per-cell ordered bulk lists, cells in priority order."""
        by_cell: dict[int, list] = {}
        for b in ready:
            by_cell.setdefault(b.cell_id, []).append(b)
        return [self._cell_order(by_cell[c]) for c in sorted(by_cell, key=lambda c: self.rank[c])]

    def _time_order(self, ready):
        started = [b for b in ready if b.started]
        waiting = [b for b in ready if not b.started]
        sign = -1 if self.queue == "newest" else 1
        waiting.sort(key=lambda b: (sign * b.arrival_symbol, self.rank[b.cell_id], b.ue_id))
        return started + waiting

    # rates -----------------------------------------------------------------------------
    def _shares(self, residual: int, groups) -> list:
        if self.mode is SrsMode.DYN_TIME_MUX:
            return []
        n = self.n_sharing if self.mode is SrsMode.FIXED_DELAY else len(groups)
        return [residual // n] * len(groups) if n else []

    def _allocate(self, residual: int, ready, partial: bool) -> dict:
        """Bits per symbol for each bulk. With ``partial`` the capacity left by a
        finishing bulk flows to the next one in line (single-symbol step)."""
        rates: dict[int, int] = {}
        if self.mode is SrsMode.DYN_TIME_MUX:
            left = residual
            for b in self._time_order(ready):
                if left <= 0:
                    break
                take = min(left, b.remaining) if partial else left
                rates[id(b)] = take
                left -= take
                if not partial:
                    break
            return rates
        groups = self._groups(ready)
        for share, group in zip(self._shares(residual, groups), groups):
            left = share
            for b in group:
                if left <= 0:
                    break
                take = min(left, b.remaining) if partial else left
                rates[id(b)] = take
                left -= take
                if not partial:
                    break
        return rates

    def _usable_residual(self, symbol: int) -> int:
        if self.shape is SrsTransferShape.PRIORITIZED and self.pusch_symbol(symbol):
            return 0
        return self.link.residual(Direction.UL, symbol)

    def advance(self, stop_symbol: int) -> list:
        """Transfer over ``[next_symbol, stop_symbol)``; returns bulks completed there.

        The caller must advance slot by slot so that the residual is constant
        within each call.
        """
        done = []
        sym = max(self.next_symbol, 0)
        while sym < stop_symbol:
            ready = [b for b in self.pending if b.arrival_symbol < sym]
            if not ready:
                break
            residual = self._usable_residual(sym)
            if residual <= 0:
                break
            rates = self._allocate(residual, ready, partial=False)
            active = [b for b in ready if rates.get(id(b), 0) > 0]
            if not active:
                break
            span = min(b.remaining // rates[id(b)] for b in active)
            if span >= 1:
                span = min(span, stop_symbol - sym)
                total = sum(rates[id(b)] for b in active)
                ok = self.link.commit_range(Direction.UL, sym, sym + span, total)
                assert ok, "SRS commit exceeded UL residual"
                for b in active:
                    b._add(sym, sym + span, rates[id(b)])
                sym += span
            else:
                rates = self._allocate(residual, ready, partial=True)
                total = sum(rates.values())
                ok = self.link.commit(Direction.UL, sym, total)
                assert ok, "SRS commit exceeded UL residual"
                for b in ready:
                    r = rates.get(id(b), 0)
                    if r:
                        b._add(sym, sym + 1, r)
                sym += 1
            finished = [b for b in self.pending if b.remaining == 0]
            for b in finished:
                self.pending.remove(b)
            done.extend(finished)
        self.next_symbol = stop_symbol
        return done


def _pusch_predicate(pattern: Optional[TddPattern]):
    if pattern is None:
        return None
    return lambda s: slot_type_at(pattern, s // SYMBOLS_PER_SLOT) is SlotType.U


def plan_transfers(bulks: Sequence[SrsBulk], link: FhLink, mode: SrsMode, n_sharing_cells: int,
                   shape: SrsTransferShape = SrsTransferShape.PRIORITIZED,
                   pattern: Optional[TddPattern] = None, priority=None,
                   max_symbols: int = 10_000_000) -> list:
    """Run a batch of bulks to completion on ``link``; returns the bulks with plans."""
    transport = SrsTransport(link, mode, n_sharing_cells, shape, priority,
                             pusch_symbol=_pusch_predicate(pattern))
    for b in bulks:
        transport.add(b)
    start = min((b.arrival_symbol for b in bulks), default=0) + 1
    transport.next_symbol = start
    sym = start
    while transport.pending and sym < start + max_symbols:
        # slot-aligned steps keep the residual constant inside each call
        stop = (sym // SYMBOLS_PER_SLOT + 1) * SYMBOLS_PER_SLOT
        transport.advance(stop)
        sym = stop
    return list(bulks)


def plan_fixed_freq(bulks, link, n_sharing_cells, **kw):
    return plan_transfers(bulks, link, SrsMode.FIXED_DELAY, n_sharing_cells, **kw)


def plan_dyn_freq(bulks, link, n_sharing_cells=None, **kw):
    n = n_sharing_cells if n_sharing_cells is not None else max(
        (b.cell_id for b in bulks), default=0) + 1
    return plan_transfers(bulks, link, SrsMode.DYN_FREQ_MUX, n, **kw)


def plan_dyn_time(bulks, link, n_sharing_cells=None, priority=None, **kw):
    n = n_sharing_cells if n_sharing_cells is not None else max(
        (b.cell_id for b in bulks), default=0) + 1
    return plan_transfers(bulks, link, SrsMode.DYN_TIME_MUX, n, priority=priority, **kw)


@dataclass
class ShapedPlan:
    bulks: list
    peak_bits: int          # largest per-symbol UL load (PUSCH + SRS)
    feasible: bool


def shape_around_pusch(bulks: Sequence[SrsBulk], budget_per_symbol: int, pusch_bits: int,
                       pattern: TddPattern, shape: SrsTransferShape,
                       mode: SrsMode = SrsMode.DYN_TIME_MUX, n_sharing_cells: int = 1) -> ShapedPlan:
    """Plan ``bulks`` around the PUSCH load of U slots under one of the three shapes.

    Symbol-by-symbol puts every SRS bit in the symbol after reception on top of
    PUSCH and reports the resulting peak; the prioritized shapes are planned
    against the ledger and never exceed the budget.
    """
    shape = SrsTransferShape(shape)
    first = min((b.arrival_symbol for b in bulks), default=0)
    pusch_at = _pusch_predicate(pattern)
    if shape is SrsTransferShape.SYMBOL_BY_SYMBOL:
        load: dict[int, int] = {}
        for b in bulks:
            s = b.arrival_symbol + 1
            b._add(s, s + 1, b.remaining)
            load[s] = load.get(s, 0) + b.bits
        peak = max((v + (pusch_bits if pusch_at(s) else 0) for s, v in load.items()), default=0)
        return ShapedPlan(list(bulks), peak, peak <= budget_per_symbol)
    link = FhLink(0, budget_per_symbol)
    horizon_slots = first // SYMBOLS_PER_SLOT + 20_000
    # PUSCH first: it has priority over SRS on the uplink
    pusch = min(pusch_bits, budget_per_symbol)
    if pusch:
        for slot in range(first // SYMBOLS_PER_SLOT, horizon_slots):
            if slot_type_at(pattern, slot) is SlotType.U:
                link.commit_range(Direction.UL, slot * SYMBOLS_PER_SLOT,
                                  (slot + 1) * SYMBOLS_PER_SLOT, pusch)
    predicate = pattern if pusch else None
    plan_transfers(bulks, link, mode, n_sharing_cells, shape=shape, pattern=predicate)
    peak = int(link.committed_array(Direction.UL, horizon_slots * SYMBOLS_PER_SLOT).max())
    return ShapedPlan(list(bulks), peak, True)


# --- beam state -----------------------------------------------------------------------

class BeamStore:
    """Per-UE epoch of the most recently delivered SRS; -1 means none yet."""

    def __init__(self, n_ues: int):
        self.estimate_epoch = np.full(n_ues, -1, dtype=np.int64)

    def get(self, ue_id: int) -> Optional[int]:
        e = int(self.estimate_epoch[ue_id])
        return None if e < 0 else e

    def deliver(self, bulk: SrsBulk) -> int:
        """Apply a delivered bulk; the estimate epoch never decreases."""
        if bulk.delivered_symbol is None:
            raise ValueError("bulk not fully transferred")
        cur = self.estimate_epoch[bulk.ue_id]
        self.estimate_epoch[bulk.ue_id] = max(cur, bulk.measured_epoch)
        return int(self.estimate_epoch[bulk.ue_id])


def effective_slot(delivered_symbol: int) -> int:
    """First slot boundary after the delivery symbol."""
    return delivered_symbol // SYMBOLS_PER_SLOT + 1


SRS_TRACE_HEADER = ["cell", "ue", "arrival_symbol", "delivered_symbol", "delay_ms", "mode",
                    "measured_epoch", "epoch_at_delivery"]


def write_srs_trace(path, records: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SRS_TRACE_HEADER)
        w.writerows(records)
