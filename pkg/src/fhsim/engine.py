"""Slot-stepped discrete-event simulation of the shared-FH multi-cell network."""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import (SYMBOLS_PER_SLOT, DlStrategy, SimConfig, SlotType, SrsTransferShape,
                     slot_type_at)
from .deployment import (STREAM_FADING, STREAM_TRAFFIC, build_deployment, stream_rng)
from .fronthaul import Direction, FhLink, pusch_symbol_bits, srs_bulk_bits
from .metrics import MetricsReport, build_report
from .phy import LinkBudget, beam_gain, default_mcs_table, mcs_from_sinr, transport_success
from .scheduler import (RoundRobinState, Sizing, StrategyOutcome, apply_drop, apply_postpone,
                        canonical, mcs_caps, optimize_mcs, optimize_rb, rr_schedule)
from .srs import (BeamStore, InfeasibleTransfer, SrsBulk, SrsTransport, effective_slot,
                  srs_calendar_build)
from .traffic import TrafficState, generate_arrivals

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    pass


@dataclass
class HarqProcess:
    pid: int
    segments: list
    n_rb: int
    mcs: int
    tbs: int
    retx: int = 0
    ready_slot: int = 0


@dataclass
class Counters:
    kept: int = 0
    dropped: int = 0
    postponed: int = 0
    shrunk: int = 0
    harq_failures: int = 0
    harq_exhausted: int = 0
    bytes_lost_fh: int = 0
    bytes_lost_harq: int = 0
    srs_generated: int = 0
    srs_delivered: int = 0
    srs_abandoned: int = 0


class Simulation:
    def __init__(self, config: SimConfig):
        self.config = config
        c = config
        self.table = default_mcs_table(c.sinr_gap)
        self.deployment = build_deployment(c)
        self.budget = LinkBudget(self.deployment, c)
        self.pattern = c.pattern
        self.n_slots = c.n_slots
        self.n_symbols = self.n_slots * SYMBOLS_PER_SLOT
        self.link = FhLink.from_config(c)
        self.epoch_slots = c.channel_update_slots

        n_ues = c.n_ues
        self.serving = self.budget.serving
        self.ues_by_cell = [self.deployment.ues_of(cell) for cell in range(c.n_cells)]

        rng_f = stream_rng(c.seed, STREAM_FADING)
        n_epochs = self.n_slots // self.epoch_slots + 2
        self.realization = rng_f.normal(0.0, c.realization_std, size=(n_epochs, n_ues))

        self.traffic = TrafficState(n_ues)
        arrivals = generate_arrivals(c.file_rate, c.duration, n_ues, stream_rng(c.seed, STREAM_TRAFFIC)) \
            if c.duration > 0 else []
        self.arrivals = arrivals
        self._next_arrival = 0

        self.beams = BeamStore(n_ues)
        self._beam_updates: dict[int, list] = {}
        self.calendar = srs_calendar_build(c, self.ues_by_cell)
        self.srs_bits = srs_bulk_bits(c)
        self.pusch_bits = pusch_symbol_bits(c)
        self.symbol_by_symbol = c.srs_transfer_shape is SrsTransferShape.SYMBOL_BY_SYMBOL
        self.transport = None
        if not self.symbol_by_symbol:
            self.transport = SrsTransport(
                self.link, c.srs_mode, c.n_cells, c.srs_transfer_shape, c.srs_priority,
                queue=c.srs_queue,
                pusch_symbol=lambda s: self.pusch_bits > 0 and slot_type_at(
                    self.pattern, s // SYMBOLS_PER_SLOT) is SlotType.U)
        self.srs_records: list = []

        self.harq = [[None] * c.harq_processes for _ in range(n_ues)]
        self.rr = [RoundRobinState() for _ in range(c.n_cells)]
        strategy = c.dl_strategy
        self.caps = mcs_caps(c, self.table, self.link) if strategy is DlStrategy.MCS_LIMIT \
            else [self.table.max_mcs] * c.n_cells
        self.carryover: list = []
        self.counters = Counters()
        self.sched_rows: list = [] if c.sched_trace else None

        self.sizing = {
            SlotType.D: Sizing(self.table, SYMBOLS_PER_SLOT - c.control_symbols, c.rb_overhead,
                               c.fh_prb_overhead_bits),
            SlotType.F: Sizing(self.table, SYMBOLS_PER_SLOT - 1, c.rb_overhead,
                               c.fh_prb_overhead_bits),
        }
        self.data_start = {SlotType.D: c.control_symbols, SlotType.F: 0}

    # --- helpers ------------------------------------------------------------------
    def sinr(self, ue: int, slot: int) -> float:
        epoch = slot // self.epoch_slots
        g = beam_gain(self.beams.get(ue), epoch, self.config)
        return float(self.budget.base_sinr_db[ue] + g + self.realization[epoch, ue])

    def _free_pid(self, ue: int) -> int:
        procs = self.harq[ue]
        for pid, p in enumerate(procs):
            if p is None:
                return pid
        return -1

    # --- main loop --------------------------------------------------------------
    def run(self) -> MetricsReport:
        slot_dur = self.config.slot_duration
        for slot in range(self.n_slots):
            self._arrivals(slot * slot_dur)
            for ue, epoch in self._beam_updates.pop(slot, ()):
                self.beams.estimate_epoch[ue] = max(self.beams.estimate_epoch[ue], epoch)
            stype = slot_type_at(self.pattern, slot)
            self._uplink(slot, stype)
            if stype is not SlotType.U:
                self._downlink(slot, stype)
            if stype is SlotType.F:
                self._srs_arrivals(slot)
        self.link.check()
        return build_report(self)

    def _arrivals(self, now: float) -> None:
        arr = self.arrivals
        size = self.config.file_size
        while self._next_arrival < len(arr) and arr[self._next_arrival][0] <= now:
            t, ue = arr[self._next_arrival]
            self.traffic.add_file(self._next_arrival, ue, size, t, int(self.serving[ue]))
            self._next_arrival += 1

    def _uplink(self, slot: int, stype: SlotType) -> None:
        s0 = slot * SYMBOLS_PER_SLOT
        if stype is SlotType.U and self.pusch_bits > 0:
            load = min(self.pusch_bits, self.link.residual_range(Direction.UL, s0, s0 + SYMBOLS_PER_SLOT))
            self.link.commit_range(Direction.UL, s0, s0 + SYMBOLS_PER_SLOT, load)
        if self.transport is None:
            return
        for bulk in self.transport.advance(s0 + SYMBOLS_PER_SLOT):
            self._delivered(bulk)

    def _delivered(self, bulk: SrsBulk) -> None:
        eff = effective_slot(bulk.delivered_symbol)
        self._beam_updates.setdefault(eff, []).append((bulk.ue_id, bulk.measured_epoch))
        self.counters.srs_delivered += 1
        delay_ms = bulk.delay_symbols() * self.config.symbol_duration * 1e3
        self.srs_records.append((bulk.cell_id, bulk.ue_id, bulk.arrival_symbol,
                                 bulk.delivered_symbol, delay_ms, self.config.srs_mode.value,
                                 bulk.measured_epoch, eff // self.epoch_slots))

    def _srs_arrivals(self, slot: int) -> None:
        epoch = slot // self.epoch_slots
        arrival = slot * SYMBOLS_PER_SLOT + SYMBOLS_PER_SLOT - 1
        bulks = [SrsBulk(cell, ue, epoch, self.srs_bits, arrival)
                 for cell, ue in self.calendar.sounding(slot)]
        self.counters.srs_generated += len(bulks)
        if self.symbol_by_symbol:
            self._symbol_by_symbol(bulks, arrival + 1)
            return
        for b in bulks:
            if self.transport.add(b) is not None:
                self.counters.srs_abandoned += 1

    def _symbol_by_symbol(self, bulks, symbol: int) -> None:
        if not bulks or symbol >= self.n_symbols:
            return
        pusch = self.pusch_bits if slot_type_at(
            self.pattern, symbol // SYMBOLS_PER_SLOT) is SlotType.U else 0
        need = pusch + sum(b.bits for b in bulks)
        budget = self.link.budget[Direction.UL]
        if need > budget:
            raise InfeasibleTransfer(
                f"symbol-by-symbol SRS needs {need} bits in symbol {symbol}, "
                f"UL budget is {budget} bits per symbol")
        self.link.commit(Direction.UL, symbol, sum(b.bits for b in bulks))
        for b in bulks:
            b._add(symbol, symbol + 1, b.bits)
            self._delivered(b)

    # --- downlink ----------------------------------------------------------------
    def _downlink(self, slot: int, stype: SlotType) -> None:
        c = self.config
        sizing = self.sizing[stype]
        buffers = self.traffic.buffers
        carried = {}
        for a in self.carryover:
            carried.setdefault(a.cell_id, []).append(a)
        candidates = []
        any_work = bool(self.carryover)
        for cell in range(c.n_cells):
            pre = []
            for ue in self.ues_by_cell[cell]:
                for pid, p in enumerate(self.harq[ue]):
                    if p is not None and p.ready_slot <= slot and p.ready_slot >= 0:
                        pre.append(sizing.allocation(cell, ue, slot, p.n_rb, p.mcs, True, pid,
                                                     tbs=p.tbs))
                        break   # one retransmission per UE per slot
            used = sum(a.n_rb for a in pre)
            for a in carried.get(cell, ()):
                if a.ue_id not in {p.ue_id for p in pre} and used + a.n_rb <= c.n_prb:
                    pre.append(a)
                    used += a.n_rb
            busy = {a.ue_id for a in pre}
            active, pids, sinrs = [], {}, {}
            for ue in self.ues_by_cell[cell]:
                if ue in busy or buffers[ue].occupancy <= 0:
                    continue
                pid = self._free_pid(ue)
                if pid < 0:
                    continue
                active.append(ue)
                pids[ue] = pid
                sinrs[ue] = self.sinr(ue, slot)
            if not pre and not active:
                continue
            any_work = True
            occ = {ue: buffers[ue].occupancy for ue in active}
            candidates.extend(rr_schedule(cell, active, occ, sinrs, self.caps[cell], sizing,
                                          c.n_prb, self.rr[cell], slot, pre, pids,
                                          c.ip_overhead_bytes))
        if not any_work or not candidates:
            self.carryover = []
            return
        carried_ids = {id(a) for a in self.carryover}
        fresh = [a for a in candidates if id(a) not in carried_ids]
        old = [a for a in candidates if id(a) in carried_ids]
        self.carryover = []
        s0 = slot * SYMBOLS_PER_SLOT + self.data_start[stype]
        outcome = self._apply_strategy(fresh, old, s0, sizing)
        self._transmit(slot, outcome, sizing)

    def _apply_strategy(self, fresh, carried, s0, sizing) -> StrategyOutcome:
        strategy = self.config.dl_strategy
        link = self.link
        if strategy is DlStrategy.DROP:
            return apply_drop(carried + fresh, link, s0)
        if strategy in (DlStrategy.POSTPONE, DlStrategy.MCS_LIMIT):
            return apply_postpone(fresh, link, s0, carried)
        slot_budget = link.residual_range(Direction.DL, s0, s0 + sizing.n_data_symbols) \
            * sizing.n_data_symbols
        opt = optimize_rb if strategy is DlStrategy.RB_OPT else optimize_mcs
        out = opt(carried + fresh, slot_budget, sizing)
        for a in out.kept:
            ok = link.commit_range(Direction.DL, s0, s0 + a.n_data_symbols, a.fh_per_symbol)
            if not ok:
                raise SimulationError("optimized schedule exceeded the DL FH budget")
        return out

    def _transmit(self, slot: int, out: StrategyOutcome, sizing: Sizing) -> None:
        c = self.config
        cnt = self.counters
        t_end = (slot + 1) * c.slot_duration
        buffers = self.traffic.buffers
        cnt.kept += len(out.kept)
        cnt.shrunk += out.shrunk
        cnt.dropped += len(out.dropped)
        cnt.postponed += len(out.postponed)

        for a in out.kept:
            if a.is_retx:
                proc = self.harq[a.ue_id][a.harq_pid]
            else:
                payload = max(0, a.tbs // 8 - c.ip_overhead_bytes)
                segs = buffers[a.ue_id].pop(payload)
                proc = HarqProcess(a.harq_pid, segs, a.n_rb, a.mcs, a.tbs)
                self.harq[a.ue_id][a.harq_pid] = proc
            if transport_success(self.sinr(a.ue_id, slot), a.mcs, proc.retx, c, self.table):
                self.traffic.on_tb_outcome(proc.segments, True, t_end)
                self.harq[a.ue_id][a.harq_pid] = None
            else:
                cnt.harq_failures += 1
                proc.retx += 1
                if proc.retx > c.max_harq_retx:
                    self._lose(a, proc, t_end, fh=False)
                else:
                    proc.ready_slot = slot + c.harq_feedback_delay

        for a in out.dropped:
            if a.is_retx:
                proc = self.harq[a.ue_id][a.harq_pid]
            else:
                segs = buffers[a.ue_id].pop(max(0, a.tbs // 8 - c.ip_overhead_bytes))
                proc = HarqProcess(a.harq_pid, segs, a.n_rb, a.mcs, a.tbs)
                self.harq[a.ue_id][a.harq_pid] = proc
            if not c.drop_triggers_harq:
                self._lose(a, proc, t_end, fh=True)
                continue
            # MAC is unaware of a high-PHY drop: the UE decodes nothing and NACKs
            proc.retx += 1
            if proc.retx > c.max_harq_retx:
                self._lose(a, proc, t_end, fh=True)
            else:
                proc.ready_slot = slot + c.harq_feedback_delay

        self._carry(out)
        if self.sched_rows is not None:
            self._trace(slot, out)

    def _lose(self, a, proc: HarqProcess, t_end: float, fh: bool) -> None:
        """Charge a transport block's bytes as lost and free its HARQ process."""
        lost = sum(n for _, n in proc.segments)
        if fh:
            self.counters.bytes_lost_fh += lost
        else:
            self.counters.harq_exhausted += 1
            self.counters.bytes_lost_harq += lost
        self.traffic.on_tb_outcome(proc.segments, False, t_end)
        self.harq[a.ue_id][a.harq_pid] = None

    def _carry(self, out: StrategyOutcome) -> None:
        c = self.config
        if c.dl_strategy in (DlStrategy.POSTPONE, DlStrategy.MCS_LIMIT):
            per_symbol_budget = self.link.budget[Direction.DL]
            # retransmissions stay pending in HARQ; decisions that cannot fit even an
            # empty slot are released so the UE is rescheduled from its buffer
            self.carryover = [a for a in out.postponed
                              if not a.is_retx and a.fh_per_symbol <= per_symbol_budget]

    def _trace(self, slot: int, out: StrategyOutcome) -> None:
        for tag, allocs in (("kept", out.kept), ("dropped", out.dropped),
                            ("postponed", out.postponed)):
            for a in allocs:
                if tag == "kept" and (a.cell_id, a.ue_id) in out.shrunk_keys:
                    tag_a = "shrunk"
                else:
                    tag_a = tag
                self.sched_rows.append((slot, a.cell_id, a.ue_id, a.n_rb, a.mcs, a.tbs,
                                        a.fh_bits, tag_a))


def run(config: SimConfig) -> MetricsReport:
    return Simulation(config).run()
