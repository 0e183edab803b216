"""Round-robin MAC scheduling and FH-aware downlink strategies.

All strategies act on the allocations of every cell for one slot at once and
use the same canonical admission order: ascending cell, retransmissions before
new data, ascending UE.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .config import ConfigError, SimConfig
from .fronthaul import Direction, FhLink, dl_fh_bits_per_symbol
from .phy import McsTable, mcs_from_sinr, tbs as tbs_bits


@dataclass(frozen=True)
class Sizing:
    """Everything needed to turn (n_rb, mcs) into TBS and FH bits for one slot type."""
    table: McsTable
    n_data_symbols: int
    rb_overhead: float = 0.0
    prb_overhead_bits: int = 0

    def tbs(self, mcs: int, n_rb: int) -> int:
        return tbs_bits(mcs, n_rb, self.n_data_symbols, self.rb_overhead, self.table)

    def fh_per_symbol(self, mcs: int, n_rb: int) -> int:
        return dl_fh_bits_per_symbol(n_rb, self.table.modulation_order(mcs), self.prb_overhead_bits)

    def fh_bits(self, mcs: int, n_rb: int) -> int:
        return self.n_data_symbols * self.fh_per_symbol(mcs, n_rb)

    def allocation(self, cell_id, ue_id, slot_index, n_rb, mcs, is_retx=False, harq_pid=-1,
                   tbs: Optional[int] = None) -> "MacAllocation":
        return MacAllocation(cell_id, ue_id, slot_index, n_rb, mcs,
                             self.tbs(mcs, n_rb) if tbs is None else tbs,
                             self.fh_bits(mcs, n_rb), is_retx, harq_pid, self.n_data_symbols)


@dataclass(frozen=True)
class MacAllocation:
    cell_id: int
    ue_id: int
    slot_index: int
    n_rb: int
    mcs: int
    tbs: int
    fh_bits: int
    is_retx: bool = False
    harq_pid: int = -1
    n_data_symbols: int = 13

    @property
    def fh_per_symbol(self) -> int:
        return self.fh_bits // self.n_data_symbols if self.n_data_symbols else 0

    @property
    def order_key(self):
        return (self.cell_id, 0 if self.is_retx else 1, self.ue_id)

    def resized(self, sizing: Sizing, n_rb: Optional[int] = None,
                mcs: Optional[int] = None) -> "MacAllocation":
        n_rb = self.n_rb if n_rb is None else n_rb
        mcs = self.mcs if mcs is None else mcs
        return dataclasses.replace(self, n_rb=n_rb, mcs=mcs, tbs=sizing.tbs(mcs, n_rb),
                                   fh_bits=sizing.fh_bits(mcs, n_rb))


@dataclass
class StrategyOutcome:
    kept: list = field(default_factory=list)
    dropped: list = field(default_factory=list)
    postponed: list = field(default_factory=list)
    shrunk: int = 0   # allocations transmitted with fewer RBs or a lower MCS than offered
    shrunk_keys: set = field(default_factory=set)   # (cell_id, ue_id) of those allocations


def canonical(allocs: Iterable[MacAllocation]) -> list:
    return sorted(allocs, key=lambda a: a.order_key)


# --- round robin -------------------------------------------------------------

@dataclass
class RoundRobinState:
    """Per-cell pointer: the UE after ``last_favored`` gets the next remainder PRB."""
    last_favored: Optional[int] = None


def rb_shares(n_prb: int, ues: Sequence[int], last_favored: Optional[int]):
    """Equal PRB split; remainder PRBs go one each starting after ``last_favored``.

    Returns ({ue: n_rb}, new_last_favored).
    """
    if not ues:
        return {}, last_favored
    ues = sorted(ues)
    base, rem = divmod(n_prb, len(ues))
    shares = {u: base for u in ues}
    start = 0
    if last_favored is not None:
        start = next((i for i, u in enumerate(ues) if u > last_favored), 0)
    favored = last_favored
    for k in range(rem):
        u = ues[(start + k) % len(ues)]
        shares[u] += 1
        favored = u
    return shares, favored


def rb_needed(need_bits: int, mcs: int, max_rb: int, sizing: Sizing) -> int:
    """Smallest RB count (>= 1, <= max_rb) whose TBS covers ``need_bits``."""
    if max_rb <= 0:
        return 0
    lo, hi = 1, max_rb
    while lo < hi:
        mid = (lo + hi) // 2
        if sizing.tbs(mcs, mid) >= need_bits:
            hi = mid
        else:
            lo = mid + 1
    return lo


def rr_schedule(cell_id: int, active_ues: Sequence[int], buffers: dict, sinrs: dict,
                mcs_cap: int, sizing: Sizing, n_prb: int, state: RoundRobinState,
                slot_index: int = 0, retx: Sequence[MacAllocation] = (),
                harq_pids: Optional[dict] = None, overhead_bytes: int = 0) -> list:
    """One cell's round-robin decision for a slot.

    ``retx`` are pre-placed allocations (HARQ retransmissions or carried-over
    decisions) that keep their size; the PRBs left over are split among the
    other active UEs. ``buffers`` maps UE to buffered bytes.
    """
    out = list(retx)
    used = sum(a.n_rb for a in retx)
    busy = {a.ue_id for a in retx}
    new_ues = [u for u in active_ues if u not in busy and buffers.get(u, 0) > 0]
    shares, state.last_favored = rb_shares(max(0, n_prb - used), new_ues, state.last_favored)
    for ue in sorted(shares):
        n_rb = shares[ue]
        if n_rb <= 0:
            continue
        mcs = mcs_from_sinr(sinrs[ue], mcs_cap, sizing.table)
        need = 8 * (buffers[ue] + overhead_bytes)
        n_rb = rb_needed(need, mcs, n_rb, sizing)
        pid = -1 if harq_pids is None else harq_pids.get(ue, -1)
        out.append(sizing.allocation(cell_id, ue, slot_index, n_rb, mcs, False, pid))
    return out


# --- drop / postpone -----------------------------------------------------------

def _admit(allocs: Sequence[MacAllocation], link: FhLink, start_symbol: int):
    kept, rejected = [], []
    for a in allocs:
        if link.commit_range(Direction.DL, start_symbol, start_symbol + a.n_data_symbols,
                             a.fh_per_symbol):
            kept.append(a)
        else:
            rejected.append(a)
    return kept, rejected


def apply_drop(allocs: Sequence[MacAllocation], link: FhLink, start_symbol: int) -> StrategyOutcome:
    """Commit in canonical order; whatever does not fit is lost."""
    kept, rejected = _admit(canonical(allocs), link, start_symbol)
    return StrategyOutcome(kept=kept, dropped=rejected)


def apply_postpone(allocs: Sequence[MacAllocation], link: FhLink, start_symbol: int,
                   carryover: Sequence[MacAllocation] = ()) -> StrategyOutcome:
    """As :func:`apply_drop`, but rejected decisions are kept for the next slot.

    ``carryover`` (last slot's postponed decisions) is offered first.
    """
    offered = canonical(carryover) + canonical(allocs)
    kept, rejected = _admit(offered, link, start_symbol)
    return StrategyOutcome(kept=kept, postponed=rejected)


def mcs_caps(config: SimConfig, table: McsTable, link: Optional[FhLink] = None) -> list:
    """Static per-cell MCS caps.

    Without explicit caps, the cap is the highest MCS whose modulation order lets
    a single cell use the full band within the per-symbol DL budget.
    """
    n = config.n_cells
    caps = config.mcs_caps
    if caps is None:
        link = link or FhLink.from_config(config)
        budget = link.budget[Direction.DL]
        cap = 0
        for m in range(len(table)):
            if dl_fh_bits_per_symbol(config.n_prb, table.modulation_order(m),
                                     config.fh_prb_overhead_bits) <= budget:
                cap = m
        return [cap] * n
    if isinstance(caps, int):
        caps = [caps] * n
    caps = list(caps)
    if len(caps) != n:
        raise ConfigError(f"expected {n} per-cell caps, got {len(caps)}", "mcs_caps")
    for c in caps:
        if not (isinstance(c, int) and 0 <= c <= table.max_mcs):
            raise ConfigError(f"cap {c!r} outside 0..{table.max_mcs}", "mcs_caps")
    return caps


# --- optimized strategies --------------------------------------------------------

def _split_retx(allocs: Sequence[MacAllocation], slot_budget: int):
    """Admit retransmissions in canonical order; return (retx_kept, retx_postponed, left)."""
    kept, postponed, used = [], [], 0
    for a in canonical(x for x in allocs if x.is_retx):
        if used + a.fh_bits <= slot_budget:
            kept.append(a)
            used += a.fh_bits
        else:
            postponed.append(a)
    return kept, postponed, slot_budget - used


def optimize_rb(allocs: Sequence[MacAllocation], slot_budget: int, sizing: Sizing) -> StrategyOutcome:
    """Shrink RBs of the largest FH contributor, one PRB at a time, until the slot fits.

    MCS is held fixed. Ties go to the lowest cell, then lowest UE. Allocations
    shrunk to zero RBs are returned as postponed (their data stays buffered).
    """
    allocs = list(allocs)
    if sum(a.fh_bits for a in allocs) <= slot_budget:
        return StrategyOutcome(kept=canonical(allocs))
    retx_kept, retx_post, left = _split_retx(allocs, slot_budget)
    new = canonical(a for a in allocs if not a.is_retx)
    n_rb = [a.n_rb for a in new]
    step = [sizing.fh_bits(a.mcs, 1) for a in new]
    fh = [a.fh_bits for a in new]
    total = sum(fh)
    # rank by canonical position breaks ties (lower cell, then lower UE)
    heap = [(-fh[i], i) for i in range(len(new)) if n_rb[i] > 0]
    heapq.heapify(heap)
    while total > left and heap:
        _, i = heapq.heappop(heap)
        if heap:
            s_neg, j = heap[0]
            gap = fh[i] + s_neg
            # number of consecutive one-PRB decrements for which i stays on top
            k = -(-gap // step[i]) + (1 if gap % step[i] == 0 and i < j else 0)
            k = max(1, k)
        else:
            k = n_rb[i]
        k = min(k, n_rb[i], max(1, math.ceil((total - left) / step[i])))
        n_rb[i] -= k
        fh[i] -= k * step[i]
        total -= k * step[i]
        if n_rb[i] > 0:
            heapq.heappush(heap, (-fh[i], i))

    out = StrategyOutcome(postponed=retx_post)
    kept = list(retx_kept)
    for a, r in zip(new, n_rb):
        if r <= 0:
            out.postponed.append(a)
        elif r < a.n_rb:
            kept.append(a.resized(sizing, n_rb=r))
            out.shrunk += 1
            out.shrunk_keys.add((a.cell_id, a.ue_id))
        else:
            kept.append(a)
    out.kept = canonical(kept)
    return out


def optimize_mcs(allocs: Sequence[MacAllocation], slot_budget: int, sizing: Sizing) -> StrategyOutcome:
    """Step down the modulation order of the largest FH contributor until the slot fits.

    RBs are held fixed; each step goes to the highest MCS of the next lower
    modulation order. If the floor modulation still does not fit, whole
    allocations are postponed in canonical order.
    """
    allocs = list(allocs)
    if sum(a.fh_bits for a in allocs) <= slot_budget:
        return StrategyOutcome(kept=canonical(allocs))
    table = sizing.table
    retx_kept, retx_post, left = _split_retx(allocs, slot_budget)
    new = canonical(a for a in allocs if not a.is_retx)
    mcs = [a.mcs for a in new]
    fh = [a.fh_bits for a in new]
    total = sum(fh)
    heap = [(-fh[i], i) for i in range(len(new)) if table.lower_modulation_step(mcs[i]) is not None]
    heapq.heapify(heap)
    while total > left and heap:
        _, i = heapq.heappop(heap)
        lower = table.lower_modulation_step(mcs[i])
        mcs[i] = lower
        new_fh = sizing.fh_bits(lower, new[i].n_rb)
        total -= fh[i] - new_fh
        fh[i] = new_fh
        if table.lower_modulation_step(lower) is not None:
            heapq.heappush(heap, (-fh[i], i))

    out = StrategyOutcome(postponed=retx_post)
    kept = list(retx_kept)
    used = sum(a.fh_bits for a in retx_kept)
    for a, m, f in zip(new, mcs, fh):
        if used + f > slot_budget:
            out.postponed.append(a)
            continue
        used += f
        if m != a.mcs:
            kept.append(a.resized(sizing, mcs=m))
            out.shrunk += 1
            out.shrunk_keys.add((a.cell_id, a.ue_id))
        else:
            kept.append(a)
    out.kept = canonical(kept)
    return out
