"""Link-to-system abstraction: pathloss, antenna gains, SINR, MCS and TB sizing."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

import numpy as np

from .config import SimConfig
from .deployment import Deployment

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True)
class McsTableEntry:
    mcs_index: int
    modulation_order: int
    spectral_efficiency: float


class McsTable:
    """MCS table with SINR thresholds ``10 log10(2^se - 1) + gap``."""

    def __init__(self, entries, sinr_gap: float = 3.0):
        self.entries = tuple(entries)
        if not self.entries:
            raise ValueError("empty MCS table")
        for a, b in zip(self.entries, self.entries[1:]):
            if not (b.spectral_efficiency > a.spectral_efficiency
                    and b.modulation_order >= a.modulation_order):
                raise ValueError(f"MCS table not monotone at index {b.mcs_index}")
        self.sinr_gap = sinr_gap
        self.thresholds = [threshold_db(e.spectral_efficiency, sinr_gap) for e in self.entries]
        self.qm = [e.modulation_order for e in self.entries]
        self.se = [e.spectral_efficiency for e in self.entries]

    def __len__(self):
        return len(self.entries)

    @property
    def max_mcs(self) -> int:
        return len(self.entries) - 1

    @property
    def max_modulation_order(self) -> int:
        return max(self.qm)

    def threshold(self, mcs: int) -> float:
        return self.thresholds[mcs]

    def modulation_order(self, mcs: int) -> int:
        return self.qm[mcs]

    def spectral_efficiency(self, mcs: int) -> float:
        return self.se[mcs]

    def lower_modulation_step(self, mcs: int) -> Optional[int]:
        """Highest MCS whose modulation order is below that of ``mcs``; None at the floor."""
        qm = self.qm[mcs]
        for m in range(mcs - 1, -1, -1):
            if self.qm[m] < qm:
                return m
        return None


def threshold_db(spectral_efficiency: float, sinr_gap: float) -> float:
    return 10.0 * math.log10(2.0 ** spectral_efficiency - 1.0) + sinr_gap


def load_mcs_table(sinr_gap: float = 3.0, path=None) -> McsTable:
    if path is None:
        text = resources.files("fhsim").joinpath("data/mcs_table2.csv").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = csv.DictReader(text.splitlines())
    entries = [McsTableEntry(int(r["mcs_index"]), int(r["modulation_order"]),
                             float(r["spectral_efficiency"])) for r in rows]
    return McsTable(entries, sinr_gap)


@lru_cache(maxsize=8)
def default_mcs_table(sinr_gap: float = 3.0) -> McsTable:
    return load_mcs_table(sinr_gap)


# --- propagation -----------------------------------------------------------

def pathloss_ref_db(config: SimConfig) -> float:
    if config.pathloss_ref_db is not None:
        return config.pathloss_ref_db
    d0 = config.pathloss_ref_distance
    return 20.0 * math.log10(4.0 * math.pi * d0 * config.carrier_freq / SPEED_OF_LIGHT)


def distance_3d(ru_position, ue_position, config: SimConfig):
    ru = np.asarray(ru_position, dtype=float)
    ue = np.asarray(ue_position, dtype=float)
    d2 = np.sum((ru - ue) ** 2, axis=-1)
    return np.sqrt(d2 + (config.ru_height - config.ue_height) ** 2)


def pathloss(ru_position, ue_position, config: SimConfig):
    """Log-distance pathloss in dB, distance clamped below at the reference distance."""
    d = np.maximum(distance_3d(ru_position, ue_position, config), config.pathloss_ref_distance)
    pl = pathloss_ref_db(config) + 10.0 * config.pathloss_exponent * np.log10(
        d / config.pathloss_ref_distance)
    return float(pl) if np.ndim(pl) == 0 else pl


def element_gain_db(off_boresight_deg, config: SimConfig):
    """Horizontal sector element pattern (parabolic main lobe, front-to-back floor)."""
    phi = (np.asarray(off_boresight_deg, dtype=float) + 180.0) % 360.0 - 180.0
    att = np.minimum(12.0 * (phi / config.element_beamwidth) ** 2, config.element_front_back)
    return config.element_gain - att


def noise_power_dbm(config: SimConfig) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(config.bandwidth) + config.noise_figure


def beam_gain(estimate_epoch: Optional[int], fading_epoch: int, config: SimConfig) -> float:
    """Array gain, less the mismatch loss unless the estimate is from the current epoch."""
    if estimate_epoch is not None and estimate_epoch == fading_epoch:
        return config.array_gain
    return config.array_gain - config.mismatch_loss


def fading_epoch(slot_index: int, channel_update_slots: int) -> int:
    return slot_index // channel_update_slots


class LinkBudget:
    """Per-UE static terms of the SINR, computed once per deployment.

    Interference is full-load reuse 1: every non-serving cell radiates with its
    non-beamformed element gain.
    """

    def __init__(self, deployment: Deployment, config: SimConfig):
        self.config = config
        ue_pos = deployment.ue_positions()
        cell_pos = deployment.cell_positions()
        boresight = np.array([c.boresight for c in deployment.cells], dtype=float)
        serving = np.array([u.serving_cell_id for u in deployment.ues], dtype=int)
        n_ue, n_cell = len(ue_pos), len(cell_pos)

        diff = ue_pos[:, None, :] - cell_pos[None, :, :]
        az = np.degrees(np.arctan2(diff[..., 1], diff[..., 0]))
        self.pathloss = pathloss(cell_pos[None, :, :], ue_pos[:, None, :], config).reshape(
            n_ue, n_cell)
        self.element = element_gain_db(az - boresight[None, :], config).reshape(n_ue, n_cell)
        rx = config.tx_power - self.pathloss + self.element        # dBm, no beam gain
        idx = np.arange(n_ue)
        self.serving = serving
        self.serving_rx_dbm = rx[idx, serving]
        mask = np.ones_like(rx, dtype=bool)
        mask[idx, serving] = False
        self.noise_mw = 10.0 ** (noise_power_dbm(config) / 10.0)
        self.interference_mw = np.where(mask, 10.0 ** (rx / 10.0), 0.0).sum(axis=1)
        self.base_sinr_db = self.serving_rx_dbm - 10.0 * np.log10(
            self.noise_mw + self.interference_mw)

    def sinr_db(self, ue_id: int, beam_gain_db: float, realization_db: float = 0.0) -> float:
        return float(self.base_sinr_db[ue_id] + beam_gain_db + realization_db)


def sinr(ue_id: int, deployment: Deployment, config: SimConfig,
         beam_gain_db: float, realization_db: float = 0.0) -> float:
    return LinkBudget(deployment, config).sinr_db(ue_id, beam_gain_db, realization_db)


def mcs_from_sinr(sinr_db: float, mcs_cap: int, table: McsTable) -> int:
    """Highest MCS not above ``mcs_cap`` whose threshold the SINR meets; 0 if none."""
    cap = min(mcs_cap, table.max_mcs)
    m = bisect.bisect_right(table.thresholds, sinr_db) - 1
    return max(0, min(m, cap))


def tbs(mcs: int, n_rb: int, n_data_symbols: int, rb_overhead: float, table: McsTable) -> int:
    if n_rb <= 0:
        return 0
    res = n_rb * 12 * n_data_symbols * (1.0 - rb_overhead)
    return int(math.floor(res * table.spectral_efficiency(mcs) + 1e-9))


def transport_success(sinr_db: float, mcs: int, retx_count: int, config: SimConfig,
                      table: McsTable) -> bool:
    """Deterministic threshold decoding with a fixed combining gain per retransmission."""
    return sinr_db + retx_count * config.harq_gain_db >= table.threshold(mcs)
