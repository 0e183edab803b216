"""Hexagonal multi-site deployment with three-sector sites and sector UE drops."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig

# independent RNG streams derived from the master seed
STREAM_DEPLOYMENT = 1
STREAM_TRAFFIC = 2
STREAM_FADING = 3


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


@dataclass(frozen=True)
class Cell:
    cell_id: int
    site_id: int
    position: tuple[float, float]
    boresight: float  # degrees


@dataclass(frozen=True)
class Ue:
    ue_id: int
    position: tuple[float, float]
    serving_cell_id: int


@dataclass(frozen=True)
class Deployment:
    cells: tuple[Cell, ...]
    ues: tuple[Ue, ...]

    def ue_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.ues], dtype=float).reshape(-1, 2)

    def cell_positions(self) -> np.ndarray:
        return np.array([c.position for c in self.cells], dtype=float).reshape(-1, 2)

    def ues_of(self, cell_id: int) -> list[int]:
        return [u.ue_id for u in self.ues if u.serving_cell_id == cell_id]


def hex_site_positions(n_sites: int, isd: float) -> list[tuple[float, float]]:
    """First ``n_sites`` points of a hexagonal lattice, nearest the origin first.

    Ties are broken by azimuth, so three sites form an equilateral triangle.
    """
    reach = int(math.ceil(math.sqrt(n_sites))) + 1
    pts = []
    for a in range(-reach, reach + 1):
        for b in range(-reach, reach + 1):
            x = isd * (a + 0.5 * b)
            y = isd * (math.sqrt(3) / 2 * b)
            ang = math.atan2(y, x) % (2 * math.pi)
            pts.append((round(math.hypot(x, y), 9), round(ang, 9), x, y))
    pts.sort()
    return [(x, y) for _, _, x, y in pts[:n_sites]]


def build_deployment(config: SimConfig, rng: np.random.Generator | None = None) -> Deployment:
    if rng is None:
        rng = stream_rng(config.seed, STREAM_DEPLOYMENT)
    radius = config.cell_radius or config.inter_site_distance / math.sqrt(3)
    r_min = min(config.min_ue_distance, radius)
    sector_width = 360.0 / config.cells_per_site

    cells = []
    for site_id, pos in enumerate(hex_site_positions(config.n_sites, config.inter_site_distance)):
        for k in range(config.cells_per_site):
            cells.append(Cell(len(cells), site_id, (float(pos[0]), float(pos[1])), k * sector_width))

    ues = []
    for cell in cells:
        n = config.ues_per_cell
        # uniform in area over the annular sector
        r = np.sqrt(rng.uniform(r_min ** 2, radius ** 2, size=n))
        phi = np.radians(cell.boresight + rng.uniform(-sector_width / 2, sector_width / 2, size=n))
        for i in range(n):
            x = cell.position[0] + r[i] * math.cos(phi[i])
            y = cell.position[1] + r[i] * math.sin(phi[i])
            ues.append(Ue(len(ues), (float(x), float(y)), cell.cell_id))
    return Deployment(tuple(cells), tuple(ues))
