"""FTP Model 1 downlink traffic, RLC UM buffering and per-file accounting."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class FileTransfer:
    file_id: int
    ue_id: int
    size: int
    arrival_time: float
    cell_id: int = -1
    bytes_delivered: int = 0
    bytes_lost: int = 0
    completion_time: Optional[float] = None

    @property
    def done(self) -> bool:
        return self.completion_time is not None


def generate_arrivals(rate: float, duration: float, n_ues: int, rng: np.random.Generator):
    """Poisson file arrivals over ``[0, duration)``, each to a uniformly drawn UE."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    times = []
    t = rng.exponential(1.0 / rate)
    while t < duration:
        times.append(t)
        t += rng.exponential(1.0 / rate)
    ues = rng.integers(0, n_ues, size=len(times))
    return [(float(t), int(u)) for t, u in zip(times, ues)]


class RlcBuffer:
    """FIFO of (file_id, remaining_bytes) for one UE."""

    def __init__(self):
        self._q: deque = deque()
        self.occupancy = 0

    def __len__(self):
        return len(self._q)

    def push(self, file_id: int, n_bytes: int) -> None:
        if n_bytes > 0:
            self._q.append([file_id, n_bytes])
            self.occupancy += n_bytes

    def pop(self, n_bytes: int) -> list:
        """Remove up to ``n_bytes`` in FIFO order; returns [(file_id, bytes), ...]."""
        out = []
        while n_bytes > 0 and self._q:
            head = self._q[0]
            take = min(n_bytes, head[1])
            out.append((head[0], take))
            head[1] -= take
            n_bytes -= take
            self.occupancy -= take
            if head[1] == 0:
                self._q.popleft()
        return out

    def segments(self) -> list:
        return [tuple(x) for x in self._q]


class TrafficState:
    """Files and RLC buffers; the single writer is the engine."""

    def __init__(self, n_ues: int):
        self.files: dict[int, FileTransfer] = {}
        self.buffers = [RlcBuffer() for _ in range(n_ues)]

    def add_file(self, file_id: int, ue_id: int, size: int, time: float, cell_id: int = -1):
        f = FileTransfer(file_id, ue_id, size, time, cell_id)
        self.files[file_id] = f
        self.buffers[ue_id].push(file_id, size)
        return f

    def on_tb_outcome(self, segments, success: bool, time: float) -> None:
        """Credit a transport block's bytes as delivered or lost to their files."""
        for file_id, n in segments:
            f = self.files[file_id]
            if success:
                f.bytes_delivered += n
            else:
                f.bytes_lost += n
            if f.bytes_delivered + f.bytes_lost >= f.size and f.completion_time is None:
                f.completion_time = time

    def bytes_in_buffer(self, file_id: int) -> int:
        f = self.files[file_id]
        return sum(n for fid, n in self.buffers[f.ue_id].segments() if fid == file_id)


def upt(file: FileTransfer) -> Optional[float]:
    """Delivered bits over transfer time in bit/s; None for unfinished or zero-length transfers."""
    if file.completion_time is None:
        return None
    elapsed = file.completion_time - file.arrival_time
    if elapsed <= 0:
        return None
    return 8.0 * file.bytes_delivered / elapsed
