from bisect import bisect_left
from collections import deque
from dataclasses import dataclass

from ..utils import ConfigError


@dataclass
class DramConfig:
    """Fixed-latency DRAM with a per-cycle acceptance cap.

    Args:
        latency (int): service latency in cycles
        requests_per_cycle (int): maximum number of requests accepted per cycle
    """
    latency: int = 200
    requests_per_cycle: int = 4

    def validate(self):
        if self.latency < 1:
            raise ConfigError(f"dram.latency must be positive, got {self.latency}.")
        if self.requests_per_cycle < 1:
            raise ConfigError(f"dram.requests_per_cycle must be positive, got {self.requests_per_cycle}.")


class Dram:
    """FIFO DRAM model. Requests are accepted in arrival order, at most `requests_per_cycle` per
    cycle, and complete `latency` cycles after acceptance.
    """
    def __init__(self, config=None):
        self.config = config if config is not None else DramConfig()
        self.config.validate()
        self.queue = deque()
        self.reads = 0
        self.writebacks = 0
        self.accept_cycles = [] # non-decreasing

    def __repr__(self):
        return f"Dram(latency={self.config.latency}, cap={self.config.requests_per_cycle}/cycle)"

    @property
    def busy(self):
        return len(self.queue) > 0

    def enqueue(self, item):
        self.queue.append(item)

    def tick(self, cycle):
        """Accepts queued requests for this cycle.

        Returns:
            list: (completion cycle, item) of the accepted requests in FIFO order
        """
        accepted = []
        while self.queue and len(accepted) < self.config.requests_per_cycle:
            accepted.append((cycle + self.config.latency, self.queue.popleft()))
            self.accept_cycles.append(cycle)
        self.reads += len(accepted)
        return accepted

    def accepted_between(self, start, end):
        """Number of requests accepted in cycles [start, end)."""
        return bisect_left(self.accept_cycles, end) - bisect_left(self.accept_cycles, start)


def bandwidth_utilization(dram, window):
    """Fraction of the DRAM acceptance capacity used in a window.

    Args:
        dram (Dram): the DRAM model
        window (int, tuple): number of cycles starting at cycle 0, or (start, end) cycles

    Returns:
        float: accepted requests / (cap * window cycles)
    """
    start, end = (0, window) if isinstance(window, int) else window
    if end - start < 1:
        raise ValueError(f"Bandwidth window must span at least 1 cycle, got {window}.")
    return dram.accepted_between(start, end) / (dram.config.requests_per_cycle * (end - start))
