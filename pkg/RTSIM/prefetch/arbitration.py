from ..prefetch_base import DEMAND_PRIORITY
from ..memhier.cache import AccessKind


def _count(queue):
    return queue if isinstance(queue, int) else len(queue)


def arbitrate(demand_queue, prefetch_queue, config, cycle, last_prefetch_cycle=0):
    """Chooses which queue issues the single request of this cycle.

    In demand-priority mode prefetches only use cycles without demand requests. With a
    threshold c, a pending prefetch goes first once c cycles have passed since the last
    prefetch was issued.

    Args:
        demand_queue (sized, int): pending demand requests, or their number
        prefetch_queue (sized, int): pending prefetch chunks, or their number
        config (PrefetchPolicyConfig): holds the arbitration setting
        cycle (int): current cycle
        last_prefetch_cycle (int): cycle of the last issued prefetch

    Returns:
        AccessKind or None: kind of the request to issue, None when both queues are empty
    """
    has_demand = _count(demand_queue) > 0
    has_prefetch = _count(prefetch_queue) > 0
    if (has_prefetch and config.arbitration != DEMAND_PRIORITY
            and cycle - last_prefetch_cycle >= config.arbitration):
        return AccessKind.PREFETCH
    if has_demand:
        return AccessKind.DEMAND
    if has_prefetch:
        return AccessKind.PREFETCH
    return None


class Arbiter:
    """Per-RT-unit arbiter remembering when it last issued a prefetch."""
    def __init__(self, config):
        self.config = config
        self.last_prefetch_cycle = 0

    def arbitrate(self, demand_queue, prefetch_queue, cycle):
        kind = arbitrate(demand_queue, prefetch_queue, self.config, cycle, self.last_prefetch_cycle)
        if kind == AccessKind.PREFETCH:
            self.last_prefetch_cycle = cycle
        return kind
