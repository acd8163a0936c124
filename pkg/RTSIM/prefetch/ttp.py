from itertools import islice

from ..prefetch_base import BasePrefetcher, PrefetchPolicy
from .fsm import TtpFsm, PrefetchCursor, on_stack_event


class TtpDfsPrefetcher(BasePrefetcher):
    """Tree traversal prefetcher for DFS stacks: consecutive pops prefetch entries from the top
    of the stack, with the distance chosen by the state machine."""
    policy = PrefetchPolicy.TTP_DFS

    def __init__(self, config=None, leaf_test_latency=8):
        super().__init__(config, leaf_test_latency)
        self.fsm = TtpFsm(self.config.intensity)
        self.cursor = PrefetchCursor()

    def on_stack_event(self, event, container):
        return on_stack_event(self.fsm, self.cursor, event, container)


def on_queue_pop(queue, n, emitted=None):
    """Looks at the first `n` entries of a BFS queue and returns the ones not yet emitted.

    Args:
        queue (iterable): queue content after the pop, head first
        n (int): lookahead distance N
        emitted (set, optional): addresses emitted earlier and still enqueued; updated in place

    Returns:
        list: addresses to prefetch, head first
    """
    emitted = set() if emitted is None else emitted
    out = []
    for addr in islice(queue, n):
        if addr not in emitted:
            emitted.add(addr)
            out.append(addr)
    return out


class TtpBfsPrefetcher(BasePrefetcher):
    """Distance-N prefetching from the head of a BFS queue on every pop."""
    policy = PrefetchPolicy.TTP_BFS

    def __init__(self, config=None, leaf_test_latency=8):
        super().__init__(config, leaf_test_latency)
        self.emitted = set()

    def on_pop(self, container, addr):
        self.emitted.discard(addr)
        return on_queue_pop(container, self.config.bfs_distance, self.emitted)
