from ..prefetch_base import BasePrefetcher, PrefetchPolicy
from .fsm import PrefetchCursor


def on_leaf_test_start(cursor, stack, duration):
    """Prefetches from the top of the stack while a leaf intersection test runs.

    At most one entry per cycle of the test is emitted, continuing from the cursor so
    nothing is repeated since the last push.

    Args:
        cursor (PrefetchCursor): the thread's cursor
        stack (list): stack content, bottom first
        duration (int): leaf test latency in cycles

    Returns:
        list: addresses from the top downwards
    """
    cursor.clamp(len(stack) - 1)
    out = []
    while cursor.cursor >= 0 and len(out) < duration:
        out.append(stack[cursor.cursor])
        cursor.cursor -= 1
    cursor.target = cursor.cursor
    return out


class ParkLeafPrefetcher(BasePrefetcher):
    """Leaf-test-overlap policy: stack entries are prefetched only during leaf intersection tests."""
    policy = PrefetchPolicy.PARK_LEAF

    def __init__(self, config=None, leaf_test_latency=8):
        super().__init__(config, leaf_test_latency)
        self.cursor = PrefetchCursor()

    def on_push(self, container, addr):
        self.cursor.reset(len(container) - 1)
        return []

    def on_pop(self, container, addr):
        self.cursor.clamp(len(container) - 1)
        return []

    def on_leaf_test_start(self, container):
        return on_leaf_test_start(self.cursor, container, self.leaf_test_latency)
