from enum import Enum
from dataclasses import dataclass

from .utils import ConfigError


class PrefetchPolicy(str, Enum):
    OFF = "off"
    TTP_DFS = "ttp-dfs"
    TTP_BFS = "ttp-bfs"
    PARK_LEAF = "park-leaf"
    PERFECT_UPWARD = "perfect-upward"
    PERFECT_DOWNWARD = "perfect-downward"

    @property
    def perfect(self):
        return self in (PrefetchPolicy.PERFECT_UPWARD, PrefetchPolicy.PERFECT_DOWNWARD)


DEMAND_PRIORITY = "demand-priority"
THRESHOLDS = (25, 50, 100)


@dataclass
class PrefetchPolicyConfig:
    """Prefetch policy and its parameters.

    Args:
        policy (str): one of PrefetchPolicy values
        bfs_distance (int): N, queue entries looked ahead on every BFS pop
        intensity (tuple): (n1, n2, n3) prefetch distances of the DFS state machine
        arbitration (str, int): 'demand-priority' or a threshold c in cycles
        queue_size (int): per-thread prefetch queue length in 32B chunks
    """
    policy: PrefetchPolicy = PrefetchPolicy.OFF
    bfs_distance: int = 4
    intensity: tuple = (1, 2, 16)
    arbitration: object = DEMAND_PRIORITY
    queue_size: int = 32

    def validate(self):
        try:
            self.policy = PrefetchPolicy(self.policy)
        except ValueError:
            raise ConfigError(f"unknown policy '{self.policy}' "
                              f"(use one of {[p.value for p in PrefetchPolicy]}).") from None
        if self.bfs_distance < 1:
            raise ConfigError(f"prefetch.bfs_distance must be at least 1, got {self.bfs_distance}.")
        self.intensity = tuple(self.intensity)
        if len(self.intensity) != 3 or any(not isinstance(n, int) or n < 1 for n in self.intensity):
            raise ConfigError(f"prefetch.intensity must be three integers >= 1, got {self.intensity}.")
        if self.arbitration != DEMAND_PRIORITY:
            if not isinstance(self.arbitration, int) or isinstance(self.arbitration, bool) or self.arbitration < 1:
                raise ConfigError(f"prefetch.arbitration must be '{DEMAND_PRIORITY}' or a positive "
                                  f"threshold in cycles, got {self.arbitration!r}.")
        if self.queue_size < 1:
            raise ConfigError(f"prefetch.queue_size must be at least 1, got {self.queue_size}.")


class BasePrefetcher:
    """Parent per-thread prefetch engine. One instance is owned by every traversal agent.

    Child class should override the hooks it reacts to:

    - self.on_push()

    - self.on_pop()

    - self.on_leaf_test_start() (optional)

    Every hook receives the traversal container (stack or queue, bottom/head first) as it is
    after the event and returns the node addresses to prefetch, in issue order.
    """
    policy = PrefetchPolicy.OFF

    def __init__(self, config:PrefetchPolicyConfig=None, leaf_test_latency:int=8) -> None:
        self.config = config if config is not None else PrefetchPolicyConfig()
        self.leaf_test_latency = leaf_test_latency

    def on_push(self, container, addr:int) -> list:
        return []

    def on_pop(self, container, addr:int) -> list:
        return []

    def on_leaf_test_start(self, container) -> list:
        return []

    def on_stack_event(self, event, container) -> list:
        """Dispatches a push/pop StackEvent to the matching hook."""
        if event.kind == "push":
            return self.on_push(container, event.addr)
        return self.on_pop(container, event.addr)


def make_prefetcher(config:PrefetchPolicyConfig, leaf_test_latency:int=8) -> BasePrefetcher:
    """Creates the per-thread prefetch engine of a policy."""
    from .prefetch.ttp import TtpDfsPrefetcher, TtpBfsPrefetcher
    from .prefetch.park import ParkLeafPrefetcher

    policy = PrefetchPolicy(config.policy)
    if policy == PrefetchPolicy.TTP_DFS:
        return TtpDfsPrefetcher(config, leaf_test_latency)
    if policy == PrefetchPolicy.TTP_BFS:
        return TtpBfsPrefetcher(config, leaf_test_latency)
    if policy == PrefetchPolicy.PARK_LEAF:
        return ParkLeafPrefetcher(config, leaf_test_latency)
    # off and the perfect limit modes generate no prefetches
    return BasePrefetcher(config, leaf_test_latency)
