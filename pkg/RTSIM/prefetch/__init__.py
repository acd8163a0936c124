from ..prefetch_base import (BasePrefetcher, PrefetchPolicy, PrefetchPolicyConfig, make_prefetcher,
                             DEMAND_PRIORITY, THRESHOLDS)
from .fsm import TtpFsm, FsmState, PrefetchCursor, on_stack_event
from .ttp import TtpDfsPrefetcher, TtpBfsPrefetcher, on_queue_pop
from .park import ParkLeafPrefetcher, on_leaf_test_start
from .perfect import apply_perfect_mode, streak_class
from .arbitration import Arbiter, arbitrate
