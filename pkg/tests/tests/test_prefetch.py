import os
import sys
sys.path.insert(0, os.path.realpath(os.path.join(os.path.dirname(__file__), '../../')))

from collections import deque

import numpy as np
import pytest

import RTSIM
from RTSIM.memhier import AccessKind, MemRequest
from RTSIM.prefetch import (TtpFsm, FsmState, PrefetchCursor, on_stack_event, on_queue_pop, on_leaf_test_start,
                            TtpDfsPrefetcher, TtpBfsPrefetcher, ParkLeafPrefetcher, BasePrefetcher,
                            PrefetchPolicy, PrefetchPolicyConfig, make_prefetcher, apply_perfect_mode,
                            streak_class, arbitrate, Arbiter, DEMAND_PRIORITY)
from RTSIM.rtunit import StackEvent, EventKind


def test_fsm_schedule():
    fsm = TtpFsm((1, 2, 16))
    assert [fsm.pop() for _ in range(4)] == [1, 2, 16, 16]
    assert fsm.state == FsmState.S2
    fsm.push()
    assert fsm.state == FsmState.S0
    assert fsm.pop() == 1


def test_cursor_emits_without_repeats():
    stack = list("ABCDEFG")
    cursor = PrefetchCursor()
    cursor.reset(len(stack) - 1)

    stack.pop()
    assert cursor.emit(stack, 1) == ['F']
    stack.pop()
    assert cursor.emit(stack, 2) == ['E', 'D']
    stack.pop()
    assert cursor.emit(stack, 16) == ['C', 'B', 'A']
    stack.pop()
    assert cursor.emit(stack, 16) == []


class ReferenceFsm:
    """Straightforward model: emit the top-k entries not emitted since the last push."""
    def __init__(self, intensity):
        self.intensity = intensity
        self.pops_since_push = 0
        self.emitted = set()

    def push(self):
        self.pops_since_push = 0
        self.emitted.clear()
        return []

    def pop(self, stack):
        self.pops_since_push += 1
        k = self.intensity[min(self.pops_since_push, 3) - 1]
        top = len(stack) - 1
        out = []
        for index in range(top, max(top - k, -1), -1):
            if index not in self.emitted:
                self.emitted.add(index)
                out.append(stack[index])
        return out


@pytest.mark.parametrize("intensity", [(1, 2, 16), (1, 4, 32), (2, 2, 2)])
def test_fsm_conformance_random_sequences(intensity):
    rng = np.random.default_rng(sum(intensity))
    config = PrefetchPolicyConfig(policy=PrefetchPolicy.TTP_DFS, intensity=intensity)
    sequences = 10_000 if intensity == (1, 2, 16) else 1_000
    for _ in range(sequences):
        prefetcher = TtpDfsPrefetcher(config)
        reference = ReferenceFsm(intensity)
        stack = []
        since_push = set()
        next_addr = 0
        for _ in range(int(rng.integers(1, 40))):
            if not stack or rng.random() < 0.45:
                next_addr += 32
                stack.append(next_addr)
                event = StackEvent(0, EventKind.PUSH, next_addr)
                expected = reference.push()
                since_push.clear()
            else:
                addr = stack.pop()
                event = StackEvent(0, EventKind.POP, addr)
                expected = reference.pop(stack)
            emitted = prefetcher.on_stack_event(event, stack)

            assert emitted == expected
            assert not since_push.intersection(emitted)
            since_push.update(emitted)


def test_on_stack_event_function():
    fsm, cursor = TtpFsm(), PrefetchCursor()
    stack = [0x20]
    assert on_stack_event(fsm, cursor, StackEvent(0, EventKind.PUSH, 0x20), stack) == []
    stack.append(0x40)
    on_stack_event(fsm, cursor, StackEvent(0, EventKind.PUSH, 0x40), stack)
    stack.pop()
    assert on_stack_event(fsm, cursor, StackEvent(0, EventKind.POP, 0x40), stack) == [0x20]


def test_park_leaf_prefetcher():
    prefetcher = ParkLeafPrefetcher(PrefetchPolicyConfig(policy=PrefetchPolicy.PARK_LEAF), leaf_test_latency=2)
    stack = []
    for addr in "abcd":
        stack.append(addr)
        assert prefetcher.on_push(stack, addr) == []

    assert prefetcher.on_leaf_test_start(stack) == ['d', 'c']
    stack.pop()
    assert prefetcher.on_pop(stack, 'd') == []
    assert prefetcher.on_leaf_test_start(stack) == ['b', 'a']
    assert prefetcher.on_leaf_test_start(stack) == []

    stack.append('e')
    prefetcher.on_push(stack, 'e')
    assert prefetcher.on_leaf_test_start(stack) == ['e', 'c']


def test_on_leaf_test_start_function():
    cursor = PrefetchCursor()
    cursor.reset(2)
    assert on_leaf_test_start(cursor, [1, 2, 3], 8) == [3, 2, 1]


def test_on_queue_pop():
    emitted = set()
    assert on_queue_pop([1, 2, 3, 4, 5], 2, emitted) == [1, 2]
    assert on_queue_pop([2, 3, 4, 5], 2, emitted) == [3]
    assert on_queue_pop([], 4) == []


def test_bfs_prefetcher_distance():
    prefetcher = TtpBfsPrefetcher(PrefetchPolicyConfig(policy=PrefetchPolicy.TTP_BFS, bfs_distance=2))
    assert prefetcher.on_pop(deque("bcd"), 'a') == ['b', 'c']
    assert prefetcher.on_pop(deque("cde"), 'b') == ['d']
    assert prefetcher.on_push(deque("cdef"), 'f') == []
    assert 'b' not in prefetcher.emitted


# ----------------------------------------------------------------------------------------------
def test_arbitrate_demand_priority():
    config = PrefetchPolicyConfig()
    assert arbitrate([1], [1], config, 0) == AccessKind.DEMAND
    assert arbitrate(0, 3, config, 0) == AccessKind.PREFETCH
    assert arbitrate(0, 0, config, 0) is None


def test_arbiter_threshold():
    arbiter = Arbiter(PrefetchPolicyConfig(arbitration=25))
    assert arbiter.arbitrate(1, 1, 10) == AccessKind.DEMAND
    assert arbiter.arbitrate(1, 1, 25) == AccessKind.PREFETCH
    assert arbiter.arbitrate(1, 1, 30) == AccessKind.DEMAND
    assert arbiter.arbitrate(0, 1, 31) == AccessKind.PREFETCH
    assert arbiter.arbitrate(1, 1, 50) == AccessKind.DEMAND
    assert arbiter.arbitrate(1, 1, 56) == AccessKind.PREFETCH


# ----------------------------------------------------------------------------------------------
def test_streak_class():
    assert [streak_class(n) for n in (1, 2, 3, 4, 9)] == [1, 2, 3, 4, 4]


@pytest.mark.parametrize("policy, streak, forced", [
    (PrefetchPolicy.PERFECT_UPWARD, 1, False),
    (PrefetchPolicy.PERFECT_UPWARD, 2, True),
    (PrefetchPolicy.PERFECT_UPWARD, 4, True),
    (PrefetchPolicy.PERFECT_DOWNWARD, 1, True),
    (PrefetchPolicy.PERFECT_DOWNWARD, 3, False),
    (PrefetchPolicy.OFF, 2, False),
])
def test_apply_perfect_mode(policy, streak, forced):
    request = apply_perfect_mode(policy, MemRequest(0x0, streak_class=streak))
    assert request.forced_hit == forced


def test_perfect_mode_ignores_prefetches():
    request = MemRequest(0x0, kind=AccessKind.PREFETCH, streak_class=2)
    assert not apply_perfect_mode(PrefetchPolicy.PERFECT_UPWARD, request).forced_hit


# ----------------------------------------------------------------------------------------------
@pytest.mark.parametrize("policy, cls", [
    ("off", BasePrefetcher),
    ("ttp-dfs", TtpDfsPrefetcher),
    ("ttp-bfs", TtpBfsPrefetcher),
    ("park-leaf", ParkLeafPrefetcher),
    ("perfect-upward", BasePrefetcher),
])
def test_make_prefetcher(policy, cls):
    prefetcher = make_prefetcher(PrefetchPolicyConfig(policy=policy), leaf_test_latency=5)
    assert type(prefetcher) is cls
    assert prefetcher.leaf_test_latency == 5


@pytest.mark.parametrize("kwargs, message", [
    (dict(policy="warp-speed"), "unknown policy"),
    (dict(intensity=(1, 2)), "intensity"),
    (dict(intensity=(1, 0, 4)), "intensity"),
    (dict(arbitration=0), "arbitration"),
    (dict(arbitration="sometimes"), "arbitration"),
    (dict(bfs_distance=0), "bfs_distance"),
    (dict(queue_size=0), "queue_size"),
])
def test_policy_config_errors(kwargs, message):
    with pytest.raises(RTSIM.ConfigError, match=message):
        PrefetchPolicyConfig(**kwargs).validate()


def test_policy_config_defaults():
    config = PrefetchPolicyConfig()
    config.validate()
    assert config.policy == PrefetchPolicy.OFF
    assert config.intensity == (1, 2, 16)
    assert config.bfs_distance == 4
    assert config.arbitration == DEMAND_PRIORITY
