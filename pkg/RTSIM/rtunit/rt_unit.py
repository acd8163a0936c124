import heapq
import itertools
from collections import deque

from ..utils import SimulationError
from ..bvh.layout import node_at, node_footprint
from ..memhier.cache import AccessKind
from ..memhier.hierarchy import MemRequest
from ..prefetch_base import PrefetchPolicy, PrefetchPolicyConfig
from ..prefetch.arbitration import Arbiter
from ..prefetch.perfect import apply_perfect_mode, streak_class
from .agent import RtUnitConfig, ThreadStatus, init_traversal, step_thread, complete_compute
from .warp import select_warp


class RtUnit:
    """RT unit of one SM: a warp buffer, one memory port and the per-thread traversal agents.

    Every cycle the unit delivers arrived node data to the waiting threads, ends finished
    intersection tests (the thread pops its next node right away), retires finished warps,
    loads waiting warps into free buffer slots and issues at most one 32B request. The arbiter
    picks demand or prefetch over all resident warps, then a warp holding that kind of request
    is chosen round-robin.

    Args:
        sm (int): SM index (selects the L1)
        bvh (FlatBvh): the tree
        hierarchy (MemoryHierarchy): shared memory hierarchy
        ledger (StatsLedger): statistics sink
        config (RtUnitConfig): RT unit parameters
        prefetch_config (PrefetchPolicyConfig): prefetch policy
        event_sink (list, optional): receives every StackEvent
    """
    def __init__(self, sm, bvh, hierarchy, ledger, config=None, prefetch_config=None, event_sink=None):
        self.sm = sm
        self.bvh = bvh
        self.hierarchy = hierarchy
        self.ledger = ledger
        self.config = config if config is not None else RtUnitConfig()
        self.prefetch_config = prefetch_config if prefetch_config is not None else PrefetchPolicyConfig()
        self.policy = PrefetchPolicy(self.prefetch_config.policy)
        self.event_sink = event_sink

        self.arbiter = Arbiter(self.prefetch_config)
        self.waiting = deque()
        self.buffer = []
        self.agents = {}  # thread id -> agent, resident warps only
        self.warp_of = {} # thread id -> Warp
        self.computing = []
        self._seq = itertools.count()
        self.last_served = {AccessKind.DEMAND: None, AccessKind.PREFETCH: None}
        self._counts = {status.value: 0 for status in ThreadStatus}

    def __repr__(self):
        return f"RtUnit(sm={self.sm}, resident={len(self.buffer)}, waiting={len(self.waiting)})"

    @property
    def busy(self):
        return bool(self.waiting or self.buffer)

    def assign(self, warp):
        self.waiting.append(warp)

    # ------------------------------------------------------------------------------------------
    def step(self, cycle, responses=()):
        """Simulates one cycle.

        Args:
            cycle (int): current cycle
            responses (iterable): demand MemRequest objects of this SM completed at `cycle`
        """
        for request in responses:
            self._on_response(request, cycle)

        while self.computing and self.computing[0][0] <= cycle:
            _, _, thread_id = heapq.heappop(self.computing)
            agent = self.agents[thread_id]
            before = self._classify(agent)
            if complete_compute(agent) == ThreadStatus.DONE:
                self.ledger.record_ray(agent.visits)
            else:
                self._pop(agent, cycle)
            self._track(agent, before)

        self._retire()
        self._load_warps(cycle)
        self._issue(cycle)

    def next_activity(self, cycle):
        """Earliest cycle after `cycle` at which the unit acts on its own, or None."""
        if any(warp.has_pending() for warp in self.buffer):
            return cycle + 1
        if self.waiting and len(self.buffer) < self.config.warp_buffer_size:
            return cycle + 1
        if self.computing:
            return max(self.computing[0][0], cycle + 1)
        return None

    def status_counts(self):
        """Threads of the resident warps per status; a waiting thread with unissued requests counts as ready."""
        return dict(self._counts)

    @staticmethod
    def _classify(agent):
        if agent.status == ThreadStatus.WAITING_MEM and agent.unissued > 0:
            return ThreadStatus.READY.value
        return agent.status.value

    def _track(self, agent, before):
        after = self._classify(agent)
        if after != before:
            self._counts[before] -= 1
            self._counts[after] += 1

    # ------------------------------------------------------------------------------------------
    def _record(self, events):
        for event in events:
            if event.kind == "push":
                self.ledger.record_push()
            if self.event_sink is not None:
                self.event_sink.append(event)

    def _queue_prefetches(self, agent, addrs):
        if not addrs:
            return
        self.ledger.prefetch_nodes_emitted += len(addrs)
        warp = self.warp_of[agent.thread_id]
        for addr in addrs:
            for chunk in node_footprint(node_at(self.bvh, addr)):
                if warp.queue_prefetch(agent, chunk):
                    self.ledger.prefetch_chunks_overflow += 1
                self.ledger.prefetch_chunks_queued += 1

    def _pop(self, agent, cycle):
        result = step_thread(agent, self.bvh, cycle=cycle)
        if result.done:
            self.ledger.record_ray(agent.visits)
            return
        self._record(result.events)
        streak = streak_class(agent.pop_streak)
        self.ledger.record_pop(streak)
        self._queue_prefetches(agent, result.prefetches)

        warp = self.warp_of[agent.thread_id]
        chunks = node_footprint(node_at(self.bvh, result.request_addr))
        agent.outstanding = len(chunks)
        agent.unissued = len(chunks)
        agent.pending_missed = False
        warp.add_demand([MemRequest(chunk, AccessKind.DEMAND, self.sm, warp.warp_id, [agent.thread_id], streak)
                         for chunk in chunks])

    def _on_response(self, request, cycle):
        self.ledger.record_demand_response(request)
        missed = request.l1_category is not None and request.l1_category.is_miss
        for thread_id in request.subscribers:
            agent = self.agents[thread_id]
            agent.pending_missed = agent.pending_missed or missed
            agent.outstanding -= 1
            if agent.outstanding == 0:
                before = self._classify(agent)
                self._process(agent, cycle)
                self._track(agent, before)

    def _process(self, agent, cycle):
        self.ledger.record_visit(agent.pending_missed, agent.queue_nonempty_at_pop)
        result = step_thread(agent, self.bvh, mem_response=agent.pending_addr, cycle=cycle)
        self._record(result.events)
        self._queue_prefetches(agent, result.prefetches)
        heapq.heappush(self.computing, (cycle + result.latency, next(self._seq), agent.thread_id))

    def _retire(self):
        for warp in [w for w in self.buffer if not w.active and not w.demand]:
            self.buffer.remove(warp)
            self.ledger.prefetch_chunks_abandoned += warp.drop_prefetches()
            for agent in warp.agents:
                self._counts[self._classify(agent)] -= 1
                del self.agents[agent.thread_id]
                del self.warp_of[agent.thread_id]

    def _load_warps(self, cycle):
        while self.waiting and len(self.buffer) < self.config.warp_buffer_size:
            warp = self.waiting.popleft()
            self.buffer.append(warp)
            for agent in warp.agents:
                self.agents[agent.thread_id] = agent
                self.warp_of[agent.thread_id] = warp
                if agent.prefetch_queue is None:
                    agent.prefetch_queue = deque(maxlen=self.prefetch_config.queue_size)
                self._counts[self._classify(agent)] += 1
            for agent in warp.agents:
                before = self._classify(agent)
                self._record(init_traversal(agent, self.bvh, cycle))
                if agent.done:
                    self.ledger.record_ray(agent.visits)
                else:
                    self._pop(agent, cycle)
                self._track(agent, before)
        # warps whose rays all missed the scene leave right away
        if any(not w.active and not w.demand for w in self.buffer):
            self._retire()
            if self.waiting and len(self.buffer) < self.config.warp_buffer_size:
                self._load_warps(cycle)

    def _issue(self, cycle):
        # arbitration sees the pending requests of every resident warp
        demand = sum(len(w.demand) for w in self.buffer)
        prefetch = sum(w.prefetch_pending for w in self.buffer)
        kind = self.arbiter.arbitrate(demand, prefetch, cycle)
        if kind is None:
            return
        warp_id = select_warp(self.buffer, self.last_served[kind], kind)
        warp = next(w for w in self.buffer if w.warp_id == warp_id)
        self.last_served[kind] = warp_id

        if kind == AccessKind.DEMAND:
            request = warp.pop_demand()
            if self.policy.perfect:
                apply_perfect_mode(self.policy, request)
            outcome = self.hierarchy.issue(request, cycle)
            if outcome.stalled:
                warp.retry_demand(request)
                return
            for thread_id in request.subscribers:
                agent = self.agents[thread_id]
                before = self._classify(agent)
                agent.unissued -= 1
                self._track(agent, before)
        elif kind == AccessKind.PREFETCH:
            request = warp.pop_prefetch()
            self.hierarchy.issue(request, cycle)
            self.ledger.prefetch_chunks_issued += 1


def check_drained(responses):
    """Raises when demand data arrives after every thread finished."""
    if responses:
        raise SimulationError(f"{len(responses)} demand responses arrived after all rays finished.")
