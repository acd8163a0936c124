import heapq
import itertools
from dataclasses import dataclass, field

from ..utils import SimulationError
from .cache import Cache, CacheConfig, AccessKind, Category
from .dram import Dram, DramConfig


@dataclass(eq=False)
class MemRequest:
    """One 32B chunk request issued by an RT unit.

    Args:
        addr (int): chunk address
        kind (AccessKind): demand or prefetch
        sm (int): index of the SM (and its L1) issuing the request
        warp_id (int): issuing warp
        subscribers (list): thread ids waiting for the chunk (demand only)
        streak_class (int): pop-streak class (1, 2, 3, 4 = 4+) of the pop that created it
        forced_hit (bool): serve as an L1 hit regardless of the cache state
    """
    addr: int
    kind: AccessKind = AccessKind.DEMAND
    sm: int = 0
    warp_id: int = 0
    subscribers: list = field(default_factory=list)
    streak_class: int = 0
    forced_hit: bool = False
    issue_cycle: int = None
    l1_category: Category = None
    dram_miss: bool = False


class MemoryHierarchy:
    """Per-SM L1 caches, a shared L2 and DRAM, driven by a time-ordered event heap.

    Timing of a demand chunk issued at cycle c: an L1 hit completes at c + L1 latency; an L1
    miss reaches the L2 at c + L1 latency; an L2 hit fills the L1 another L2 latency later; an
    L2 miss is queued for DRAM at that time and fills L2 and L1 DRAM latency cycles after the
    DRAM accepts it.

    Args:
        l1_config (CacheConfig): per-SM L1 configuration
        l2_config (CacheConfig): shared L2 configuration
        dram_config (DramConfig): DRAM configuration
        sm_count (int): number of L1 caches
    """
    def __init__(self, l1_config=None, l2_config=None, dram_config=None, sm_count=1):
        l1_config = l1_config if l1_config is not None else CacheConfig()
        l2_config = l2_config if l2_config is not None else CacheConfig(
            capacity=512 * 1024, associativity=16, latency=160, mshr_entries=768)
        if sm_count < 1:
            raise SimulationError(f"sm_count must be at least 1, got {sm_count}.")

        self.l1 = [Cache(l1_config, name=f'l1[{i}]') for i in range(sm_count)]
        self.l2 = Cache(l2_config, name='l2')
        self.dram = Dram(dram_config if dram_config is not None else DramConfig())

        self._events = []
        self._seq = itertools.count()
        self._responses = []
        self._dram_next = 0
        self.cycle = 0
        self.dram_demand_fills = 0  # demand chunk requests served from DRAM

    def _schedule(self, time, action, *args):
        heapq.heappush(self._events, (time, next(self._seq), action, args))

    @property
    def idle(self):
        return not self._events and not self.dram.busy

    def next_event_cycle(self):
        """Earliest cycle at which the hierarchy changes state, or None when idle."""
        candidates = []
        if self._events:
            candidates.append(self._events[0][0])
        if self.dram.busy:
            candidates.append(max(self._dram_next, self.cycle))
        return min(candidates) if candidates else None

    def issue(self, request, cycle):
        """Sends a chunk request to the L1 of its SM.

        Args:
            request (MemRequest): the request
            cycle (int): issue cycle

        Returns:
            AccessOutcome: L1 outcome. A stalled demand was not accepted and must be retried.
        """
        request.issue_cycle = cycle
        l1 = self.l1[request.sm]

        if request.forced_hit:
            outcome = l1.forced_hit(cycle)
            request.l1_category = outcome.category
            self._schedule(outcome.completion_cycle, self._respond, request)
            return outcome

        demand = request.kind == AccessKind.DEMAND
        outcome = l1.access(request.addr, request.kind, cycle, subscriber=request if demand else None)
        if outcome.stalled and demand:
            return outcome

        request.l1_category = outcome.category
        if outcome.category == Category.HIT:
            if outcome.prefetched_use:
                self.l2.note_demand_use(request.addr)
            if demand:
                self._schedule(outcome.completion_cycle, self._respond, request)
        elif outcome.category == Category.MISS_MSHR_AVAILABLE:
            self._schedule(cycle + l1.config.latency, self._l2_access, request.sm, request.addr)
        return outcome

    def _respond(self, time, request):
        self._responses.append(request)

    def _l2_access(self, time, sm, addr):
        l1 = self.l1[sm]
        state = l1.pending(addr)
        if state is None:
            raise SimulationError(f"L2 access for 0x{addr:x} without an outstanding L1 sector.")
        kind = AccessKind.DEMAND if state.demanded else AccessKind.PREFETCH
        outcome = self.l2.access(addr, kind, time, subscriber=sm)

        if outcome.stalled:
            if kind == AccessKind.PREFETCH:
                l1.cancel(addr)
            else:
                self._schedule(time + 1, self._l2_access, sm, addr)
            return

        state.info['l2_category'] = outcome.category
        if outcome.category == Category.HIT:
            self._schedule(time + self.l2.config.latency, self._l1_fill, sm, addr)
        elif outcome.category == Category.MISS_MSHR_AVAILABLE:
            self._schedule(time + self.l2.config.latency, self._dram_enqueue, addr)

    def _dram_enqueue(self, time, addr):
        self.dram.enqueue(addr)

    def _l2_fill(self, time, addr):
        line_addr, sector = self.l2.split(addr)
        for _, state in self.l2.fill(line_addr, [sector], time):
            for sm in state.subscribers:
                self._l1_fill(time, sm, addr)

    def _l1_fill(self, time, sm, addr):
        l1 = self.l1[sm]
        line_addr, sector = l1.split(addr)
        for _, state in l1.fill(line_addr, [sector], time):
            if state.demanded:
                self.l2.note_demand_use(addr)
            l2_category = state.info.get('l2_category')
            dram_miss = l2_category is not None and l2_category.is_miss
            if dram_miss:
                self.dram_demand_fills += len(state.subscribers)
            for request in state.subscribers:
                request.dram_miss = dram_miss
                self._responses.append(request)

    def advance(self, cycle):
        """Processes every event up to and including `cycle`.

        Events of one cycle run in scheduling order, then DRAM accepts up to its cap.

        Args:
            cycle (int): target cycle, not smaller than the previous one

        Returns:
            list: demand MemRequest objects whose data arrived, in completion order
        """
        if cycle < self.cycle:
            raise SimulationError(f"Memory hierarchy cannot go back in time ({cycle} < {self.cycle}).")
        responses = []
        self._responses = responses

        while True:
            t = self.next_event_cycle()
            if t is None or t > cycle:
                break
            self.cycle = t
            while self._events and self._events[0][0] <= t:
                time, _, action, args = heapq.heappop(self._events)
                action(time, *args)
            if self.dram.busy and self._dram_next <= t:
                for completion, addr in self.dram.tick(t):
                    self._schedule(completion, self._l2_fill, addr)
                self._dram_next = t + 1

        self.cycle = cycle
        return responses

    def drain(self):
        """Advances until every outstanding request has completed.

        Returns:
            tuple: (final cycle, list of demand responses)
        """
        responses = []
        while not self.idle:
            responses.extend(self.advance(self.next_event_cycle()))
        return self.cycle, responses

    def identity_report(self):
        """Conservation checks between levels; empty when the counters are consistent."""
        report = []
        l1_forwarded = sum(l1.forwarded() for l1 in self.l1)
        l2_accesses = sum(self.l2.accesses.values())
        if l1_forwarded != l2_accesses:
            report.append(f"L1 misses forwarded ({l1_forwarded}) != L2 accesses ({l2_accesses})")
        if self.l2.forwarded() != self.dram.reads:
            report.append(f"L2 misses forwarded ({self.l2.forwarded()}) != DRAM reads ({self.dram.reads})")
        return report
