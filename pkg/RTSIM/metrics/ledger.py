from dataclasses import dataclass, field

from ..memhier.cache import AccessKind, Category, CATEGORIES

STREAK_CLASSES = ('1', '2', '3', '4plus')
STATUSES = ('waiting-mem', 'computing', 'ready', 'done')


def _category_counts():
    return {category: 0 for category in CATEGORIES}


@dataclass
class LevelStats:
    """Counters of one cache level (L1 counters are summed over all SMs)."""
    demand_outcomes: dict = field(default_factory=_category_counts)
    prefetch_outcomes: dict = field(default_factory=_category_counts)
    demand_stalls: int = 0
    prefetched_blocks: int = 0
    prefetched_demanded: int = 0
    unused_prefetch_evictions: int = 0
    evictions: int = 0
    forwarded: int = 0

    @property
    def demand_accesses(self):
        return sum(self.demand_outcomes.values())

    @property
    def hits(self):
        return self.demand_outcomes[Category.HIT]

    @property
    def misses(self):
        return self.demand_outcomes[Category.HIT_MSHR_MERGED] + self.demand_outcomes[Category.MISS_MSHR_AVAILABLE]

    @property
    def prefetch_requests(self):
        return sum(self.prefetch_outcomes.values())

    @property
    def accesses(self):
        return self.demand_accesses + self.prefetch_requests

    def add_cache(self, cache):
        for category in CATEGORIES:
            self.demand_outcomes[category] += cache.outcomes[AccessKind.DEMAND][category]
            self.prefetch_outcomes[category] += cache.outcomes[AccessKind.PREFETCH][category]
        self.demand_stalls += cache.demand_stalls
        self.prefetched_blocks += cache.prefetched_blocks
        self.prefetched_demanded += cache.prefetched_demanded
        self.unused_prefetch_evictions += cache.unused_prefetch_evictions
        self.evictions += cache.evictions
        self.forwarded += cache.forwarded()


class StatsLedger:
    """All counters of one simulation run.

    Pop-streak histograms are indexed by class 1, 2, 3 and 4+ (positions 0..3). `popstreak`
    counts pops, `popstreak_l1_miss` and `popstreak_dram_miss` count demand chunk requests that
    missed in L1, and in both L1 and L2, attributed to the pop that created them.
    """
    def __init__(self, policy='off', traversal_order='dfs'):
        self.policy = str(getattr(policy, 'value', policy))
        self.traversal_order = str(getattr(traversal_order, 'value', traversal_order))

        self.cycles = 0
        self.batches = []   # (start cycle, end cycle) of every ray batch
        self.rays = 0
        self.node_visits = 0
        self.max_nodes_per_ray = 0
        self.pushes = 0
        self.pops = 0

        self.popstreak = [0, 0, 0, 0]
        self.popstreak_l1_miss = [0, 0, 0, 0]
        self.popstreak_dram_miss = [0, 0, 0, 0]

        self.l1 = LevelStats()
        self.l2 = LevelStats()
        self.dram_reads = 0
        self.dram_demand_misses = 0
        self.dram_writebacks = 0
        self.dram_bw_util = 0.0

        self.prefetch_nodes_emitted = 0
        self.prefetch_chunks_queued = 0
        self.prefetch_chunks_overflow = 0
        self.prefetch_chunks_abandoned = 0
        self.prefetch_chunks_issued = 0

        self.status_cycles = {status: 0 for status in STATUSES}

        self.missing_pops = 0
        self.missing_pops_with_successor = 0

    def __repr__(self):
        return (f"StatsLedger(policy={self.policy}, cycles={self.cycles}, rays={self.rays}, "
                f"visits={self.node_visits})")

    def level(self, level):
        if level in ('l1', 1):
            return self.l1
        if level in ('l2', 2):
            return self.l2
        raise KeyError(f"Unknown cache level {level!r}, use 'l1' or 'l2'.")

    # ------------------------------------------------------------------------------------------
    # recording during the run
    def record_push(self):
        self.pushes += 1

    def record_pop(self, streak_class):
        self.pops += 1
        self.popstreak[streak_class - 1] += 1

    def record_demand_response(self, request):
        """Attributes a completed demand chunk to the pop-streak class of its creator."""
        if request.streak_class < 1:
            return
        if request.l1_category is not None and request.l1_category.is_miss:
            self.popstreak_l1_miss[request.streak_class - 1] += 1
            if request.dram_miss:
                self.popstreak_dram_miss[request.streak_class - 1] += 1

    def record_visit(self, missed, queue_nonempty):
        self.node_visits += 1
        if missed:
            self.missing_pops += 1
            if queue_nonempty:
                self.missing_pops_with_successor += 1

    def record_ray(self, visits):
        self.rays += 1
        self.max_nodes_per_ray = max(self.max_nodes_per_ray, visits)

    def record_status(self, counts, span=1):
        for status, n in counts.items():
            self.status_cycles[status] += n * span

    def record_batch(self, start, end):
        self.batches.append((start, end))
        self.cycles += end - start

    # ------------------------------------------------------------------------------------------
    def collect(self, hierarchy):
        """Copies the cache and DRAM counters of a finished (drained) hierarchy."""
        self.l1 = LevelStats()
        for cache in hierarchy.l1:
            self.l1.add_cache(cache)
        self.l2 = LevelStats()
        self.l2.add_cache(hierarchy.l2)
        self.dram_reads = hierarchy.dram.reads
        self.dram_demand_misses = hierarchy.dram_demand_fills
        self.dram_writebacks = hierarchy.dram.writebacks + hierarchy.l2.writebacks
        if self.cycles > 0:
            accepted = sum(hierarchy.dram.accepted_between(start, end) for start, end in self.batches)
            capacity = hierarchy.dram.config.requests_per_cycle * self.cycles
            self.dram_bw_util = accepted / capacity
        return self

    @property
    def avg_nodes_per_ray(self):
        return self.node_visits / self.rays if self.rays else 0.0

    def identity_report(self):
        """Conservation identities re-derived from the ledger counters."""
        report = []
        if self.l1.forwarded != self.l2.accesses:
            report.append(f"L1 misses forwarded ({self.l1.forwarded}) != L2 accesses ({self.l2.accesses})")
        if self.l2.forwarded != self.dram_reads:
            report.append(f"L2 misses forwarded ({self.l2.forwarded}) != DRAM reads ({self.dram_reads})")
        for name, level in (('L1', self.l1), ('L2', self.l2)):
            if level.hits + level.misses != level.demand_accesses:
                report.append(f"{name} hits + misses != demand accesses")
            if level.prefetched_demanded > level.prefetched_blocks:
                report.append(f"{name} prefetched blocks demanded ({level.prefetched_demanded}) > "
                              f"prefetched blocks ({level.prefetched_blocks})")
        if sum(self.popstreak) != self.pops:
            report.append(f"pop-streak classes ({sum(self.popstreak)}) != pops ({self.pops})")
        if sum(self.popstreak_l1_miss) != self.l1.misses:
            report.append(f"pop-streak L1 misses ({sum(self.popstreak_l1_miss)}) != L1 demand misses ({self.l1.misses})")
        if sum(self.popstreak_dram_miss) != self.dram_demand_misses:
            report.append(f"pop-streak DRAM misses ({sum(self.popstreak_dram_miss)}) != "
                          f"demand misses served by DRAM ({self.dram_demand_misses})")
        return report
