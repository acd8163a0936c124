"""Metrics derived from one or two StatsLedger objects.

Undefined metrics (no prefetches, no misses, no baseline misses) are returned as None.
"""
import logging

from ..utils import SimulationError
from ..memhier.cache import Category, CATEGORIES
from .ledger import STREAK_CLASSES

logger = logging.getLogger(__name__)


def accuracy(ledger, level):
    """Fraction of prefetched 32B blocks that were later accessed by a demand load.

    Args:
        ledger (StatsLedger): run counters
        level (str): 'l1' or 'l2'

    Returns:
        float or None: None when no block was prefetched
    """
    stats = ledger.level(level)
    if stats.prefetched_blocks == 0:
        return None
    return stats.prefetched_demanded / stats.prefetched_blocks


def coverage(ledger, baseline_ledger, level):
    """Fraction of the baseline demand misses removed by prefetching.

    Args:
        ledger (StatsLedger): run with prefetching
        baseline_ledger (StatsLedger): same workload with policy off
        level (str): 'l1' or 'l2'

    Returns:
        float or None: (baseline misses - misses) / baseline misses; None when the baseline
                       has no misses. Negative values mean the prefetcher polluted the cache.
    """
    if ledger.node_visits != baseline_ledger.node_visits:
        raise ValueError(f"Coverage needs identical workloads: {ledger.node_visits} node visits vs "
                         f"{baseline_ledger.node_visits} in the baseline.")
    baseline_misses = baseline_ledger.level(level).misses
    if baseline_misses == 0:
        return None
    value = (baseline_misses - ledger.level(level).misses) / baseline_misses
    if value < 0:
        logger.warning(f"Negative {level} coverage ({value:.3f}) for policy {ledger.policy}: "
                       f"prefetching increased demand misses (cache pollution).")
    return value


def efficiency(ledger, level):
    """Fraction of prefetch requests that missed in the cache and found a free MSHR."""
    stats = ledger.level(level)
    if stats.prefetch_requests == 0:
        return None
    return stats.prefetch_outcomes[Category.MISS_MSHR_AVAILABLE] / stats.prefetch_requests


def mpki(ledger, level):
    """Demand misses per thousand node visits (node visits stand in for instructions)."""
    if ledger.node_visits == 0:
        return 0.0
    return 1000.0 * ledger.level(level).misses / ledger.node_visits


def pop_streak_classes(events):
    """Classifies every pop of an event stream by its position in the thread's current streak.

    Args:
        events (iterable): StackEvent objects (any mix of threads, in time order)

    Returns:
        list: class 1-4 (4 = 4th and later) for pops, None for pushes
    """
    streaks = {}
    classes = []
    for event in events:
        if event.kind == "push":
            streaks[event.thread_id] = 0
            classes.append(None)
        else:
            streaks[event.thread_id] = streaks.get(event.thread_id, 0) + 1
            classes.append(min(streaks[event.thread_id], 4))
    return classes


def pop_streak_histogram(events, miss_flags=None):
    """Histogram of pops over the classes 1, 2, 3 and 4+.

    Args:
        events (iterable): StackEvent stream
        miss_flags (iterable, optional): one boolean per pop (in stream order), True when the
                                         pop's node missed in both L1 and L2

    Returns:
        dict: {'all': [c1, c2, c3, c4plus], 'dram-miss': [...]}
    """
    histogram = {'all': [0, 0, 0, 0], 'dram-miss': [0, 0, 0, 0]}
    flags = iter(miss_flags) if miss_flags is not None else None
    for streak in pop_streak_classes(events):
        if streak is None:
            continue
        histogram['all'][streak - 1] += 1
        if flags is not None and next(flags):
            histogram['dram-miss'][streak - 1] += 1
    return histogram


def thread_status_breakdown(ledger):
    """Fractions of thread-cycles spent waiting for memory, computing, ready and done."""
    total = sum(ledger.status_cycles.values())
    if total == 0:
        return {status: 0.0 for status in ledger.status_cycles}
    return {status: n / total for status, n in ledger.status_cycles.items()}


def bfs_opportunity(ledger):
    """Fraction of demand-missing BFS pops whose queue still held a next node to prefetch."""
    if ledger.traversal_order != 'bfs' or ledger.missing_pops == 0:
        return None
    return ledger.missing_pops_with_successor / ledger.missing_pops


def response_breakdown(ledger, level, kind='demand'):
    """Fractions of the access categories (hit, MSHR hit merged/full, miss MSHR available/full).

    Args:
        ledger (StatsLedger): run counters
        level (str): 'l1' or 'l2'
        kind (str): 'demand' or 'prefetch'

    Returns:
        dict: category value -> fraction; all zeros when there was no access
    """
    stats = ledger.level(level)
    outcomes = stats.demand_outcomes if kind == 'demand' else stats.prefetch_outcomes
    total = sum(outcomes.values())
    return {category.value: (outcomes[category] / total if total else 0.0) for category in CATEGORIES}


def check_identities(ledger):
    """Raises SimulationError when the ledger violates a conservation identity."""
    report = ledger.identity_report()
    if report:
        raise SimulationError("Conservation identities violated: " + "; ".join(report))


CSV_COLUMNS = (
    'run_id', 'policy', 'cycles', 'speedup_vs_baseline',
    'l1_accuracy', 'l2_accuracy', 'l1_coverage', 'l2_coverage', 'l1_efficiency', 'l2_efficiency',
    'l1_mpki', 'l2_mpki', 'dram_reads', 'dram_writebacks', 'dram_bw_util',
    'popstreak_1', 'popstreak_2', 'popstreak_3', 'popstreak_4plus',
    'popstreak_miss_1', 'popstreak_miss_2', 'popstreak_miss_3', 'popstreak_miss_4plus',
    'avg_nodes_per_ray', 'max_nodes_per_ray',
)
EXTRA_COLUMNS = (
    'popstreak_dram_miss_1', 'popstreak_dram_miss_2', 'popstreak_dram_miss_3', 'popstreak_dram_miss_4plus',
    'status_waiting_mem', 'status_computing', 'status_ready', 'status_done', 'bfs_opportunity',
)


def metric_row(ledger, baseline_ledger=None, run_id=0):
    """One result row: the fixed CSV columns followed by the extra columns.

    Args:
        ledger (StatsLedger): finished run
        baseline_ledger (StatsLedger, optional): policy-off run of the same workload; without it
                                                 speedup and coverage are absent
        run_id (int, str): row identifier

    Returns:
        dict: column -> value (None for absent metrics)
    """
    row = {'run_id': run_id, 'policy': ledger.policy, 'cycles': ledger.cycles}
    if baseline_ledger is not None and ledger.cycles > 0:
        row['speedup_vs_baseline'] = baseline_ledger.cycles / ledger.cycles
    else:
        row['speedup_vs_baseline'] = None
    for level in ('l1', 'l2'):
        row[f'{level}_accuracy'] = accuracy(ledger, level)
    for level in ('l1', 'l2'):
        row[f'{level}_coverage'] = coverage(ledger, baseline_ledger, level) if baseline_ledger is not None else None
    for level in ('l1', 'l2'):
        row[f'{level}_efficiency'] = efficiency(ledger, level)
    for level in ('l1', 'l2'):
        row[f'{level}_mpki'] = mpki(ledger, level)
    row['dram_reads'] = ledger.dram_reads
    row['dram_writebacks'] = ledger.dram_writebacks
    row['dram_bw_util'] = ledger.dram_bw_util
    for name, counts in (('popstreak', ledger.popstreak), ('popstreak_miss', ledger.popstreak_l1_miss),
                         ('popstreak_dram_miss', ledger.popstreak_dram_miss)):
        for suffix, n in zip(STREAK_CLASSES, counts):
            row[f'{name}_{suffix}'] = n
    row['avg_nodes_per_ray'] = ledger.avg_nodes_per_ray
    row['max_nodes_per_ray'] = ledger.max_nodes_per_ray
    for status, n in ledger.status_cycles.items():
        row['status_' + status.replace('-', '_')] = n
    row['bfs_opportunity'] = bfs_opportunity(ledger)
    return {column: row[column] for column in CSV_COLUMNS + EXTRA_COLUMNS}
