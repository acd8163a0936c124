"""Sector cache with LRU replacement and per-line MSHRs."""
from enum import Enum
from collections import OrderedDict
from dataclasses import dataclass, field

from ..utils import ConfigError, SimulationError, format_size


class AccessKind(str, Enum):
    DEMAND = "demand"
    PREFETCH = "prefetch"


class Category(str, Enum):
    """Response category of one cache access."""
    HIT = "hit"
    HIT_MSHR_MERGED = "hit-mshr-merged"
    HIT_MSHR_FULL = "hit-mshr-full"
    MISS_MSHR_AVAILABLE = "miss-mshr-available"
    MISS_MSHR_FULL = "miss-mshr-full"

    @property
    def stalled(self):
        return self in (Category.HIT_MSHR_FULL, Category.MISS_MSHR_FULL)

    @property
    def is_miss(self):
        """True for accesses that did not find valid data (merged or forwarded)."""
        return self in (Category.HIT_MSHR_MERGED, Category.MISS_MSHR_AVAILABLE)


CATEGORIES = tuple(Category)


@dataclass
class CacheConfig:
    """Geometry and timing of one cache level.

    Args:
        capacity (int): bytes
        associativity (str, int): 'full' or number of ways
        line_size (int): bytes per line
        sector_size (int): bytes per sector
        latency (int): hit latency in cycles
        mshr_entries (int): number of outstanding lines
        mshr_merge (int): maximum subscribers per MSHR entry
    """
    capacity: int = 32 * 1024
    associativity: object = 'full'
    line_size: int = 128
    sector_size: int = 32
    latency: int = 20
    mshr_entries: int = 256
    mshr_merge: int = 8

    def validate(self, name='cache'):
        for key in ('capacity', 'line_size', 'sector_size', 'latency', 'mshr_entries', 'mshr_merge'):
            if getattr(self, key) < 1:
                raise ConfigError(f"{name}.{key} must be positive, got {getattr(self, key)}.")
        if self.line_size % self.sector_size != 0:
            raise ConfigError(f"{name}.line_size ({self.line_size}) must be divisible by "
                              f"{name}.sector_size ({self.sector_size}).")
        if self.capacity % self.line_size != 0:
            raise ConfigError(f"{name}.capacity ({format_size(self.capacity)}) must be divisible by "
                              f"{name}.line_size ({self.line_size}).")
        if self.associativity != 'full':
            if not isinstance(self.associativity, int) or self.associativity < 1:
                raise ConfigError(f"{name}.associativity must be 'full' or a positive integer, "
                                  f"got {self.associativity!r}.")
            if self.num_lines % self.associativity != 0:
                raise ConfigError(f"{name}.associativity ({self.associativity}) must divide the "
                                  f"number of lines ({self.num_lines}).")

    @property
    def num_lines(self):
        return self.capacity // self.line_size

    @property
    def ways(self):
        return self.num_lines if self.associativity == 'full' else self.associativity

    @property
    def num_sets(self):
        return self.num_lines // self.ways

    @property
    def sectors_per_line(self):
        return self.line_size // self.sector_size


@dataclass(frozen=True)
class AccessOutcome:
    """Category of an access and, for hits, the cycle its data is returned."""
    category: Category
    completion_cycle: int = None
    prefetched_use: bool = False  # demand hit on a prefetched sector not used before

    @property
    def stalled(self):
        return self.category.stalled


@dataclass
class SectorState:
    """Outstanding sector of an MSHR entry."""
    origin: AccessKind
    demanded: bool = False
    subscribers: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


@dataclass
class MshrEntry:
    line_addr: int
    sectors: dict = field(default_factory=dict) # sector index -> SectorState

    @property
    def sector_mask(self):
        mask = 0
        for s in self.sectors:
            mask |= 1 << s
        return mask

    @property
    def subscriber_count(self):
        return sum(len(state.subscribers) for state in self.sectors.values())

    @property
    def is_prefetch_only(self):
        return not any(state.demanded for state in self.sectors.values())


@dataclass
class _Line:
    valid: int = 0       # sector mask
    prefetched: int = 0  # sectors filled by a prefetch and not demanded since


class Cache:
    """One level of a sector cache.

    Lines are allocated on fill; MSHR entries track outstanding lines with per-sector state.
    Every access that does not stall is counted in `outcomes`; stalled prefetches are counted
    too (they are dropped by the caller), stalled demands are counted in `demand_stalls` and
    counted again when retried.

    Args:
        config (CacheConfig): geometry and timing
        name (str): level name used in messages
    """
    def __init__(self, config, name='cache'):
        config.validate(name)
        self.config = config
        self.name = name
        self.sets = [OrderedDict() for _ in range(config.num_sets)]
        self.mshr = {}

        self.outcomes = {kind: {category: 0 for category in CATEGORIES} for kind in AccessKind}
        self.demand_stalls = 0
        self.prefetched_blocks = 0
        self.prefetched_demanded = 0
        self.unused_prefetch_evictions = 0
        self.evictions = 0
        self.writebacks = 0 # lines are never dirty: the BVH image is read-only

    def __repr__(self):
        return f"Cache({self.name}, {format_size(self.config.capacity)}, ways={self.config.ways})"

    def split(self, addr):
        """Returns (line address, sector index) of a sector address."""
        if addr % self.config.sector_size != 0:
            raise SimulationError(f"{self.name}: unaligned access to 0x{addr:x} "
                                  f"(sector size {self.config.sector_size}).")
        offset = addr % self.config.line_size
        return addr - offset, offset // self.config.sector_size

    def _set(self, line_addr):
        return self.sets[(line_addr // self.config.line_size) % self.config.num_sets]

    def is_valid(self, addr):
        line_addr, sector = self.split(addr)
        line = self._set(line_addr).get(line_addr)
        return line is not None and bool(line.valid >> sector & 1)

    def access(self, addr, kind, cycle, subscriber=None):
        """Looks up one sector and classifies the access.

        Args:
            addr (int): sector-aligned byte address
            kind (AccessKind): demand or prefetch
            cycle (int): current cycle
            subscriber (object, optional): waiter to complete when an outstanding sector fills.
                                           Subscribers are limited by the merge capacity.

        Returns:
            AccessOutcome: category; hits carry the completion cycle
        """
        kind = AccessKind(kind)
        line_addr, sector = self.split(addr)
        cache_set = self._set(line_addr)
        line = cache_set.get(line_addr)

        if line is not None and line.valid >> sector & 1:
            prefetched_use = False
            if kind == AccessKind.DEMAND:
                cache_set.move_to_end(line_addr)
                if line.prefetched >> sector & 1:
                    line.prefetched &= ~(1 << sector)
                    self.prefetched_demanded += 1
                    prefetched_use = True
            return self._count(kind, AccessOutcome(Category.HIT, cycle + self.config.latency, prefetched_use))

        entry = self.mshr.get(line_addr)
        full = (entry is not None and subscriber is not None
                and entry.subscriber_count >= self.config.mshr_merge)

        if entry is not None and sector in entry.sectors:
            if full:
                return self._count(kind, AccessOutcome(Category.HIT_MSHR_FULL))
            state = entry.sectors[sector]
            if subscriber is not None:
                state.subscribers.append(subscriber)
            if kind == AccessKind.DEMAND:
                state.demanded = True
            return self._count(kind, AccessOutcome(Category.HIT_MSHR_MERGED))

        if entry is None:
            if len(self.mshr) >= self.config.mshr_entries:
                return self._count(kind, AccessOutcome(Category.MISS_MSHR_FULL))
            entry = MshrEntry(line_addr)
            self.mshr[line_addr] = entry
        elif full:
            return self._count(kind, AccessOutcome(Category.MISS_MSHR_FULL))

        state = SectorState(origin=kind, demanded=kind == AccessKind.DEMAND)
        if subscriber is not None:
            state.subscribers.append(subscriber)
        entry.sectors[sector] = state
        return self._count(kind, AccessOutcome(Category.MISS_MSHR_AVAILABLE))

    def forced_hit(self, cycle):
        """Counts a demand access served as a hit without consulting the cache state."""
        return self._count(AccessKind.DEMAND, AccessOutcome(Category.HIT, cycle + self.config.latency))

    def _count(self, kind, outcome):
        if outcome.stalled and kind == AccessKind.DEMAND:
            self.demand_stalls += 1
        else:
            self.outcomes[kind][outcome.category] += 1
        return outcome

    def pending(self, addr):
        """Returns the SectorState of an outstanding sector, or None."""
        line_addr, sector = self.split(addr)
        entry = self.mshr.get(line_addr)
        if entry is None:
            return None
        return entry.sectors.get(sector)

    def cancel(self, addr):
        """Drops an outstanding sector without filling it (abandoned prefetch)."""
        line_addr, sector = self.split(addr)
        entry = self.mshr.get(line_addr)
        if entry is None or sector not in entry.sectors:
            raise SimulationError(f"{self.name}: cancel of 0x{addr:x} without an MSHR entry.")
        del entry.sectors[sector]
        if not entry.sectors:
            del self.mshr[line_addr]

    def fill(self, line_addr, sectors, cycle):
        """Installs sectors of an outstanding line and releases their MSHR state.

        Args:
            line_addr (int): line address
            sectors (iterable): sector indices to install
            cycle (int): fill cycle

        Returns:
            list: (sector index, SectorState) pairs of the released sectors; their
                  subscribers are complete at `cycle`
        """
        entry = self.mshr.get(line_addr)
        sectors = list(sectors)
        if entry is None or any(s not in entry.sectors for s in sectors):
            raise SimulationError(f"{self.name}: fill of line 0x{line_addr:x} sectors {sectors} "
                                  f"without a matching MSHR entry (cycle {cycle}).")

        line = self._install(line_addr)
        released = []
        for sector in sectors:
            state = entry.sectors.pop(sector)
            line.valid |= 1 << sector
            if state.origin == AccessKind.PREFETCH:
                self.prefetched_blocks += 1
                if state.demanded:
                    self.prefetched_demanded += 1
                else:
                    line.prefetched |= 1 << sector
            released.append((sector, state))
        if not entry.sectors:
            del self.mshr[line_addr]
        return released

    def _install(self, line_addr):
        cache_set = self._set(line_addr)
        line = cache_set.get(line_addr)
        if line is None:
            if len(cache_set) >= self.config.ways:
                _, victim = cache_set.popitem(last=False)
                self.evictions += 1
                self.unused_prefetch_evictions += bin(victim.prefetched).count('1')
            line = _Line()
            cache_set[line_addr] = line
        cache_set.move_to_end(line_addr)
        return line

    def note_demand_use(self, addr):
        """Marks a prefetched sector as demanded through an upper level.

        Returns:
            bool: True when the sector was a prefetched block not demanded before
        """
        line_addr, sector = self.split(addr)
        line = self._set(line_addr).get(line_addr)
        if line is not None and line.prefetched >> sector & 1:
            line.prefetched &= ~(1 << sector)
            self.prefetched_demanded += 1
            return True
        state = self.pending(addr)
        if state is not None and state.origin == AccessKind.PREFETCH and not state.demanded:
            state.demanded = True
            return True
        return False

    @property
    def accesses(self):
        return {kind: sum(counts.values()) for kind, counts in self.outcomes.items()}

    def demand_misses(self):
        counts = self.outcomes[AccessKind.DEMAND]
        return counts[Category.HIT_MSHR_MERGED] + counts[Category.MISS_MSHR_AVAILABLE]

    def forwarded(self):
        """Number of sector requests sent to the next level."""
        return sum(counts[Category.MISS_MSHR_AVAILABLE] for counts in self.outcomes.values())
