from .cache import (Cache, CacheConfig, AccessKind, AccessOutcome, Category, CATEGORIES,
                    MshrEntry, SectorState)
from .dram import Dram, DramConfig, bandwidth_utilization
from .hierarchy import MemoryHierarchy, MemRequest
