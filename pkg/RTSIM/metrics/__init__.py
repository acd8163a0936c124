from .ledger import StatsLedger, LevelStats, STREAK_CLASSES, STATUSES
from .formulas import (accuracy, coverage, efficiency, mpki, pop_streak_classes, pop_streak_histogram,
                       thread_status_breakdown, bfs_opportunity, response_breakdown, check_identities,
                       metric_row, CSV_COLUMNS, EXTRA_COLUMNS)
