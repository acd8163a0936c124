from .agent import (TraversalAgent, TraversalOrder, EventKind, ThreadStatus, RtUnitConfig, StackEvent,
                    StepResult, TraceResult, init_traversal, step_thread, step_thread_bfs, complete_compute,
                    trace_ray)
from .warp import Warp, coalesce, select_warp
from .rt_unit import RtUnit, check_drained
