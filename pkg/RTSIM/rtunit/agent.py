"""Per-thread traversal state and the DFS/BFS traversal step."""
from enum import Enum
from collections import deque
from dataclasses import dataclass, field

from ..utils import ConfigError, SimulationError
from ..bvh.layout import node_at
from ..intersect.kernels import MISS, ray_box_test, ray_triangle_test, make_hit
from ..scene.geometry import RayMode
from ..prefetch_base import BasePrefetcher


class TraversalOrder(str, Enum):
    DFS = "dfs"
    BFS = "bfs"


class EventKind(str, Enum):
    PUSH = "push"
    POP = "pop"


class ThreadStatus(str, Enum):
    WAITING_MEM = "waiting-mem"
    COMPUTING = "computing"
    READY = "ready"
    DONE = "done"


@dataclass
class RtUnitConfig:
    """RT unit parameters.

    Args:
        warp_size (int): threads per warp
        warp_buffer_size (int): warps resident in the RT unit
        traversal_order (str): 'dfs' (stack) or 'bfs' (queue)
        box_test_latency (int): cycles to test the children boxes of an internal node
        leaf_test_latency (int): cycles of a ray/triangle test
        max_stack_depth (int): stack or queue capacity; exceeding it is fatal
        near_child_first (bool): push hit children so the nearest one is popped first
    """
    warp_size: int = 32
    warp_buffer_size: int = 4
    traversal_order: TraversalOrder = TraversalOrder.DFS
    box_test_latency: int = 4
    leaf_test_latency: int = 8
    max_stack_depth: int = 64
    near_child_first: bool = False

    def validate(self):
        try:
            self.traversal_order = TraversalOrder(self.traversal_order)
        except ValueError:
            raise ConfigError(f"rt.traversal_order must be 'dfs' or 'bfs', got '{self.traversal_order}'.") from None
        for key in ('warp_size', 'warp_buffer_size', 'box_test_latency', 'leaf_test_latency', 'max_stack_depth'):
            if getattr(self, key) < 1:
                raise ConfigError(f"rt.{key} must be positive, got {getattr(self, key)}.")


@dataclass(frozen=True)
class StackEvent:
    thread_id: int
    kind: EventKind
    addr: int
    cycle: int = 0

    def __str__(self):
        return f"{self.cycle} {self.thread_id} {self.kind.value} 0x{self.addr:x}"


@dataclass
class StepResult:
    """Outcome of one step_thread call.

    Args:
        events (list): StackEvent objects in the order they happened
        request_addr (int): node address to fetch after a pop
        latency (int): cycles of the intersection tests started by a response
        prefetches (list): node addresses emitted by the thread's prefetcher
        done (bool): the thread finished its ray
    """
    events: list = field(default_factory=list)
    request_addr: int = None
    latency: int = 0
    prefetches: list = field(default_factory=list)
    done: bool = False


class TraversalAgent:
    """Traversal state of one thread.

    Args:
        thread_id (int): thread identifier
        ray (Ray): the ray traced by this thread
        order (TraversalOrder): DFS uses a stack, BFS a queue
        prefetcher (BasePrefetcher): per-thread prefetch engine
        max_stack_depth (int): container capacity
        box_test_latency (int): cycles per internal node
        leaf_test_latency (int): cycles per leaf
        near_child_first (bool): DFS push order by decreasing entry distance
    """
    def __init__(self, thread_id, ray, order=TraversalOrder.DFS, prefetcher=None, max_stack_depth=64,
                 box_test_latency=4, leaf_test_latency=8, near_child_first=False):
        self.thread_id = thread_id
        self.ray = ray
        self.order = TraversalOrder(order)
        self.prefetcher = prefetcher if prefetcher is not None else BasePrefetcher(leaf_test_latency=leaf_test_latency)
        self.max_stack_depth = max_stack_depth
        self.box_test_latency = box_test_latency
        self.leaf_test_latency = leaf_test_latency
        self.near_child_first = near_child_first

        self.container = [] if self.order == TraversalOrder.DFS else deque()
        self.min_thit = ray.t_max
        self.best = MISS
        self.status = ThreadStatus.READY
        self.pop_streak = 0
        self.pending_addr = None
        self.visits = 0
        self.initialized = False

        # RT unit bookkeeping
        self.outstanding = 0    # chunks of the pending node not yet returned
        self.unissued = 0       # chunks of the pending node not yet sent to memory
        self.pending_missed = False
        self.queue_nonempty_at_pop = False
        self.prefetch_queue = None

    def __repr__(self):
        return (f"TraversalAgent(thread={self.thread_id}, status={self.status.value}, "
                f"depth={len(self.container)}, visits={self.visits})")

    @property
    def stack(self):
        return self.container

    @property
    def done(self):
        return self.status == ThreadStatus.DONE

    @property
    def finished(self):
        """True when the ray needs no more node visits."""
        return len(self.container) == 0 or (self.ray.mode == RayMode.ANY_HIT and self.best.hit)

    def _push(self, addr, cycle):
        if len(self.container) >= self.max_stack_depth:
            raise SimulationError(f"Thread {self.thread_id}: traversal {'stack' if self.order == TraversalOrder.DFS else 'queue'} "
                                  f"overflow (max depth {self.max_stack_depth}) pushing 0x{addr:x}.")
        self.container.append(addr)
        self.pop_streak = 0
        event = StackEvent(self.thread_id, EventKind.PUSH, addr, cycle)
        return event, self.prefetcher.on_stack_event(event, self.container)


def init_traversal(agent, bvh, cycle=0):
    """Pushes the root when the ray hits the root box, otherwise finishes the thread with a miss.

    Args:
        agent (TraversalAgent): fresh agent
        bvh (FlatBvh): the tree
        cycle (int): current cycle

    Returns:
        list: StackEvent objects (the root push, or nothing)
    """
    if agent.initialized:
        raise SimulationError(f"Thread {agent.thread_id} is already initialized.")
    agent.initialized = True
    t = ray_box_test(agent.ray, bvh.root_aabb)
    if t is not None and t < agent.min_thit:
        event, _ = agent._push(bvh.root_addr, cycle)
        agent.status = ThreadStatus.READY
        return [event]
    agent.status = ThreadStatus.DONE
    return []


def step_thread(agent, bvh, mem_response=None, cycle=0):
    """Advances one traversal thread by one transition.

    Without a response, the thread pops the next node (stack top for DFS, queue head for BFS)
    and asks for its data, or finishes when nothing is left. With a response (the address of
    the node whose data arrived), the node is processed: for internal nodes the children boxes
    are tested and hit children with entry distance < min_thit are pushed in child order; for
    leaves the triangle is tested and the best hit is updated on t < min_thit, or on an equal t
    with a smaller primitive id.

    Args:
        agent (TraversalAgent): thread state
        bvh (FlatBvh): the tree
        mem_response (int, optional): address of the node whose footprint arrived
        cycle (int): current cycle

    Returns:
        StepResult: events, memory request, test latency and prefetches of the transition
    """
    if agent.status == ThreadStatus.DONE:
        raise SimulationError(f"Thread {agent.thread_id} stepped after it finished.")

    if mem_response is None:
        if agent.finished:
            agent.status = ThreadStatus.DONE
            return StepResult(done=True)
        if agent.order == TraversalOrder.DFS:
            addr = agent.container.pop()
        else:
            addr = agent.container.popleft()
        agent.pop_streak += 1
        agent.pending_addr = addr
        agent.queue_nonempty_at_pop = len(agent.container) > 0
        agent.status = ThreadStatus.WAITING_MEM
        event = StackEvent(agent.thread_id, EventKind.POP, addr, cycle)
        prefetches = agent.prefetcher.on_stack_event(event, agent.container)
        return StepResult(events=[event], request_addr=addr, prefetches=prefetches)

    if mem_response != agent.pending_addr:
        raise SimulationError(f"Thread {agent.thread_id}: response for 0x{mem_response:x} while "
                              f"waiting for {agent.pending_addr!r}.")
    node = node_at(bvh, agent.pending_addr)
    agent.pending_addr = None
    agent.visits += 1
    agent.status = ThreadStatus.COMPUTING
    result = StepResult()

    if node.is_leaf:
        result.latency = agent.leaf_test_latency
        result.prefetches = agent.prefetcher.on_leaf_test_start(agent.container)
        t = ray_triangle_test(agent.ray, node.triangle)
        if t is not None and (t < agent.min_thit or (t == agent.min_thit and agent.best.hit
                                                     and node.triangle.id < agent.best.primitive_id)):
            agent.min_thit = t
            agent.best = make_hit(agent.ray, node.triangle, t)
        return result

    result.latency = agent.box_test_latency
    hits = []
    for child in node.children:
        t = ray_box_test(agent.ray, child.aabb)
        if t is not None and t < agent.min_thit:
            hits.append((t, child.addr))
    if agent.near_child_first and agent.order == TraversalOrder.DFS:
        # farthest first so the nearest child ends on top; stable on equal distances
        hits = sorted(hits, key=lambda hit: -hit[0])
    push_cycle = cycle + agent.box_test_latency
    for _, addr in hits:
        event, prefetches = agent._push(addr, push_cycle)
        result.events.append(event)
        result.prefetches.extend(prefetches)
    return result


def step_thread_bfs(agent, bvh, mem_response=None, cycle=0):
    """step_thread for queue-based (BFS) agents: pops from the head, pushes at the tail."""
    if agent.order != TraversalOrder.BFS:
        raise SimulationError(f"Thread {agent.thread_id} is not a BFS agent.")
    return step_thread(agent, bvh, mem_response, cycle)


def complete_compute(agent):
    """Ends the intersection tests of a thread: it becomes ready or, when finished, done."""
    agent.status = ThreadStatus.DONE if agent.finished else ThreadStatus.READY
    return agent.status


@dataclass
class TraceResult:
    hit: object
    events: list
    visits: int
    prefetches: list  # (index of the triggering event, [addresses])


def trace_ray(ray, bvh, order=TraversalOrder.DFS, prefetcher=None, max_stack_depth=64,
              near_child_first=False, thread_id=0):
    """Traces one ray without timing (every memory response arrives immediately).

    Args:
        ray (Ray): the ray
        bvh (FlatBvh): the tree
        order (TraversalOrder): 'dfs' or 'bfs'
        prefetcher (BasePrefetcher, optional): per-thread prefetcher to observe the events
        max_stack_depth (int): container capacity
        near_child_first (bool): DFS push order by decreasing entry distance
        thread_id (int): id stamped on the events

    Returns:
        TraceResult: hit record, stack events, node visits and prefetch emissions
    """
    agent = TraversalAgent(thread_id, ray, order, prefetcher, max_stack_depth,
                           near_child_first=near_child_first)
    events = init_traversal(agent, bvh)
    prefetches = []
    cycle = 0
    while not agent.done:
        result = step_thread(agent, bvh, cycle=cycle)
        if result.done:
            break
        events.extend(result.events)
        if result.prefetches:
            prefetches.append((len(events) - 1, result.prefetches))
        result = step_thread(agent, bvh, mem_response=result.request_addr, cycle=cycle)
        if result.prefetches:
            prefetches.append((len(events) - 1, result.prefetches))
        events.extend(result.events)
        cycle += 1
        complete_compute(agent)
    return TraceResult(agent.best, events, agent.visits, prefetches)
