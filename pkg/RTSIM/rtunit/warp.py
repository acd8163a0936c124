from collections import OrderedDict

from ..memhier.cache import AccessKind
from ..memhier.hierarchy import MemRequest


def coalesce(requests):
    """Merges chunk requests of one warp that target the same address.

    Args:
        requests (list): MemRequest objects in creation order

    Returns:
        list: one MemRequest per distinct address, in first-occurrence order, carrying the
              subscribers of all merged requests. The first request of each address keeps
              its pop-streak class.
    """
    merged = OrderedDict()
    for request in requests:
        first = merged.get(request.addr)
        if first is None:
            merged[request.addr] = MemRequest(request.addr, request.kind, request.sm, request.warp_id,
                                              list(request.subscribers), request.streak_class)
        else:
            first.subscribers.extend(request.subscribers)
    return list(merged.values())


class Warp:
    """Group of traversal threads sharing the memory port of an RT unit.

    Args:
        warp_id (int): identifier, unique per simulation
        agents (list): TraversalAgent objects
        sm (int): SM the warp runs on
    """
    def __init__(self, warp_id, agents, sm=0):
        self.warp_id = warp_id
        self.agents = list(agents)
        self.sm = sm
        self.demand = OrderedDict() # chunk address -> MemRequest, not yet issued
        self.prefetch_pending = 0   # chunks in the prefetch queues of the threads
        self._prefetch_next = 0

    def __repr__(self):
        return f"Warp({self.warp_id}, sm={self.sm}, threads={len(self.agents)}, active={self.active})"

    @property
    def active(self):
        return any(not agent.done for agent in self.agents)

    def add_demand(self, requests):
        """Queues demand chunk requests, coalescing with requests still waiting for the port."""
        for request in coalesce(requests):
            pending = self.demand.get(request.addr)
            if pending is None:
                self.demand[request.addr] = request
            else:
                pending.subscribers.extend(request.subscribers)

    def pop_demand(self):
        _, request = self.demand.popitem(last=False)
        return request

    def retry_demand(self, request):
        """Puts a stalled demand request back at the head of the queue."""
        pending = self.demand.get(request.addr)
        if pending is not None:
            request.subscribers.extend(pending.subscribers)
        self.demand[request.addr] = request
        self.demand.move_to_end(request.addr, last=False)

    def queue_prefetch(self, agent, chunk):
        """Appends a prefetch chunk to a thread's bounded queue.

        Returns:
            bool: True when the queue was full and its oldest chunk was dropped
        """
        queue = agent.prefetch_queue
        overflow = queue.maxlen is not None and len(queue) == queue.maxlen
        queue.append(chunk)
        if not overflow:
            self.prefetch_pending += 1
        return overflow

    def has_pending(self):
        return bool(self.demand) or self.prefetch_pending > 0

    def pop_prefetch(self):
        """Takes the next prefetch chunk, round-robin over the threads of the warp.

        Returns:
            MemRequest or None
        """
        n = len(self.agents)
        for i in range(n):
            agent = self.agents[(self._prefetch_next + i) % n]
            if agent.prefetch_queue:
                self._prefetch_next = (self._prefetch_next + i + 1) % n
                self.prefetch_pending -= 1
                return MemRequest(agent.prefetch_queue.popleft(), AccessKind.PREFETCH, self.sm, self.warp_id)
        return None

    def drop_prefetches(self):
        """Clears the prefetch queues; returns the number of dropped chunks."""
        dropped = 0
        for agent in self.agents:
            if agent.prefetch_queue:
                dropped += len(agent.prefetch_queue)
                agent.prefetch_queue.clear()
        self.prefetch_pending = 0
        return dropped


def _has(warp, kind):
    if kind == AccessKind.DEMAND:
        return bool(warp.demand)
    if kind == AccessKind.PREFETCH:
        return warp.prefetch_pending > 0
    return warp.has_pending()


def select_warp(warp_buffer, last_served=None, kind=None):
    """Round-robin warp selection among warps with pending requests.

    Args:
        warp_buffer (list): resident Warp objects
        last_served (int, optional): id of the warp served last
        kind (AccessKind, optional): only consider warps with pending requests of this kind

    Returns:
        int or None: id of the next warp to serve (the first pending id after `last_served`,
                     wrapping around), None when no warp has pending requests
    """
    pending = sorted(warp.warp_id for warp in warp_buffer if _has(warp, kind))
    if not pending:
        return None
    if last_served is not None:
        for warp_id in pending:
            if warp_id > last_served:
                return warp_id
    return pending[0]
