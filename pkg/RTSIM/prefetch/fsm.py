"""DFS prefetch state machine and prefetch cursor."""
from enum import IntEnum


class FsmState(IntEnum):
    S0 = 0  # after a push
    S1 = 1  # after the first pop of a streak
    S2 = 2  # after the second and later pops


class TtpFsm:
    """Three-state machine choosing the prefetch distance of every pop.

    A push moves any state to S0. Pops move S0 -> S1 (distance n1), S1 -> S2 (n2) and
    S2 -> S2 (n3).

    Args:
        intensity (tuple): (n1, n2, n3). Defaults to (1, 2, 16).
    """
    def __init__(self, intensity=(1, 2, 16)):
        self.intensity = tuple(intensity)
        self.state = FsmState.S0

    def __repr__(self):
        return f"TtpFsm(state={self.state.name}, intensity={self.intensity})"

    def push(self):
        self.state = FsmState.S0

    def pop(self):
        """Advances on a pop and returns the prefetch distance k of the new state."""
        self.state = FsmState.S1 if self.state == FsmState.S0 else FsmState.S2
        return self.intensity[self.state - 1]


class PrefetchCursor:
    """Index of the next stack entry to prefetch (stack indices grow towards the top).

    The cursor is reset to the top on every push and only moves down between pushes, so no
    entry is emitted twice between two pushes.
    """
    def __init__(self):
        self.cursor = -1
        self.target = -1

    def __repr__(self):
        return f"PrefetchCursor(cursor={self.cursor}, target={self.target})"

    def reset(self, top):
        self.cursor = top
        self.target = top

    def clamp(self, top):
        """Keeps the cursor inside a stack whose top index is `top` (after a pop)."""
        self.cursor = min(self.cursor, top)

    def emit(self, stack, k):
        """Emits un-emitted entries among the top `k` entries of `stack`.

        Args:
            stack (list): node addresses, bottom first
            k (int): prefetch distance

        Returns:
            list: addresses from the top downwards
        """
        top = len(stack) - 1
        self.clamp(top)
        self.target = max(top - k, -1)
        out = []
        while self.cursor > self.target:
            out.append(stack[self.cursor])
            self.cursor -= 1
        return out


def on_stack_event(fsm, cursor, event, stack):
    """Prefetch generation of one traversal thread for a push or pop.

    Args:
        fsm (TtpFsm): the thread's state machine
        cursor (PrefetchCursor): the thread's cursor
        event (StackEvent): push or pop of this thread
        stack (list): stack content after the event, bottom first

    Returns:
        list: node addresses to prefetch (none on a push)
    """
    if event.kind == "push":
        fsm.push()
        cursor.reset(len(stack) - 1)
        return []
    k = fsm.pop()
    return cursor.emit(stack, k)
