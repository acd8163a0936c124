from ..prefetch_base import PrefetchPolicy
from ..memhier.cache import AccessKind


def streak_class(pop_streak):
    """Maps a pop-streak position to its class 1, 2, 3 or 4 (4 stands for 4th and later)."""
    return min(pop_streak, 4)


def apply_perfect_mode(mode, request):
    """Forces L1 hits for the pops a perfect-traversal limit mode covers.

    perfect-upward covers 2nd and later pops after a push, perfect-downward covers 1st pops.
    Other requests, and every request under other policies, are returned unchanged.

    Args:
        mode (PrefetchPolicy): active policy
        request (MemRequest): demand chunk request carrying its pop-streak class

    Returns:
        MemRequest: the same request, with `forced_hit` set when the mode applies
    """
    if request.kind != AccessKind.DEMAND or request.streak_class < 1:
        return request
    mode = PrefetchPolicy(mode)
    if mode == PrefetchPolicy.PERFECT_UPWARD and request.streak_class >= 2:
        request.forced_hit = True
    elif mode == PrefetchPolicy.PERFECT_DOWNWARD and request.streak_class == 1:
        request.forced_hit = True
    return request
