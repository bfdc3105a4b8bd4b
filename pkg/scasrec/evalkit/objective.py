"""List-level objective and its brute-force optimum."""

from itertools import permutations
from typing import List, Optional, Sequence, Tuple

from scasrec.core.errors import ContractError
from scasrec.evalkit.metrics import gt_rank, lcr_at_k, redundant_count

# Enumeration grows factorially; beyond this it is not a test oracle anymore.
MAX_ENUMERATION = 8


def objective_f(ranked: Sequence[int], cr: Sequence[float], gt_index: int, alpha: float) -> float:
    """``1/rank + LCR - alpha * |Z|`` of one list (0 reciprocal rank when absent)."""
    if alpha < 0:
        raise ContractError(f"alpha must be >= 0, got {alpha}")
    rank = gt_rank(ranked, gt_index)
    reciprocal = 0.0 if rank is None else 1.0 / rank
    return reciprocal + lcr_at_k(ranked, cr) - alpha * redundant_count(ranked, gt_index)


def enumerate_lists(n: int, max_len: Optional[int] = None) -> List[Tuple[int, ...]]:
    """Every ordered list of distinct indices from ``range(n)``, the empty list included."""
    if n > MAX_ENUMERATION:
        raise ContractError(f"refusing to enumerate lists over {n} > {MAX_ENUMERATION} items")
    limit = n if max_len is None else min(n, max_len)
    out: List[Tuple[int, ...]] = [()]
    for length in range(1, limit + 1):
        out.extend(permutations(range(n), length))
    return out


def optimal_lists(
    cr: Sequence[float], gt_index: int, alpha: float, tolerance: float = 1e-12
) -> Tuple[float, List[Tuple[int, ...]]]:
    """Best objective value over all lists and every list attaining it."""
    best = float("-inf")
    winners: List[Tuple[int, ...]] = []
    for candidate in enumerate_lists(len(cr)):
        value = objective_f(candidate, cr, gt_index, alpha)
        if value > best + tolerance:
            best, winners = value, [candidate]
        elif abs(value - best) <= tolerance:
            winners.append(candidate)
    return best, winners
