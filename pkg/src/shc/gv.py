"""Feasible minimum pairwise Hamming distance for C codewords of length q.

The bound guarantees that C codewords of length q with minimum pairwise
distance d exist whenever 2^q / C <= sum_{i=0}^{d-1} binom(q, i).  All
arithmetic is exact integer arithmetic, so q = 64 and beyond are safe.
"""

from math import comb

from .core import InfeasibleError, ValidationError

__all__ = ["compute_min_distance"]


def compute_min_distance(q: int, C: int) -> int:
    """Smallest d in {1..q} such that 2^q <= C * sum_{i<d} binom(q, i).

    For C == 1 there are no pairs to separate and the full length q is
    returned.  Raises :class:`InfeasibleError` when C > 2^q, i.e. there are
    not even C distinct codewords of length q.
    """
    if q < 1:
        raise ValidationError(f"code length must be positive, got {q}")
    if C < 1:
        raise ValidationError(f"class count must be positive, got {C}")
    if C > 2**q:
        raise InfeasibleError(f"{C} classes do not fit in {{-1,+1}}^{q} ({2**q} codewords)")
    if C == 1:
        return q
    total = 2**q
    ball = 0
    for d in range(1, q + 1):
        ball += comb(q, d - 1)
        if total <= C * ball:
            return d
    # Unreachable: d = q gives ball = 2^q - 1 and C >= 2 always satisfies
    # 2^q <= C * (2^q - 1).
    raise InfeasibleError(f"no feasible minimum distance for q={q}, C={C}")
