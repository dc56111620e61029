"""Worst-case operation count of the AO scheme."""
from __future__ import annotations

from ..errors import InvalidArgument


def complexity_estimate(k: int, m_bs: int, n: int, s: int, j: int, q: int) -> float:
    """``S (J (8K+1)^2 (M K + 6K) + Q (8K+N)^2 (N + 6K))``.

    ``s, j, q`` are the measured outer, precoder and reflection iteration
    counts (or their caps for an a-priori bound).
    """
    for name, v in (("k", k), ("m_bs", m_bs), ("n", n)):
        if v < 1:
            raise InvalidArgument(f"{name} must be >= 1")
    if min(s, j, q) < 0:
        raise InvalidArgument("iteration counts must be non-negative")
    bs = j * (8 * k + 1) ** 2 * (m_bs * k + 6 * k)
    ris = q * (8 * k + n) ** 2 * (n + 6 * k)
    return float(s * (bs + ris))


def complexity_from_trace(trace, k: int, m_bs: int, n: int) -> float:
    """Estimate with the mean inner counts of a finished run."""
    if not trace.inner_counts:
        return 0.0
    s = len(trace.inner_counts)
    j = sum(c[0] for c in trace.inner_counts) / s
    q = sum(c[1] for c in trace.inner_counts) / s
    return complexity_estimate(k, m_bs, n, s, j, q)
