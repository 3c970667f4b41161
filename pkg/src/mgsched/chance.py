"""Deterministic equivalent of the spinning-reserve chance constraint.

Given the net-demand sequence ``e`` and its balance expectation ``E``, a
reserve ``R`` covers every outcome at level ``u`` with ``u * q - E <= R``.
The probability covered is the achieved confidence; requiring it to reach a
preset level ``gamma`` turns the probabilistic reserve constraint into a
plain per-period quantile threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

from .sequences import ProbSeq

__all__ = ["ChanceCheck", "achieved_confidence", "min_reserve"]


@dataclass(frozen=True)
class ChanceCheck:
    """Reserve adequacy query against one period's net-demand sequence."""

    gamma: float
    el_seq: ProbSeq
    expected_el: float

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")


def achieved_confidence(check: ChanceCheck, total_reserve: float) -> float:
    """Probability that ``total_reserve`` covers the net-demand deviation.

    Sums the probabilities of all levels ``u`` with
    ``u * q - expected_el <= total_reserve``.  Because levels grow with the
    index, the covered set is a prefix; the sum is accumulated in index order
    so results agree exactly with a direct term-by-term enumeration.
    """
    if total_reserve < 0:
        raise ValueError("total_reserve must be >= 0")
    q = check.el_seq.step
    e = check.expected_el
    total = 0.0
    for u, prob in enumerate(check.el_seq.probs):
        if u * q - e > total_reserve:
            break
        total += float(prob)
    return total


def min_reserve(check: ChanceCheck) -> float:
    """Smallest reserve whose achieved confidence reaches ``gamma``.

    Returns ``u* * q - expected_el`` clipped at zero, where ``u*`` is the
    first index whose cumulative probability reaches ``gamma`` (ties accept).
    Full coverage always exists, so the query cannot fail.
    """
    q = check.el_seq.step
    probs = check.el_seq.probs
    cum = 0.0
    u_star = probs.size - 1
    for u, prob in enumerate(probs):
        cum += float(prob)
        if cum >= check.gamma:
            u_star = u
            break
    return max(0.0, u_star * q - check.expected_el)
