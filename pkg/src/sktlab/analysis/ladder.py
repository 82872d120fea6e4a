"""Integrability ladder ``l_{i+1} = l_i (n+1) / (n+2-l_i)`` and its exponent."""
from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class BootstrapLadder:
    n: int
    l1: float
    p0: float
    terms: list
    k: int  # terminal index (1-based): first l_k >= min(p0, n+2), or where the ladder stops
    unbounded: bool  # some computed term has (n+2-l_i)_+ = 0
    unbounded_index: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def next_term(l: float, n: int) -> float:
    """One rung; ``inf`` when ``(n+2-l)_+ = 0``."""
    gap = max(n + 2 - l, 0.0)
    return float("inf") if gap == 0 else l * (n + 1) / gap


def bootstrap_ladder(n: int, l1: float = 4.0, p0: float | None = None, max_terms: int = 1000) -> BootstrapLadder:
    """Climb from ``l1`` until ``l_k >= min(p0, n+2)``.

    A term with ``n + 2 - l_i <= 0`` would send the next rung to infinity; the
    first such index is recorded and the climb stops there.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not l1 > 2:
        raise ValueError("l1 must exceed 2")
    if p0 is None:
        p0 = n + 2.0
    if not p0 > n:
        raise ValueError("p0 must exceed n")
    target = min(p0, n + 2)
    terms = [float(l1)]
    unbounded_index = None
    while True:
        i = len(terms)
        l = terms[-1]
        if unbounded_index is None and n + 2 - l <= 0:
            unbounded_index = i
        if l >= target or unbounded_index is not None or i >= max_terms:
            break
        terms.append(next_term(l, n))
    return BootstrapLadder(n, float(l1), float(p0), terms, len(terms), unbounded_index is not None,
                           unbounded_index)


def q_bar(q: float, n: int) -> float:
    return 2.0 + 4.0 * q / (n * (q + 1))


def mu_exponent(q: float, n: int) -> float:
    """``2(q-1) / (qbar (q+1)) * (2/n + 1)`` with ``qbar = 2 + 4q/(n(q+1))``."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    return 2.0 * (q - 1) / (q_bar(q, n) * (q + 1)) * (2.0 / n + 1)
