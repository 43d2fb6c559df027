"""Independent brute-force oracles used to freeze expected values.

Everything here is deliberately written from the definitions, without
importing the package under test, so the main engine can be checked
against an implementation that shares none of its code paths.
"""

from __future__ import annotations

import itertools
from collections import Counter


def bf_non_unanimous_fraction(rows: list[list[str]]) -> float:
    """Fraction of items whose raters did not all pick one label."""
    if not rows:
        raise ValueError("no items")
    disagreeing = sum(1 for row in rows if len(set(row)) > 1)
    return disagreeing / len(rows)


def bf_pd_per_rater(rows: list[list[str]]) -> float:
    """Percentage of disagreement from its per-rater definition.

    For each rater, count items where that rater's label differs from at
    least one other rater's label; sum over raters and divide by N * T.
    """
    if not rows:
        raise ValueError("no items")
    n = len(rows[0])
    total = 0
    for row in rows:
        for i, label in enumerate(row):
            if any(label != other for j, other in enumerate(row) if j != i):
                total += 1
    return total / (n * len(rows))


def bf_fleiss(rows: list[list[str]]) -> tuple[float, float, float | None]:
    """(P, Pe, kappa) from the counts-table definition, plain loops.

    kappa is None when every rating carries one label (Pe = 1).
    """
    categories = sorted({label for row in rows for label in row})
    n = len(rows[0])
    table = [[row.count(cat) for cat in categories] for row in rows]
    # per-item agreement
    p_items = []
    for counts in table:
        p_items.append((sum(c * c for c in counts) - n) / (n * (n - 1)))
    p_bar = sum(p_items) / len(p_items)
    # pooled category proportions
    total = n * len(rows)
    p_cat = [sum(table[i][j] for i in range(len(rows))) / total for j in range(len(categories))]
    p_e = sum(p * p for p in p_cat)
    if p_e >= 1.0:
        return p_bar, p_e, None
    return p_bar, p_e, (p_bar - p_e) / (1 - p_e)


def bf_k_score(labels: list[str]) -> float:
    n = len(labels)
    counts = Counter(labels)
    return (sum(c * c for c in counts.values()) - n) / (n * (n - 1))


def enumerate_signatures(n_raters: int) -> set[tuple[int, ...]]:
    """All multiplicity signatures = integer partitions of n_raters."""

    def partitions(n: int, cap: int) -> list[tuple[int, ...]]:
        if n == 0:
            return [()]
        out = []
        for first in range(min(n, cap), 0, -1):
            for rest in partitions(n - first, first):
                out.append((first,) + rest)
        return out

    return set(partitions(n_raters, n_raters))


def count_outcomes_brute_force(m: int, n: int) -> int:
    """Size of the rating-outcome space by explicit enumeration."""
    return sum(1 for _ in itertools.combinations_with_replacement(range(m), n))
