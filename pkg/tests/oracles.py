"""Brute-force reference implementations used only by the tests.

Nothing here imports fwerkit internals; all arithmetic is exact (Fraction).
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def _stat(col, labels, statistic):
    """Exact |statistic| (as a square, t statistics compare via t^2)."""
    g1 = [Fraction(repr(float(v))) for v, l in zip(col, labels) if l and v is not None]
    g0 = [Fraction(repr(float(v))) for v, l in zip(col, labels) if not l and v is not None]
    if not g1 or not g0:
        return Fraction(0)
    m1 = sum(g1) / len(g1)
    m0 = sum(g0) / len(g0)
    diff = m1 - m0
    if statistic == "mean_difference":
        return diff * diff
    if len(g1) < 2 or len(g0) < 2:
        return Fraction(0)
    v1 = sum((x - m1) ** 2 for x in g1) / (len(g1) - 1)
    v0 = sum((x - m0) ** 2 for x in g0) / (len(g0) - 1)
    se2 = v1 / len(g1) + v0 / len(g0)
    if se2 == 0:
        return Fraction(0)
    return diff * diff / se2


def brute_force_wy(columns, group, statistic="mean_difference"):
    """Exhaustive free step-down min-p, straight from the textbook steps.

    ``columns`` is a list of outcome columns (lists, ``None`` = missing),
    ``group`` a list of 0/1 labels. Returns (raw, adjusted) as floats; an
    outcome with fewer than 2 observations in a group is left out of the
    family and reported as ``None``.
    """
    usable = [j for j, col in enumerate(columns)
              if all(sum(1 for v, g in zip(col, group) if g == lab and v is not None) >= 2 for lab in (0, 1))]
    if len(usable) < len(columns):
        raw, adjusted = brute_force_wy([columns[j] for j in usable], group, statistic) if usable else ([], [])
        out_raw, out_adj = [None] * len(columns), [None] * len(columns)
        for k, j in enumerate(usable):
            out_raw[j], out_adj[j] = raw[k], adjusted[k]
        return out_raw, out_adj
    n = len(group)
    k = sum(group)
    assignments = []
    for treated in itertools.combinations(range(n), k):
        s = set(treated)
        assignments.append([1 if i in s else 0 for i in range(n)])
    N = len(assignments)
    m = len(columns)

    constant = []
    for col in columns:
        vals = [v for v in col if v is not None]
        constant.append(len(set(vals)) == 1)

    # statistic of every outcome under every assignment
    S = [[_stat(col, a, statistic) for col in columns] for a in assignments]
    observed = [_stat(col, group, statistic) for col in columns]

    def pval(j, s):
        if constant[j]:
            return Fraction(1)
        return Fraction(sum(1 for row in S if row[j] >= s), N)

    raw = [pval(j, observed[j]) for j in range(m)]
    # resampled p-values, one row per assignment
    P = [[pval(j, row[j]) for j in range(m)] for row in S]

    order = sorted(range(m), key=lambda j: (raw[j], j))
    adjusted = [None] * m
    running = Fraction(0)
    for i, j in enumerate(order):
        still_in = order[i:]
        hits = sum(1 for row in P if min(row[r] for r in still_in) <= raw[j])
        running = max(running, Fraction(hits, N))
        adjusted[j] = max(running, raw[j])
    return [float(x) for x in raw], [float(min(x, 1)) for x in adjusted]


def holm_by_definition(pvalues, alpha):
    """Holm's rejection set by literally stepping through the ordered p's."""
    m = len(pvalues)
    order = sorted(range(m), key=lambda j: (pvalues[j], j))
    rejected = set()
    for i, j in enumerate(order):
        if pvalues[j] <= alpha / (m - i):
            rejected.add(j)
        else:
            break
    return rejected


def hochberg_by_definition(pvalues, alpha):
    """Hochberg's rejection set: find the largest i with p_(i) <= alpha/(m-i+1)."""
    m = len(pvalues)
    order = sorted(range(m), key=lambda j: (pvalues[j], j))
    cut = -1
    for i, j in enumerate(order):
        if pvalues[j] <= alpha / (m - i):
            cut = i
    return set(order[: cut + 1])


def nan_to_none(values):
    return [None if v != v else float(v) for v in values]
