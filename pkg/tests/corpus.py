"""Deterministic corpus of small data matrices for exhaustive-mode checks."""

from __future__ import annotations

import numpy as np


def small_matrices(count: int = 400, seed: int = 20240501):
    """Yield ``(group, columns)`` with n in 4..8, m in 1..3, each group >= 2.

    Columns mix coarse integer values (many ties), rounded decimals,
    duplicated columns, constant columns and scattered missing cells
    (``None``), keeping at least two observations per group.
    """
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(4, 9))
        n1 = int(rng.integers(2, n - 1))
        group = [1] * n1 + [0] * (n - n1)
        rng.shuffle(group)
        m = int(rng.integers(1, 4))
        columns = []
        for j in range(m):
            kind = rng.integers(0, 5)
            if kind == 0:
                col = [float(v) for v in rng.integers(0, 3, size=n)]
            elif kind == 1 and columns:
                col = list(columns[int(rng.integers(0, len(columns)))])
            elif kind == 2:
                col = [1.5] * n
            else:
                shift = rng.normal() * 2
                col = [round(float(rng.normal() + shift * g), 3) for g in group]
            if rng.random() < 0.3:
                col = _punch_holes(col, group, rng)
            columns.append(col)
        yield group, columns


def _punch_holes(col, group, rng):
    col = list(col)
    for g in (0, 1):
        idx = [i for i, lab in enumerate(group) if lab == g and col[i] is not None]
        spare = len(idx) - 2
        if spare > 0 and rng.random() < 0.7:
            col[int(rng.choice(idx))] = None
    return col


def to_array(columns):
    return np.array([[np.nan if v is None else v for v in col] for col in columns], dtype=float).T
