"""
Single-family p-value adjustments that control the family-wise error rate.

Every adjuster takes a :class:`PValueTable` and returns an
:class:`AdjustmentResult` in the table's own row order. Ties in the raw
p-values are broken by input position, so results are deterministic.

Adjusted p-values are reported rather than bare decisions: a hypothesis is
rejected at level ``alpha`` exactly when its adjusted value is ``<= alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "PValueTable",
    "AdjustedEntry",
    "AdjustmentResult",
    "global_null_fwer",
    "bonferroni_adjust",
    "holm_adjust",
    "hochberg_adjust",
    "sidak_holm_adjust",
    "decide",
    "adjust",
    "METHODS",
    "normalize_method",
]


@dataclass(frozen=True)
class PValueTable:
    """Named hypotheses with unadjusted p-values, in presentation order."""

    entries: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        cleaned = []
        seen = set()
        for item in self.entries:
            hid, p = item
            if not isinstance(hid, str) or not hid:
                raise InputError(f"hypothesis id must be a non-empty string, got {hid!r}")
            if hid in seen:
                raise InputError(f"duplicate hypothesis id {hid!r}")
            seen.add(hid)
            p = float(p)
            if not (0.0 <= p <= 1.0):
                raise InputError(f"p-value for {hid!r} outside [0, 1]: {p!r}")
            cleaned.append((hid, p))
        object.__setattr__(self, "entries", tuple(cleaned))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]]) -> "PValueTable":
        return cls(tuple(pairs))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "PValueTable":
        return cls(tuple(mapping.items()))

    @classmethod
    def from_values(cls, pvalues: Sequence[float], prefix: str = "h") -> "PValueTable":
        """Build a table with generated ids ``h1, h2, ...``."""
        return cls(tuple((f"{prefix}{i + 1}", p) for i, p in enumerate(pvalues)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(hid for hid, _ in self.entries)

    @property
    def pvalues(self) -> np.ndarray:
        return np.array([p for _, p in self.entries], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)

    def subset(self, ids: Sequence[str]) -> "PValueTable":
        """Rows for ``ids`` in the order given; unknown ids raise InputError."""
        lookup = self.as_dict()
        missing = [hid for hid in ids if hid not in lookup]
        if missing:
            raise InputError(f"hypothesis id(s) not in table: {', '.join(missing)}")
        return PValueTable(tuple((hid, lookup[hid]) for hid in ids))


@dataclass(frozen=True)
class AdjustedEntry:
    hypothesis_id: str
    p_raw: float
    p_adjusted: float
    rejected: bool
    rank: int


@dataclass(frozen=True)
class AdjustmentResult:
    entries: tuple[AdjustedEntry, ...]
    method: str
    alpha: float

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(e.hypothesis_id for e in self.entries)

    @property
    def adjusted(self) -> np.ndarray:
        return np.array([e.p_adjusted for e in self.entries], dtype=float)

    @property
    def rejected(self) -> np.ndarray:
        return np.array([e.rejected for e in self.entries], dtype=bool)

    @property
    def rejected_ids(self) -> tuple[str, ...]:
        return tuple(e.hypothesis_id for e in self.entries if e.rejected)

    def adjusted_dict(self) -> dict[str, float]:
        return {e.hypothesis_id: e.p_adjusted for e in self.entries}


def global_null_fwer(m: int, alpha: float) -> float:
    """Chance of at least one false rejection among ``m`` independent tests at ``alpha``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return 0.0
    return 1.0 - (1.0 - alpha) ** m


def _rejects(p_adjusted: float, alpha: float) -> bool:
    return alpha > 0 and p_adjusted <= alpha


def _sort_order(p: np.ndarray) -> np.ndarray:
    # stable: ties keep input order
    return np.argsort(p, kind="stable")


def _build(table: PValueTable, adjusted_sorted: np.ndarray, order: np.ndarray,
           method: str, alpha: float) -> AdjustmentResult:
    alpha = _check_alpha(alpha)
    m = len(table)
    adjusted = np.empty(m)
    ranks = np.empty(m, dtype=int)
    adjusted[order] = np.minimum(adjusted_sorted, 1.0)
    ranks[order] = np.arange(1, m + 1)
    entries = tuple(
        AdjustedEntry(hid, p, float(adjusted[i]), _rejects(float(adjusted[i]), alpha), int(ranks[i]))
        for i, (hid, p) in enumerate(table.entries)
    )
    return AdjustmentResult(entries, method, alpha)


def bonferroni_adjust(table: PValueTable, alpha: float = 0.05) -> AdjustmentResult:
    """Multiply every p-value by the family size, capped at 1."""
    p = table.pvalues
    order = _sort_order(p)
    return _build(table, p[order] * len(p), order, "bonferroni", alpha)


def holm_adjust(table: PValueTable, alpha: float = 0.05) -> AdjustmentResult:
    """Holm step-down: ``max_{j<=i} (m - j + 1) p_(j)``."""
    p = table.pvalues
    m = len(p)
    order = _sort_order(p)
    multipliers = np.arange(m, 0, -1)
    return _build(table, np.maximum.accumulate(p[order] * multipliers) if m else p,
                  order, "holm", alpha)


def hochberg_adjust(table: PValueTable, alpha: float = 0.05) -> AdjustmentResult:
    """Hochberg step-up: ``min_{j>=i} (m - j + 1) p_(j)``.

    Only guaranteed to control the FWER for independent or positively
    dependent test statistics.
    """
    p = table.pvalues
    m = len(p)
    order = _sort_order(p)
    if m == 0:
        return _build(table, p, order, "hochberg", alpha)
    scaled = p[order] * np.arange(m, 0, -1)
    stepped = np.minimum.accumulate(scaled[::-1])[::-1]
    return _build(table, stepped, order, "hochberg", alpha)


def sidak_holm_adjust(table: PValueTable, alpha: float = 0.05) -> AdjustmentResult:
    """Step-down Sidak: ``max_{j<=i} 1 - (1 - p_(j))^(m - j + 1)``."""
    p = table.pvalues
    m = len(p)
    order = _sort_order(p)
    if m == 0:
        return _build(table, p, order, "sidak_holm", alpha)
    exponents = np.arange(m, 0, -1)
    # -expm1(k*log1p(-p)) keeps precision for tiny p
    with np.errstate(divide="ignore"):
        single = -np.expm1(exponents * np.log1p(-p[order]))
    return _build(table, np.maximum.accumulate(single), order, "sidak_holm", alpha)


def decide(result: AdjustmentResult, alpha: float) -> AdjustmentResult:
    """Re-threshold an adjustment at a new ``alpha`` (reject iff adjusted <= alpha)."""
    alpha = _check_alpha(alpha)
    entries = tuple(replace(e, rejected=_rejects(e.p_adjusted, alpha)) for e in result.entries)
    return AdjustmentResult(entries, result.method, alpha)


METHODS: dict[str, Callable[..., AdjustmentResult]] = {
    "bonferroni": bonferroni_adjust,
    "holm": holm_adjust,
    "hochberg": hochberg_adjust,
    "sidak_holm": sidak_holm_adjust,
}


def normalize_method(name: str) -> str:
    """Accept ``sidak-holm`` / ``Sidak_Holm`` style spellings."""
    return name.strip().lower().replace("-", "_")


def adjust(table: PValueTable, method: str = "holm", alpha: float = 0.05) -> AdjustmentResult:
    key = normalize_method(method)
    try:
        fn = METHODS[key]
    except KeyError:
        raise InputError(
            f"unknown adjustment method {method!r}; choose from {', '.join(sorted(METHODS))}"
        ) from None
    return fn(table, alpha)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0):
        raise InputError(f"alpha must be in [0, 1], got {alpha!r}")
    return alpha
