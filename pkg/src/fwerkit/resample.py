"""
Westfall-Young free step-down (min-p) adjustment by resampling.

Units are relabelled as whole rows, so whatever correlation exists between
outcomes is carried into every resample. Three resampling schemes are
available:

``permutation``
    random relabelling that keeps group sizes; the observed labelling is
    counted as one of the ``B + 1`` draws.
``exhaustive``
    every distinct labelling with the observed group sizes, exactly once.
``bootstrap``
    units drawn with replacement from group-centred data (which imposes the
    null), with p-values from the Welch t reference distribution.

Random draws are organised in fixed-size chunks, each with its own
counter-based Philox stream keyed on ``(seed, chunk index)``. The output
depends only on ``(seed, B, scheme)``, whatever the number of worker threads.

Resampling happens under the complete null. With many false nulls this is
only valid when subset pivotality holds, i.e. when the joint law of the
true-null statistics does not depend on which other nulls are false.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InputError, ResamplingError

__all__ = [
    "DataMatrix",
    "ResamplingSpec",
    "RawPValue",
    "WYEntry",
    "WYResult",
    "raw_pvalues",
    "wy_minp_adjust",
    "resample_stream",
    "n_assignments",
]

SCHEMES = ("permutation", "bootstrap", "exhaustive")
STATISTICS = ("mean_difference", "t_welch")
CHUNK = 512
# relative slack when comparing resampled |statistic| with the observed one,
# so that exact ties survive floating-point noise
TIE_RTOL = 1e-10
VAR_RTOL = 1e-10


@dataclass(frozen=True)
class DataMatrix:
    """Units x outcomes with a binary group label (``True`` = treated).

    ``values`` holds NaN for missing cells.
    """

    group: np.ndarray
    values: np.ndarray
    names: tuple[str, ...]
    unit_ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        group = np.asarray(self.group).astype(bool)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        names = tuple(self.names)
        if group.ndim != 1:
            raise InputError("group must be one-dimensional")
        n = group.shape[0]
        if n < 2:
            raise InputError("a data matrix needs at least 2 units")
        if values.shape[0] != n:
            raise InputError(f"values have {values.shape[0]} rows but there are {n} units")
        if values.shape[1] != len(names):
            raise InputError(f"{values.shape[1]} outcome columns but {len(names)} names")
        if len(set(names)) != len(names):
            raise InputError("outcome names must be unique")
        if group.all() or not group.any():
            raise InputError("both groups must be non-empty")
        unit_ids = None if self.unit_ids is None else tuple(str(u) for u in self.unit_ids)
        if unit_ids is not None and len(unit_ids) != n:
            raise InputError("unit_ids length does not match the number of units")
        group.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "unit_ids", unit_ids)

    @property
    def n_units(self) -> int:
        return self.group.shape[0]

    @property
    def n_treated(self) -> int:
        return int(self.group.sum())

    def select(self, names: Sequence[str]) -> "DataMatrix":
        index = {name: j for j, name in enumerate(self.names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise InputError(f"outcome(s) not in data matrix: {', '.join(missing)}")
        cols = [index[n] for n in names]
        return DataMatrix(self.group, self.values[:, cols], tuple(names), self.unit_ids)


@dataclass(frozen=True)
class ResamplingSpec:
    scheme: str = "permutation"
    B: int = 10_000
    seed: int = 0
    statistic: str = "mean_difference"
    exhaustive_cap: int = 200_000

    def __post_init__(self):
        scheme = self.scheme.strip().lower()
        statistic = self.statistic.strip().lower().replace("-", "_")
        if scheme not in SCHEMES:
            raise InputError(f"unknown resampling scheme {self.scheme!r}")
        if statistic not in STATISTICS:
            raise InputError(f"unknown statistic {self.statistic!r}")
        if int(self.B) < 1:
            raise InputError("B must be a positive integer")
        if not (0 <= int(self.seed) < 2**64):
            raise InputError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "scheme", scheme)
        object.__setattr__(self, "statistic", statistic)
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class RawPValue:
    outcome: str
    p: Optional[float]
    error: Optional[str] = None


@dataclass(frozen=True)
class WYEntry:
    outcome: str
    raw_p: Optional[float]
    adjusted_p: Optional[float]
    error: Optional[str] = None


@dataclass(frozen=True)
class WYResult:
    entries: tuple[WYEntry, ...]
    B_used: int
    scheme: str
    seed: int

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def adjusted(self) -> np.ndarray:
        return np.array([np.nan if e.adjusted_p is None else e.adjusted_p for e in self.entries])

    @property
    def raw(self) -> np.ndarray:
        return np.array([np.nan if e.raw_p is None else e.raw_p for e in self.entries])


# -- resample generation ------------------------------------------------------


def n_assignments(data: DataMatrix) -> int:
    """Number of distinct labellings with the observed group sizes."""
    return math.comb(data.n_units, data.n_treated)


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,))))


def _check_exhaustive(data: DataMatrix, spec: ResamplingSpec) -> int:
    total = n_assignments(data)
    if total > spec.exhaustive_cap:
        raise ResamplingError(
            f"exhaustive enumeration needs {total} assignments (cap {spec.exhaustive_cap}); "
            "use scheme='permutation' instead"
        )
    return total


def _exhaustive_chunks(data: DataMatrix) -> Iterator[np.ndarray]:
    n, k = data.n_units, data.n_treated
    combos = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(combos, CHUNK))
        if not block:
            return
        labels = np.zeros((len(block), n), dtype=bool)
        rows = np.repeat(np.arange(len(block)), k)
        labels[rows, np.asarray(block).ravel()] = True
        yield labels


def _permutation_chunk(data: DataMatrix, spec: ResamplingSpec, chunk: int) -> np.ndarray:
    size = min(CHUNK, spec.B - chunk * CHUNK)
    rng = _chunk_rng(spec.seed, chunk)
    perms = np.argsort(rng.random((size, data.n_units)), axis=1)
    return data.group[perms]


def _bootstrap_chunk(data: DataMatrix, spec: ResamplingSpec, chunk: int) -> np.ndarray:
    size = min(CHUNK, spec.B - chunk * CHUNK)
    rng = _chunk_rng(spec.seed, chunk)
    return rng.integers(0, data.n_units, size=(size, data.n_units))


def _chunk_count(spec: ResamplingSpec) -> int:
    return -(-spec.B // CHUNK)


def resample_stream(data: DataMatrix, spec: ResamplingSpec) -> Iterator[np.ndarray]:
    """Yield resampled label vectors (bootstrap: unit index vectors).

    Permutation and bootstrap yield exactly ``B`` draws; the observed
    labelling is not part of the stream. Exhaustive yields every assignment
    once, in lexicographic order of the treated positions.
    """
    if spec.scheme == "exhaustive":
        _check_exhaustive(data, spec)
        for block in _exhaustive_chunks(data):
            yield from block
        return
    make = _permutation_chunk if spec.scheme == "permutation" else _bootstrap_chunk
    for c in range(_chunk_count(spec)):
        yield from make(data, spec, c)


# -- statistics ---------------------------------------------------------------


def _centered(values: np.ndarray) -> np.ndarray:
    # centring each column keeps the sum-of-squares formula well conditioned
    with np.errstate(invalid="ignore"):
        mu = np.nanmean(values, axis=0) if values.size else np.zeros(values.shape[1])
    return values - np.nan_to_num(mu)


def _group_stats(labels: np.ndarray, y: np.ndarray, observed: np.ndarray, statistic: str) -> np.ndarray:
    """Statistic for every labelling row in ``labels`` (rows x outcomes).

    ``y`` has zeros where ``observed`` is False. Undefined statistics (a group
    with too few observations, zero variance) come back as 0.
    """
    l1 = labels.astype(float)
    l0 = 1.0 - l1
    mask = observed.astype(float)
    n1 = l1 @ mask
    n0 = l0 @ mask
    s1 = l1 @ y
    s0 = l0 @ y
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = s1 / n1 - s0 / n0
        if statistic == "mean_difference":
            out = diff
        else:
            q1 = l1 @ (y * y)
            q0 = l0 @ (y * y)
            # sum-of-squares variances leave ~eps noise where the exact value is 0
            floor = VAR_RTOL * np.max(y * y, axis=0, initial=0.0)
            v1 = (q1 - s1 * s1 / n1) / (n1 - 1)
            v0 = (q0 - s0 * s0 / n0) / (n0 - 1)
            v1 = np.where(v1 <= floor, 0.0, v1)
            v0 = np.where(v0 <= floor, 0.0, v0)
            se2 = v1 / n1 + v0 / n0
            out = diff / np.sqrt(se2)
    return np.where(np.isfinite(out), out, 0.0)


def _welch_p(y: np.ndarray, observed: np.ndarray, group: np.ndarray) -> np.ndarray:
    """Two-sided Welch t p-values per resample row.

    ``y`` and ``observed`` are resamples x units x outcomes; ``group`` is the
    unit label vector shared by every resample.
    """
    g1 = group.astype(float)[None, :, None]
    g0 = 1.0 - g1
    mask = observed.astype(float)
    n1 = (g1 * mask).sum(axis=1)
    n0 = (g0 * mask).sum(axis=1)
    s1 = (g1 * y).sum(axis=1)
    s0 = (g0 * y).sum(axis=1)
    q1 = (g1 * y * y).sum(axis=1)
    q0 = (g0 * y * y).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        floor = VAR_RTOL * np.max(y * y, axis=1, initial=0.0)
        v1 = (q1 - s1 * s1 / n1) / (n1 - 1)
        v0 = (q0 - s0 * s0 / n0) / (n0 - 1)
        v1 = np.where(v1 <= floor, 0.0, v1)
        v0 = np.where(v0 <= floor, 0.0, v0)
        a1, a0 = v1 / n1, v0 / n0
        se2 = a1 + a0
        t = (s1 / n1 - s0 / n0) / np.sqrt(se2)
        df = se2 * se2 / (a1 * a1 / (n1 - 1) + a0 * a0 / (n0 - 1))
        p = 2.0 * stats.t.sf(np.abs(t), df)
    return np.where(np.isfinite(p), p, 1.0)


def _outcome_errors(data: DataMatrix) -> list[Optional[str]]:
    observed = ~np.isnan(data.values)
    errors = []
    for j in range(len(data.names)):
        n1 = int((observed[:, j] & data.group).sum())
        n0 = int((observed[:, j] & ~data.group).sum())
        if n1 < 2 or n0 < 2:
            errors.append(f"needs >= 2 observations per group (treated {n1}, control {n0})")
        else:
            errors.append(None)
    return errors


def _tail_pvalues(abs_stats: np.ndarray, observed_abs: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Share of all draws whose |statistic| is at least each row's |statistic|.

    ``abs_stats`` is draws x outcomes and contains the observed labelling.
    """
    n_draws = abs_stats.shape[0]
    tol = TIE_RTOL * np.maximum(observed_abs, scale)
    out = np.empty_like(abs_stats)
    for j in range(abs_stats.shape[1]):
        ordered = np.sort(abs_stats[:, j])
        below = np.searchsorted(ordered, abs_stats[:, j] - tol[j], side="left")
        out[:, j] = (n_draws - below) / n_draws
    return out


def _map_chunks(fn, items, n_jobs: int):
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


@dataclass
class _Prepared:
    data: DataMatrix
    valid: list[int]
    errors: list[Optional[str]]
    y: np.ndarray
    observed: np.ndarray
    scale: np.ndarray
    constant: np.ndarray


def _prepare(data: DataMatrix) -> _Prepared:
    errors = _outcome_errors(data)
    valid = [j for j, e in enumerate(errors) if e is None]
    values = data.values[:, valid]
    observed = ~np.isnan(values)
    y = np.where(observed, _centered(values), 0.0)
    with np.errstate(invalid="ignore"):
        span = np.nanmax(values, axis=0) - np.nanmin(values, axis=0) if valid else np.zeros(0)
        scale = np.nanmax(np.abs(values), axis=0) if valid else np.zeros(0)
    return _Prepared(data, valid, errors, y, observed, scale, span == 0)


def _resampled_pvalues(prep: _Prepared, spec: ResamplingSpec, n_jobs: int) -> tuple[np.ndarray, np.ndarray]:
    """Observed p-values and the draws x outcomes matrix of resampled p-values."""
    data = prep.data
    m = len(prep.valid)
    if spec.scheme == "bootstrap":
        means1 = _nanmean_rows(prep.data.values[:, prep.valid], data.group)
        means0 = _nanmean_rows(prep.data.values[:, prep.valid], ~data.group)
        raw = prep.data.values[:, prep.valid]
        centred = raw - np.where(data.group[:, None], means1, means0)
        observed_p = _welch_p(np.where(prep.observed, raw, 0.0)[None], prep.observed[None], data.group)[0]

        def run(c):
            idx = _bootstrap_chunk(data, spec, c)
            obs = prep.observed[idx]
            y = np.where(obs, centred[idx], 0.0)
            return _welch_p(y, obs, data.group)

        draws = np.concatenate(_map_chunks(run, range(_chunk_count(spec)), n_jobs)) if m else np.zeros((spec.B, 0))
        observed_p = np.where(prep.constant, 1.0, observed_p)
        draws[:, prep.constant] = 1.0
        return observed_p, draws

    if spec.scheme == "exhaustive":
        _check_exhaustive(data, spec)
        blocks = list(_exhaustive_chunks(data))
    else:
        blocks = [data.group[None, :]] + list(range(_chunk_count(spec)))

    def stat_block(block):
        labels = block if isinstance(block, np.ndarray) else _permutation_chunk(data, spec, block)
        return np.abs(_group_stats(labels, prep.y, prep.observed, spec.statistic))

    abs_stats = np.concatenate(_map_chunks(stat_block, blocks, n_jobs))
    scale = prep.scale if spec.statistic == "mean_difference" else np.ones(m)
    if spec.scheme == "exhaustive":
        # the observed labelling is one of the enumerated rows
        observed_abs = np.abs(_group_stats(data.group[None, :], prep.y, prep.observed, spec.statistic))[0]
        pvals = _tail_pvalues(abs_stats, observed_abs, scale)
        observed_p = _observed_tail(abs_stats, observed_abs, scale)
    else:
        observed_abs = abs_stats[0]
        pvals = _tail_pvalues(abs_stats, observed_abs, scale)
        observed_p = pvals[0]
    pvals[:, prep.constant] = 1.0
    observed_p = np.where(prep.constant, 1.0, observed_p)
    return observed_p, pvals


def _observed_tail(abs_stats: np.ndarray, observed_abs: np.ndarray, scale: np.ndarray) -> np.ndarray:
    tol = TIE_RTOL * np.maximum(observed_abs, scale)
    counts = np.count_nonzero(abs_stats >= observed_abs - tol, axis=0)
    return counts / abs_stats.shape[0]


def _nanmean_rows(values: np.ndarray, rows: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.nan_to_num(np.nanmean(values[rows], axis=0))


def raw_pvalues(data: DataMatrix, spec: ResamplingSpec, n_jobs: int = 1) -> list[RawPValue]:
    """Unadjusted two-sided p-value for every outcome column."""
    prep = _prepare(data)
    observed_p, _ = _resampled_pvalues(prep, spec, n_jobs)
    return _collect_raw(prep, observed_p)


def _collect_raw(prep: _Prepared, observed_p: np.ndarray) -> list[RawPValue]:
    out, k = [], 0
    for j, name in enumerate(prep.data.names):
        if prep.errors[j] is not None:
            out.append(RawPValue(name, None, prep.errors[j]))
        else:
            out.append(RawPValue(name, float(observed_p[k])))
            k += 1
    return out


def _stepdown(observed_p: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Free step-down min-p adjusted values, in the input column order."""
    m = observed_p.shape[0]
    if m == 0:
        return observed_p.copy()
    order = np.argsort(observed_p, kind="stable")
    ranked = draws[:, order]
    # successive minima over ranks i..m, computed from the last rank backwards
    tail_min = np.minimum.accumulate(ranked[:, ::-1], axis=1)[:, ::-1]
    hits = np.count_nonzero(tail_min <= observed_p[order][None, :], axis=0)
    adjusted_sorted = np.maximum.accumulate(hits / draws.shape[0])
    adjusted_sorted = np.minimum(np.maximum(adjusted_sorted, observed_p[order]), 1.0)
    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted
    return adjusted


def wy_minp_adjust(data: DataMatrix, spec: ResamplingSpec, n_jobs: int = 1) -> WYResult:
    """Westfall-Young free step-down min-p adjusted p-values.

    Outcomes are ranked by raw p. For rank ``i`` the adjusted value is the
    share of resamples in which the smallest resampled p-value over ranks
    ``i..m`` is ``<=`` the observed ``p_(i)``; a running maximum then makes the
    values non-decreasing down the ranks. Outcomes with too few observations
    are reported with an error and left out of the family.
    """
    prep = _prepare(data)
    observed_p, draws = _resampled_pvalues(prep, spec, n_jobs)
    adjusted = _stepdown(observed_p, draws)
    entries, k = [], 0
    for j, name in enumerate(data.names):
        if prep.errors[j] is not None:
            entries.append(WYEntry(name, None, None, prep.errors[j]))
        else:
            entries.append(WYEntry(name, float(observed_p[k]), float(adjusted[k])))
            k += 1
    return WYResult(tuple(entries), int(draws.shape[0]), spec.scheme, spec.seed)
