"""
Monte Carlo estimates of family-wise error rate and power.

Test statistics are equicorrelated normals,
``X_j = sqrt(rho) Z_0 + sqrt(1 - rho) Z_j + effect_j``, converted to two-sided
p-values. ``effect_j == 0`` marks a true null. Every replication draws from its
own generator keyed on ``(seed, rep)``, so procedures run with the same config
see identical data and can be compared pairwise.

For Westfall-Young the replication instead generates a unit-level data
matrix (half treated) with equicorrelated outcomes, and resamples it.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .core import PValueTable, adjust
from .errors import InputError
from .hierarchy import FallbackPlan, Family, GatePlan, fallback_test, fixed_sequence_test, gatekeep_test
from .resample import DataMatrix, ResamplingSpec, wy_minp_adjust

__all__ = [
    "PROCEDURES",
    "SimulationConfig",
    "SimulationReport",
    "generate_scenario",
    "estimate_fwer",
    "estimate_power",
    "compare_procedures",
    "table3_style_weights",
    "default_family_sizes",
]

PROCEDURES = (
    "unadjusted",
    "bonferroni",
    "holm",
    "hochberg",
    "sidak_holm",
    "fixed_sequence",
    "fallback",
    "gatekeeping",
    "westfall_young",
)


def table3_style_weights(m: int) -> tuple[float, ...]:
    """Equal weights on the leading hypotheses, zero on the last two.

    This is the shape of the Piso Firme fallback plan (ten primary steps at
    0.1, two trailing steps at 0). Families with fewer than 3 hypotheses get
    equal weights.
    """
    if m < 3:
        return tuple([1.0 / m] * m)
    lead = m - 2
    return tuple([1.0 / lead] * lead + [0.0, 0.0])


def default_family_sizes(m: int, k: int = 3) -> tuple[int, ...]:
    """Split ``m`` hypotheses into ``min(k, m)`` consecutive, near-equal families."""
    k = min(k, m)
    base, extra = divmod(m, k)
    return tuple(base + (1 if i < extra else 0) for i in range(k))


@dataclass(frozen=True)
class SimulationConfig:
    m: int
    effects: tuple[float, ...] = ()
    rho: float = 0.0
    n_reps: int = 10_000
    alpha: float = 0.05
    seed: int = 0
    procedure: str = "bonferroni"
    # fallback: weights in hypothesis order (default equal weights)
    weights: Optional[tuple[float, ...]] = None
    # gatekeeping: consecutive family sizes (default three near-equal families)
    family_sizes: Optional[tuple[int, ...]] = None
    gate_mode: str = "serial"
    intra_method: str = "holm"
    # westfall_young
    n_units: int = 40
    resampling: ResamplingSpec = field(default_factory=lambda: ResamplingSpec("permutation", B=500))

    def __post_init__(self):
        effects = tuple(float(e) for e in self.effects) if self.effects else (0.0,) * int(self.m)
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "procedure", self.procedure.strip().lower().replace("-", "_"))
        problems = []
        if self.m < 1:
            problems.append("m must be >= 1")
        if len(effects) != self.m:
            problems.append(f"{len(effects)} effects given for m = {self.m}")
        if not (0.0 <= self.rho < 1.0):
            problems.append("rho must be in [0, 1)")
        if self.n_reps < 100:
            problems.append("n_reps must be >= 100")
        if not (0.0 <= self.alpha <= 1.0):
            problems.append("alpha must be in [0, 1]")
        if self.procedure not in PROCEDURES:
            problems.append(f"unknown procedure {self.procedure!r}")
        if self.weights is not None and len(self.weights) != self.m:
            problems.append("weights must have one entry per hypothesis")
        if self.family_sizes is not None and sum(self.family_sizes) != self.m:
            problems.append("family sizes must add up to m")
        if self.procedure == "westfall_young" and self.n_units < 4:
            problems.append("westfall_young needs n_units >= 4")
        if problems:
            raise InputError("; ".join(problems))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(f"h{j + 1}" for j in range(self.m))

    @property
    def true_nulls(self) -> np.ndarray:
        return np.array([e == 0 for e in self.effects])


@dataclass(frozen=True)
class SimulationReport:
    procedure: str
    n_reps: int
    empirical_fwer: float
    fwer_interval: tuple[float, float]
    rejection_rates: tuple[float, ...]
    any_rejection_rate: float
    runtime_s: float
    config: SimulationConfig

    @property
    def power(self) -> dict[str, float]:
        """Rejection rate of every false null, keyed by hypothesis id."""
        return {
            hid: rate
            for hid, rate, null in zip(self.config.ids, self.rejection_rates, self.config.true_nulls)
            if not null
        }

    def as_dict(self) -> dict:
        out = asdict(self)
        out["config"] = {k: v for k, v in out["config"].items() if k != "resampling"}
        out["config"]["resampling"] = asdict(self.config.resampling)
        return out


def _rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(rep,))))


def _equicorrelated(rng: np.random.Generator, size, rho: float) -> np.ndarray:
    """Standard normals with pairwise correlation ``rho`` along the last axis."""
    shared = rng.standard_normal(size[:-1] + (1,))
    own = rng.standard_normal(size)
    return math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * own


def generate_scenario(config: SimulationConfig, rep: int):
    """One replication's p-values (and data matrix for Westfall-Young).

    Returns ``(table, data)`` where ``data`` is None unless the procedure is
    westfall_young.
    """
    rng = _rep_rng(config.seed, rep)
    effects = np.asarray(config.effects)
    if config.procedure != "westfall_young":
        z = _equicorrelated(rng, (config.m,), config.rho) + effects
        p = 2.0 * stats.norm.sf(np.abs(z))
        return PValueTable.from_values(p), None

    n = config.n_units
    group = np.zeros(n, dtype=bool)
    group[: n // 2] = True
    values = _equicorrelated(rng, (n, config.m), config.rho) + np.outer(group, effects)
    data = DataMatrix(group, values, config.ids)
    # raw p-values are filled in by the resampling engine
    return None, data


def _resampling_seed(config: SimulationConfig, rep: int) -> int:
    return int(np.random.SeedSequence(entropy=config.seed, spawn_key=(rep, 1)).generate_state(1, np.uint64)[0])


def _rejections(config: SimulationConfig, procedure: str, table: Optional[PValueTable], data, rep: int) -> np.ndarray:
    alpha = config.alpha
    m = config.m
    if alpha <= 0:
        return np.zeros(m, dtype=bool)
    if procedure == "unadjusted":
        return table.pvalues <= alpha
    if procedure in ("bonferroni", "holm", "hochberg", "sidak_holm"):
        return adjust(table, procedure, alpha).rejected
    if procedure == "fixed_sequence":
        return np.array([d.rejected for d in fixed_sequence_test(table, alpha)], dtype=bool)
    if procedure == "fallback":
        weights = config.weights or tuple([1.0 / m] * m)
        plan = FallbackPlan(tuple(zip(table.ids, weights)), alpha)
        return np.array([s.rejected for s in fallback_test(plan, table)], dtype=bool)
    if procedure == "gatekeeping":
        sizes = config.family_sizes or default_family_sizes(m)
        families, start = [], 0
        for k, size in enumerate(sizes):
            families.append(Family(f"F{k + 1}", table.ids[start:start + size]))
            start += size
        plan = GatePlan(tuple(families), config.gate_mode, config.intra_method, alpha)
        trace = gatekeep_test(plan, table)
        return np.array([hid in trace.rejected for hid in table.ids], dtype=bool)
    if procedure == "westfall_young":
        spec = replace(config.resampling, seed=_resampling_seed(config, rep))
        wy = wy_minp_adjust(data, spec)
        return np.array([e.adjusted_p is not None and e.adjusted_p <= alpha for e in wy.entries])
    raise InputError(f"unknown procedure {procedure!r}")


def _wald_interval(p: float, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    half = z * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


def compare_procedures(config: SimulationConfig, procedures: Sequence[str]) -> dict[str, SimulationReport]:
    """Run several procedures on the same replications (paired comparison).

    ``westfall_young`` cannot share draws with the p-value based procedures
    and is rejected here; run it through :func:`estimate_fwer` on its own.
    """
    procedures = [p.strip().lower().replace("-", "_") for p in procedures]
    for proc in procedures:
        if proc not in PROCEDURES:
            raise InputError(f"unknown procedure {proc!r}")
    if "westfall_young" in procedures and len(procedures) > 1:
        raise InputError("westfall_young uses unit-level data and cannot be paired with p-value procedures")

    m = config.m
    nulls = config.true_nulls
    counts = {p: np.zeros(m, dtype=np.int64) for p in procedures}
    false_hits = {p: 0 for p in procedures}
    any_hits = {p: 0 for p in procedures}
    started = time.perf_counter()
    gen_config = replace(config, procedure=procedures[0]) if procedures else config
    for rep in range(config.n_reps):
        table, data = generate_scenario(gen_config, rep)
        for proc in procedures:
            rejected = _rejections(config, proc, table, data, rep)
            counts[proc] += rejected
            false_hits[proc] += bool(np.any(rejected & nulls))
            any_hits[proc] += bool(np.any(rejected))
    elapsed = time.perf_counter() - started

    n = config.n_reps
    reports = {}
    for proc in procedures:
        fwer = false_hits[proc] / n
        reports[proc] = SimulationReport(
            procedure=proc,
            n_reps=n,
            empirical_fwer=fwer,
            fwer_interval=_wald_interval(fwer, n),
            rejection_rates=tuple(float(c) / n for c in counts[proc]),
            any_rejection_rate=any_hits[proc] / n,
            runtime_s=elapsed,
            config=replace(config, procedure=proc),
        )
    return reports


def estimate_fwer(config: SimulationConfig) -> SimulationReport:
    """Share of replications with at least one rejected true null."""
    return compare_procedures(config, [config.procedure])[config.procedure]


def estimate_power(config: SimulationConfig) -> SimulationReport:
    """Same run as :func:`estimate_fwer`; read ``report.power`` for false nulls."""
    if all(e == 0 for e in config.effects):
        raise InputError("power needs at least one nonzero effect")
    return estimate_fwer(config)
