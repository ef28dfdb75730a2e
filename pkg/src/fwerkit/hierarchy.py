"""
Hierarchical FWER procedures: fixed sequence, fallback, and gatekeeping.

Each procedure returns its full audit trail (levels used, gate decisions)
so that published tables can be reproduced cell by cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .core import AdjustedEntry, AdjustmentResult, PValueTable, _check_alpha, adjust, normalize_method
from .errors import InputError, PlanValidationError

__all__ = [
    "SequenceDecision",
    "fixed_sequence_test",
    "FallbackPlan",
    "FallbackStep",
    "FallbackTrace",
    "fallback_test",
    "GatePlan",
    "Family",
    "FamilyOutcome",
    "GateTrace",
    "gatekeep_test",
    "validate_plan",
    "GATE_MODES",
    "INTRA_METHODS",
]

WEIGHT_TOLERANCE = 1e-9
GATE_MODES = ("serial", "parallel")
INTRA_METHODS = ("holm", "hochberg", "bonferroni", "sidak_holm", "westfall_young")


@dataclass(frozen=True)
class SequenceDecision:
    hypothesis_id: str
    p_raw: float
    tested: bool
    rejected: bool


def fixed_sequence_test(table: PValueTable, alpha: float) -> list[SequenceDecision]:
    """Test in table order at full ``alpha``; stop at the first non-rejection."""
    decisions = []
    testing = alpha > 0
    for hid, p in table.entries:
        if not testing:
            decisions.append(SequenceDecision(hid, p, False, False))
            continue
        rejected = p <= alpha
        decisions.append(SequenceDecision(hid, p, True, rejected))
        testing = rejected
    return decisions


# -- fallback -----------------------------------------------------------------


@dataclass(frozen=True)
class FallbackStep:
    hypothesis_id: str
    weight: float


@dataclass(frozen=True)
class FallbackPlan:
    steps: tuple[FallbackStep, ...]
    alpha: float

    def __post_init__(self):
        object.__setattr__(
            self,
            "steps",
            tuple(s if isinstance(s, FallbackStep) else FallbackStep(s[0], float(s[1])) for s in self.steps),
        )
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def equal_weights(cls, ids: Sequence[str], alpha: float) -> "FallbackPlan":
        w = 1.0 / len(ids)
        return cls(tuple(FallbackStep(hid, w) for hid in ids), alpha)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.hypothesis_id for s in self.steps)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(s.weight for s in self.steps)


@dataclass(frozen=True)
class FallbackTraceStep:
    hypothesis_id: str
    p_raw: float
    weight: float
    initial_alpha: float
    effective_alpha: float
    rejected: bool


@dataclass(frozen=True)
class FallbackTrace:
    steps: tuple[FallbackTraceStep, ...]
    plan: FallbackPlan

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def rejected_ids(self) -> tuple[str, ...]:
        return tuple(s.hypothesis_id for s in self.steps if s.rejected)


def fallback_test(plan: FallbackPlan, table: PValueTable) -> FallbackTrace:
    """Weighted fallback procedure with alpha propagation.

    Step ``i`` starts with ``w_i * alpha``. When step ``i - 1`` is rejected,
    its whole effective level is carried forward and added on. Every step is
    tested; unlike fixed sequence, a failure does not end the procedure.
    """
    violations = validate_plan(plan)
    if violations:
        raise PlanValidationError(violations)
    lookup = table.as_dict()
    missing = [hid for hid in plan.ids if hid not in lookup]
    if missing:
        raise InputError(f"planned hypothesis id(s) missing from table: {', '.join(missing)}")

    alpha = plan.alpha
    steps = []
    # weights accumulated since the last non-rejection; summing weights with
    # fsum (instead of chaining alpha sums) keeps 10 x 0.01 exactly at 0.1
    run: list[float] = []
    for step in plan.steps:
        p = lookup[step.hypothesis_id]
        run.append(step.weight)
        effective = min(alpha, alpha * math.fsum(run))
        rejected = effective > 0 and p <= effective
        steps.append(
            FallbackTraceStep(step.hypothesis_id, p, step.weight, step.weight * alpha, effective, rejected)
        )
        if not rejected:
            run = []
    return FallbackTrace(tuple(steps), plan)


# -- gatekeeping --------------------------------------------------------------


@dataclass(frozen=True)
class Family:
    family_id: str
    members: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))


@dataclass(frozen=True)
class GatePlan:
    families: tuple[Family, ...]
    mode: str = "serial"
    intra_method: str = "holm"
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(
            self,
            "families",
            tuple(f if isinstance(f, Family) else Family(f[0], tuple(f[1])) for f in self.families),
        )
        object.__setattr__(self, "intra_method", normalize_method(self.intra_method))
        object.__setattr__(self, "mode", self.mode.strip().lower())
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(hid for fam in self.families for hid in fam.members)


@dataclass(frozen=True)
class FamilyOutcome:
    family_id: str
    members: tuple[str, ...]
    gate_opened: bool
    gate_reason: str
    result: Optional[AdjustmentResult]  # None: family was not tested

    @property
    def tested(self) -> bool:
        return self.result is not None

    @property
    def rejected_ids(self) -> tuple[str, ...]:
        return self.result.rejected_ids if self.result is not None else ()


@dataclass(frozen=True)
class GateTrace:
    families: tuple[FamilyOutcome, ...]
    plan: GatePlan
    rejected: frozenset = field(default_factory=frozenset)

    def __iter__(self):
        return iter(self.families)


def _gate_passes(mode: str, result: AdjustmentResult) -> bool:
    flags = [e.rejected for e in result.entries]
    if mode == "serial":
        return all(flags)
    return any(flags)


def gatekeep_test(plan: GatePlan, table: PValueTable, resample_ctx=None) -> GateTrace:
    """Serial or parallel gatekeeping over ordered families.

    Each family that is tested gets the full ``plan.alpha`` and is adjusted
    on its own with ``plan.intra_method``. A serial gate opens when every
    hypothesis in the previous family was rejected; a parallel gate opens
    when at least one was.

    ``resample_ctx`` is a ``(DataMatrix, ResamplingSpec)`` pair and is
    required for ``westfall_young``; each family is then resampled over its
    own outcome columns.
    """
    violations = validate_plan(plan)
    if violations:
        raise PlanValidationError(violations)
    lookup = table.as_dict()
    missing = [hid for hid in plan.ids if hid not in lookup]
    if missing:
        raise InputError(f"family member id(s) missing from table: {', '.join(missing)}")
    if plan.intra_method == "westfall_young" and resample_ctx is None:
        raise InputError("westfall_young intra-family method needs a data matrix and resampling spec")

    outcomes = []
    rejected: set[str] = set()
    open_gate, reason = True, "first family"
    for fam in plan.families:
        if not open_gate:
            outcomes.append(FamilyOutcome(fam.family_id, fam.members, False, reason, None))
            continue
        result = _adjust_family(plan, table.subset(fam.members), resample_ctx)
        outcomes.append(FamilyOutcome(fam.family_id, fam.members, True, reason, result))
        rejected.update(result.rejected_ids)
        if _gate_passes(plan.mode, result):
            open_gate = True
            reason = "all rejected" if plan.mode == "serial" else "at least one rejected"
        else:
            open_gate = False
            reason = f"gate closed by {fam.family_id}"
    return GateTrace(tuple(outcomes), plan, frozenset(rejected))


def _adjust_family(plan: GatePlan, sub: PValueTable, resample_ctx) -> AdjustmentResult:
    if plan.intra_method != "westfall_young":
        return adjust(sub, plan.intra_method, plan.alpha)

    from .resample import wy_minp_adjust

    data, spec = resample_ctx
    wy = wy_minp_adjust(data.select(sub.ids), spec)
    ranked = sorted(
        (e for e in wy.entries if e.error is None), key=lambda e: e.raw_p
    )
    ranks = {e.outcome: i + 1 for i, e in enumerate(ranked)}
    entries = []
    for e in wy.entries:
        if e.error is not None:
            raise InputError(f"outcome {e.outcome!r}: {e.error}")
        entries.append(
            AdjustedEntry(e.outcome, e.raw_p, e.adjusted_p,
                          plan.alpha > 0 and e.adjusted_p <= plan.alpha, ranks[e.outcome])
        )
    return AdjustmentResult(tuple(entries), "westfall_young", plan.alpha)


# -- validation ---------------------------------------------------------------


def validate_plan(plan: Union[FallbackPlan, GatePlan]) -> list[str]:
    """Every problem with ``plan`` as a list of messages; empty means valid."""
    violations = []
    try:
        _check_alpha(plan.alpha)
    except InputError as exc:
        violations.append(str(exc))

    if isinstance(plan, FallbackPlan):
        if not plan.steps:
            violations.append("fallback plan has no steps")
        for s in plan.steps:
            if not (s.weight >= 0) or math.isinf(s.weight):
                violations.append(f"weight for {s.hypothesis_id!r} must be a finite value >= 0, got {s.weight!r}")
        if plan.steps:
            total = math.fsum(s.weight for s in plan.steps)
            if abs(total - 1.0) > WEIGHT_TOLERANCE:
                violations.append(f"weight sum {total:.6g} (must be 1)")
        violations.extend(_duplicates(plan.ids))
    elif isinstance(plan, GatePlan):
        if not plan.families:
            violations.append("gate plan has no families")
        if plan.mode not in GATE_MODES:
            violations.append(f"unknown gate mode {plan.mode!r}")
        if plan.intra_method not in INTRA_METHODS:
            violations.append(f"unknown intra_method {plan.intra_method!r}")
        for fam in plan.families:
            if not fam.members:
                violations.append(f"family {fam.family_id!r} is empty")
        violations.extend(_duplicates([f.family_id for f in plan.families], what="family id"))
        violations.extend(_duplicates(plan.ids))
    else:
        violations.append(f"not a plan: {type(plan).__name__}")
    return violations


def _duplicates(ids: Sequence[str], what: str = "hypothesis id") -> list[str]:
    seen, dupes = set(), []
    for hid in ids:
        if hid in seen and hid not in dupes:
            dupes.append(hid)
        seen.add(hid)
    return [f"duplicate {what} {hid!r}" for hid in dupes]
