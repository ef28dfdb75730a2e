"""Family-wise error rate control: classical, resampling and hierarchical procedures."""

from .core import (
    AdjustedEntry,
    AdjustmentResult,
    PValueTable,
    adjust,
    bonferroni_adjust,
    decide,
    global_null_fwer,
    hochberg_adjust,
    holm_adjust,
    sidak_holm_adjust,
)
from .errors import FwerkitError, InputError, PlanValidationError, ResamplingError
from .hierarchy import (
    FallbackPlan,
    FallbackStep,
    FallbackTrace,
    Family,
    GatePlan,
    GateTrace,
    fallback_test,
    fixed_sequence_test,
    gatekeep_test,
    validate_plan,
)
from .resample import DataMatrix, ResamplingSpec, WYResult, raw_pvalues, resample_stream, wy_minp_adjust

__version__ = "0.1.0"

__all__ = [
    "FwerkitError",
    "InputError",
    "PlanValidationError",
    "ResamplingError",
    "AdjustedEntry",
    "AdjustmentResult",
    "DataMatrix",
    "FallbackPlan",
    "FallbackStep",
    "FallbackTrace",
    "Family",
    "GatePlan",
    "GateTrace",
    "PValueTable",
    "ResamplingSpec",
    "WYResult",
    "adjust",
    "bonferroni_adjust",
    "decide",
    "fallback_test",
    "fixed_sequence_test",
    "gatekeep_test",
    "global_null_fwer",
    "hochberg_adjust",
    "holm_adjust",
    "raw_pvalues",
    "resample_stream",
    "sidak_holm_adjust",
    "validate_plan",
    "wy_minp_adjust",
]
