"""Characteristic functions, mass ratios, condition checks, counting and defects."""

from .characteristic import (
    CharacteristicSeries,
    DegenerateMapError,
    MassRatio,
    characteristic,
    d_mass_ratio,
    d_mass_ratio_direct,
    ddc_mass_ratio,
    ratio_curve,
)
from .conditions import CONDITION_IDS, ConditionResult, InsufficientScheduleError, check_condition
from .counting import (
    CountingError,
    CountingSeries,
    CountResult,
    DefectReport,
    count_preimages,
    counting_function,
    defect_report,
    fmt_residual,
    preimage_counting_sum,
    proximity,
)
from .defects import (
    DefectSuiteResult,
    DiscreteMeasure,
    ScaledRatios,
    defect_suite,
    fibonacci_values,
    potential_sup,
    proximity_potential,
    scaled_ratios,
)
from .growth import GrowthResult, growth_classify

__all__ = [
    "CONDITION_IDS", "CharacteristicSeries", "ConditionResult", "CountResult", "CountingError", "CountingSeries",
    "DefectReport", "DefectSuiteResult", "DegenerateMapError", "DiscreteMeasure", "GrowthResult",
    "InsufficientScheduleError", "MassRatio", "ScaledRatios", "characteristic", "check_condition",
    "count_preimages", "counting_function", "d_mass_ratio", "d_mass_ratio_direct", "ddc_mass_ratio",
    "defect_report", "defect_suite", "fibonacci_values", "fmt_residual", "growth_classify", "potential_sup",
    "preimage_counting_sum", "proximity", "proximity_potential", "ratio_curve", "scaled_ratios",
]
