"""Robustness measurement: fooling curves, distances, transfer, reports and verification."""

from .report import RobustnessReport, read_curves_csv, write_sample_records
from .robustness import (
    BISECTION_STEPS,
    AttackRun,
    CurvePoint,
    DistanceResult,
    FoolingCurve,
    LabelSnapshot,
    TransferResult,
    attack_dataset,
    common_eligible,
    cross_model_transfer,
    eligible_indices,
    fooling_curve,
    fooling_ratio,
    label_distribution_snapshot,
    mean_adv_distance,
    minimal_adversarial,
    parallel_map,
    perturbation_norm,
)
from .verify import CheckResult, run_verify_suite, suite_passed

__all__ = [
    "AttackRun",
    "BISECTION_STEPS",
    "CheckResult",
    "CurvePoint",
    "DistanceResult",
    "FoolingCurve",
    "LabelSnapshot",
    "RobustnessReport",
    "TransferResult",
    "attack_dataset",
    "common_eligible",
    "cross_model_transfer",
    "eligible_indices",
    "fooling_curve",
    "fooling_ratio",
    "label_distribution_snapshot",
    "mean_adv_distance",
    "minimal_adversarial",
    "parallel_map",
    "perturbation_norm",
    "read_curves_csv",
    "run_verify_suite",
    "suite_passed",
    "write_sample_records",
]
