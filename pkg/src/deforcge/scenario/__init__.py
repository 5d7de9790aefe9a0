"""Baseline and shock trajectories, deviation reports and sensitivity runs."""

from .coverage import CoverageRow, CoverageSummary, coverage_summary, write_coverage
from .inputs import CalibratedBaseline, ModelInputs, calibrate_baseline, load_inputs
from .report import Check, DeviationReport, Indicator, deviation_report, sign_checks, write_report
from .sensitivity import SENSITIVITY_CASES, SensitivityResult, ordering_checks, sensitivity_suite, write_comparison
from .shock import build_eudr_shock
from .spec import Mode, PriceWedge, ScenarioSpec, WedgeMode, load_scenario, scenario_from_dict
from .trajectory import PeriodSnapshot, Trajectory, load_trajectory, run_trajectory, save_trajectory

__all__ = [
    "CalibratedBaseline",
    "Check",
    "CoverageRow",
    "CoverageSummary",
    "DeviationReport",
    "Indicator",
    "Mode",
    "ModelInputs",
    "PeriodSnapshot",
    "PriceWedge",
    "SENSITIVITY_CASES",
    "ScenarioSpec",
    "SensitivityResult",
    "Trajectory",
    "WedgeMode",
    "build_eudr_shock",
    "calibrate_baseline",
    "coverage_summary",
    "deviation_report",
    "load_inputs",
    "load_scenario",
    "load_trajectory",
    "ordering_checks",
    "run_trajectory",
    "save_trajectory",
    "scenario_from_dict",
    "sensitivity_suite",
    "sign_checks",
    "write_comparison",
    "write_coverage",
    "write_report",
]
