"""Loading model inputs and calibrating the business-as-usual path."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .. import data
from ..cge.params import ModelParameters
from ..emissions import EmissionCoefficients, load_coefficients
from ..sam import SocialAccountingMatrix, load_sam
from ..simulate import Projections, load_projections
from ..solver.calibration import calibrate, load_elasticities, load_factor_data
from ..solver.targets import CalibrationTargets, calibrate_land_elasticity, calibrate_tfp_path
from .spec import ScenarioSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelInputs:
    sam: SocialAccountingMatrix
    params: ModelParameters
    projections: Projections
    coefficients: EmissionCoefficients
    paths: dict


def load_inputs(
    sam=None,
    elasticities=None,
    va_elasticities=None,
    factors=None,
    projections=None,
    coefficients=None,
) -> ModelInputs:
    """Load and calibrate; any path left as ``None`` uses the bundled file."""
    paths = {
        "sam": Path(sam or data.path("sam.csv")),
        "elasticities": Path(elasticities or data.path("elasticities.csv")),
        "va_elasticities": Path(va_elasticities or data.path("va_elasticities.csv")),
        "factors": Path(factors or data.path("factors.yaml")),
        "projections": Path(projections or data.path("projections.csv")),
        "coefficients": Path(coefficients or data.path("emission_coefficients.csv")),
    }
    s = load_sam(paths["sam"])
    params = calibrate(s, load_elasticities(paths["elasticities"], paths["va_elasticities"]),
                       load_factor_data(paths["factors"]))
    return ModelInputs(s, params, load_projections(paths["projections"]), load_coefficients(paths["coefficients"]),
                       {k: str(v) for k, v in paths.items()})


@dataclass(frozen=True)
class CalibratedBaseline:
    """Parameters and TFP path that reproduce the business-as-usual targets."""

    params: ModelParameters
    tfp_path: dict[int, float]
    mu: float | None = None


def calibrate_baseline(inputs: ModelInputs, spec: ScenarioSpec) -> CalibratedBaseline:
    """Calibrate the land-supply elasticity (if the spec asks for it) and TFP."""
    proj = inputs.projections
    target = spec.deforestation_target
    targets = CalibrationTargets(proj.gdp_growth, target if target is not None else 0.008,
                                 proj.population_growth)
    params = inputs.params
    if target is not None:
        mu, path = calibrate_land_elasticity(params, targets, spec.horizon, spec.solver)
        params = replace(params, mu=params.noncompliant_lands() * mu)
        log.info("land-supply elasticity calibrated to %.6g", mu)
        return CalibratedBaseline(params, path, mu)
    path = calibrate_tfp_path(params, targets, spec.horizon, spec.solver)
    return CalibratedBaseline(params, path, None)
