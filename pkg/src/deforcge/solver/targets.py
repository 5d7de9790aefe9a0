"""Calibration of the TFP path and the land-supply elasticity to targets."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from ..cge.params import ModelParameters
from ..errors import NotConverged
from .newton import SolverConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationTargets:
    """Baseline targets: GDP growth per year and the average deforestation rate."""

    gdp_growth: Mapping[int, float]
    deforestation_rate: float = 0.008
    population_growth: Mapping[int, float] | None = None

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.gdp_growth.values()):
            raise ValueError("GDP growth targets must be finite")
        if not 0 <= self.deforestation_rate < 0.1:
            raise ValueError("deforestation-rate target must lie in [0, 0.1)")

    def projections(self):
        from ..simulate import Projections

        return Projections(dict(self.gdp_growth), dict(self.population_growth or {}))


def _years(horizon) -> list[int]:
    if isinstance(horizon, tuple) and len(horizon) == 2:
        return list(range(horizon[0], horizon[1] + 1))
    return list(horizon)


def calibrate_tfp_path(
    params: ModelParameters,
    targets: CalibrationTargets,
    horizon,
    config: SolverConfig | None = None,
    guess: Mapping[int, float] | None = None,
) -> dict[int, float]:
    """Uniform TFP level per year so baseline real GDP follows the targets.

    Each year's multiplier is found by a one-dimensional root search over
    solved periods (secant, falling back to bracketing). The returned path
    can be fed back as exogenous TFP.

    Raises:
        TargetInfeasible: a year's target is not bracketed by the search range.
    """
    from ..simulate import simulate

    result = simulate(params, _years(horizon), targets.projections(), calibrate_tfp=True, config=config,
                      tfp_guess=guess)
    return dict(result.tfp_path)


def average_deforestation_rate(result) -> float:
    rates = [r.land.deforestation_rate for r in result.records]
    return float(np.mean(rates))


def calibrate_land_elasticity(
    params: ModelParameters,
    targets: CalibrationTargets,
    horizon,
    config: SolverConfig | None = None,
    tol: float = 1e-7,
    upper: float = 50.0,
) -> tuple[float, dict[int, float]]:
    """Scalar land-supply elasticity matching the baseline deforestation rate.

    The same elasticity applies to every non-compliant land type. The TFP
    path is recalibrated inside every evaluation, since land expansion
    changes GDP. Returns (mu, TFP path at mu).

    Raises:
        NotConverged: the target rate is not reachable for mu in [0, upper].
    """
    from ..simulate import simulate

    years = _years(horizon)
    proj = targets.projections()
    mask = params.noncompliant_lands().astype(float)
    cache: dict[float, tuple[float, dict]] = {}
    last_path: list[dict | None] = [None]

    def run(mu):
        if mu in cache:
            return cache[mu]
        p = replace(params, mu=mask * mu)
        res = simulate(p, years, proj, calibrate_tfp=True, config=config, tfp_guess=last_path[0])
        last_path[0] = res.tfp_path
        rate = average_deforestation_rate(res)
        log.info("mu=%.6g average deforestation rate %.6g", mu, rate)
        cache[mu] = (rate, dict(res.tfp_path))
        return cache[mu]

    target = targets.deforestation_rate
    if target == 0:
        return 0.0, run(0.0)[1]

    lo, hi = 0.0, 0.1
    while run(hi)[0] < target:
        lo, hi = hi, hi * 2
        if hi > upper:
            raise NotConverged(f"deforestation target {target} not reached for mu <= {upper}",
                               best=run(lo)[0])
    mu = brentq(lambda m: run(m)[0] - target, lo, hi, xtol=tol * max(1.0, hi), rtol=1e-12, maxiter=100)
    rate, path = run(mu)
    if abs(rate - target) > 1e-5:
        raise NotConverged(f"calibrated mu {mu} gives rate {rate}, target {target}", mu=mu)
    return float(mu), path
