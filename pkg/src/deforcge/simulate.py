"""Year-by-year recursive simulation.

Each year: build exogenous inputs from the carried state, solve the
period (optionally searching the uniform TFP multiplier that hits a GDP
growth target), compute deforestation, then advance land, capital and
labour to the next year.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import brentq, root_scalar

from . import dynamics as D
from .cge import system as S
from .cge.params import ModelParameters
from .errors import DeforcgeError, NotConverged, TargetInfeasible
from .solver.newton import SolverConfig, solve_period

log = logging.getLogger(__name__)

TFP_BRACKET = (0.8, 1.25)


@dataclass(frozen=True)
class Projections:
    """Exogenous growth paths keyed by year (growth from year-1 to year)."""

    gdp_growth: Mapping[int, float]
    population_growth: Mapping[int, float]

    def population(self, year: int) -> float:
        return float(self.population_growth.get(year, 0.0))


def load_projections(path) -> Projections:
    gdp, pop = {}, {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            year = int(row["year"])
            if row.get("gdp_growth"):
                gdp[year] = float(row["gdp_growth"])
            if row.get("population_growth"):
                pop[year] = float(row["population_growth"])
    return Projections(gdp, pop)


@dataclass(frozen=True)
class PeriodShock:
    """Export price wedges and quantity caps for one year."""

    wedge: np.ndarray  # (nc, 2)
    caps: tuple = ()  # ((commodity index, EU export target), ...)


@dataclass
class PeriodRecord:
    year: int
    equilibrium: S.PeriodEquilibrium
    land: D.LandAccount
    capital: np.ndarray
    labor_supply: float
    tfp: float


@dataclass
class SimulationResult:
    records: list[PeriodRecord]
    tfp_path: dict[int, float] = field(default_factory=dict)

    @property
    def years(self) -> list[int]:
        return [r.year for r in self.records]


def initial_land(params: ModelParameters) -> D.LandAccount:
    b = params.base
    qfs_ha = b.qfs * b.ha_per_unit
    wf00 = 1.0 / b.ha_per_unit  # base rent per hectare
    return D.LandAccount(
        year=params.base_year,
        lands=params.lands,
        use=params.land_use,
        compliance=params.land_compliance,
        qfs=qfs_ha.copy(),
        qfinit=qfs_ha.copy(),
        qdefor=np.zeros(params.nl),
        wfavg=wf00.copy(),
        ur=params.urf0.copy(),
        cpi=1.0,
        forest=b.forest_ha,
        mu=params.mu.copy(),
        qfs00=qfs_ha.copy(),
        wfavg00=wf00,
        cpi00=1.0,
    )


def real_gdp_target(prev_gdp: float, growth: float) -> float:
    return prev_gdp * (1.0 + growth)


def simulate(
    params: ModelParameters,
    years: range | list[int],
    projections: Projections,
    tfp_path: Mapping[int, float] | None = None,
    calibrate_tfp: bool = False,
    shocks: Callable[[int], PeriodShock | None] | None = None,
    config: SolverConfig | None = None,
    tfp_guess: Mapping[int, float] | None = None,
    strict_forest: bool = False,
) -> SimulationResult:
    """Run the recursive model over ``years``.

    Args:
        tfp_path: uniform TFP level per year (base year is 1). Years missing
            from the path keep the previous level.
        calibrate_tfp: search each year's TFP multiplier so real GDP grows
            at the projected rate; the resulting path is returned.
        shocks: callable giving the wedges/caps to apply in a year.
        tfp_guess: starting multipliers for the search (speeds up nested
            calibrations).
    """
    config = config or SolverConfig()
    years = list(years)
    if not years or years != list(range(years[0], years[-1] + 1)):
        raise ValueError("years must be a contiguous increasing range")
    if years[0] != params.base_year:
        raise ValueError(f"simulation must start in the base year {params.base_year}")
    b = params.base
    land = initial_land(params)
    capital = D.CapitalAccount(b.qk.copy(), params.depreciation, params.cap_invest_share)
    qls = b.qls
    level = 1.0
    prev_eq = None
    prev_gdp = None
    records: list[PeriodRecord] = []
    path: dict[int, float] = {}
    classes = [c.value for c in params.land_compliance]

    for year in years:
        shock = shocks(year) if shocks else None
        exo = S.base_inputs(params, year).with_(
            qls=qls, qk=capital.stock.copy(), qfs=land.qfs / b.ha_per_unit,
        )
        if shock is not None:
            exo = exo.with_(wedge=np.asarray(shock.wedge, float), caps=tuple(shock.caps))
        if calibrate_tfp and prev_eq is not None:
            if year not in projections.gdp_growth:
                raise TargetInfeasible(f"no GDP growth target for {year}", year=year)
            target = real_gdp_target(prev_gdp, projections.gdp_growth[year])
            guess = (tfp_guess or {}).get(year)
            guess = guess / path[year - 1] if guess and (year - 1) in path else None
            mult, eq = _search_tfp(params, exo, level, target, config, prev_eq, guess)
            level *= mult
        else:
            if tfp_path is not None and year in tfp_path:
                level = float(tfp_path[year])
            try:
                eq = solve_period(params, exo.with_(tfp=np.full(params.na, level)), config, prev_eq)
            except DeforcgeError as exc:
                exc.context.setdefault("year", year)
                raise
        path[year] = level

        wf = eq.state.u.wf
        land = land.observe(wf / b.ha_per_unit, eq.state.u.urf, eq.state.cpi)
        land = D.record_deforestation(land, D.deforestation_supply(land), strict_forest)
        records.append(PeriodRecord(year, eq, land, capital.stock.copy(), qls, level))

        nxt = D.advance_land(land, strict_forest)
        qfs_next = D.migrate_land(nxt.qfinit, land.real_rent_index(), params.mobility, classes)
        land = D.LandAccount(
            year=nxt.year, lands=nxt.lands, use=nxt.use, compliance=nxt.compliance, qfs=qfs_next,
            qfinit=nxt.qfinit, qdefor=nxt.qdefor, wfavg=land.wfavg, ur=land.ur, cpi=land.cpi,
            forest=nxt.forest, mu=nxt.mu, qfs00=nxt.qfs00, wfavg00=nxt.wfavg00, cpi00=nxt.cpi00,
        )
        capital, qls = D.advance_capital_labor(capital, eq, qls, projections.population(year + 1))
        prev_eq = eq
        prev_gdp = eq.real_gdp()
    return SimulationResult(records, path)


def _search_tfp(params, exo, level, target, config, warm, guess):
    """Uniform TFP multiplier for one year so real GDP equals ``target``."""
    cache = {}
    last = [warm]

    def gap(m):
        if m in cache:
            return cache[m][0]
        eq = solve_period(params, exo.with_(tfp=np.full(params.na, level * m)), config, last[0])
        last[0] = eq
        g = eq.real_gdp() / target - 1.0
        cache[m] = (g, eq)
        return g

    lo, hi = TFP_BRACKET
    x0 = guess if guess and lo < guess < hi else 1.0
    root = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = root_scalar(gap, x0=x0, x1=x0 * 1.001, method="secant", xtol=1e-15, rtol=1e-14, maxiter=30)
        if sol.converged and lo <= sol.root <= hi and abs(gap(sol.root)) <= 1e-10:
            root = sol.root
    except (DeforcgeError, ValueError, ZeroDivisionError):
        root = None
    if root is None:
        try:
            g_lo, g_hi = gap(lo), gap(hi)
        except DeforcgeError as exc:
            raise TargetInfeasible(f"{exo.year}: GDP target not reachable inside TFP bracket {TFP_BRACKET}",
                                   year=exo.year) from exc
        if g_lo * g_hi > 0:
            raise TargetInfeasible(
                f"{exo.year}: GDP target not bracketed by TFP multipliers {TFP_BRACKET}", year=exo.year)
        root = brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        if abs(gap(root)) > 1e-9:
            raise NotConverged(f"{exo.year}: TFP search did not reach the GDP target", year=exo.year)
    gap(root)
    return root, cache[root][1]
