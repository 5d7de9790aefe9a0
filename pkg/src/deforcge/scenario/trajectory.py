"""Running, storing and reloading scenario trajectories.

A trajectory keeps a plain-number snapshot of every year (macro
aggregates, commodity flows, value added, land state and emission
drivers). Reports are computed from snapshots only, so a trajectory
written to disk and read back produces the same reports without solving
anything again.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..cge.params import EU, REST, ModelParameters
from ..emissions import (
    EmissionCoefficients,
    EmissionsLedger,
    compute_emissions,
    ledger_from_rows,
    ledger_rows,
)
from ..errors import DeforcgeError, MismatchedTrajectories
from ..simulate import PeriodShock, Projections, simulate
from ..solver.targets import CalibrationTargets, calibrate_tfp_path
from .spec import Mode, ScenarioSpec, WedgeMode

log = logging.getLogger(__name__)

MACRO_KEYS = (
    "gdp", "nominal_gdp", "exports", "exports_eu", "exports_rest", "imports", "production",
    "domestic_sales", "real_exchange_rate", "exchange_rate", "cpi", "real_wage", "unemployment",
    "deforestation", "deforestation_rate", "forest", "ghg", "tfp", "walras", "residual",
)
COMMODITY_KEYS = ("production", "domestic_sales", "exports_eu", "exports_rest", "imports", "wedge_eu")
ACTIVITY_KEYS = ("value_added", "nominal_value_added")
LAND_KEYS = ("QFS", "QFINIT", "QDEFOR", "UR", "WFAVG", "QLAND")
# relative margin keeping capped flows strictly inside the cap after rounding
CAP_MARGIN = 1e-8


@dataclass
class PeriodSnapshot:
    year: int
    macro: dict[str, float]
    commodity: dict[str, np.ndarray]
    activity: dict[str, np.ndarray]
    land: dict[str, np.ndarray]
    emissions: EmissionsLedger


@dataclass
class Trajectory:
    """Year-by-year results of one scenario.

    ``records`` holds the live solver output (equilibria and state
    accounts) when the trajectory was just run; it is not persisted.
    """

    name: str
    mode: Mode
    commodities: tuple[str, ...]
    activities: tuple[str, ...]
    lands: tuple[str, ...]
    snapshots: list[PeriodSnapshot]
    tfp_path: dict[int, float]
    overrides: dict[str, float] = field(default_factory=dict)
    records: list | None = None

    def __post_init__(self):
        years = self.years
        if years != list(range(years[0], years[0] + len(years))):
            raise ValueError("trajectory years must be contiguous")

    @property
    def years(self) -> list[int]:
        return [s.year for s in self.snapshots]

    @property
    def emissions(self) -> list[EmissionsLedger]:
        return [s.emissions for s in self.snapshots]

    def snapshot(self, year: int) -> PeriodSnapshot:
        return self.snapshots[self.years.index(year)]

    def macro(self, key: str) -> np.ndarray:
        return np.array([s.macro[key] for s in self.snapshots])

    def series(self, block: str, key: str) -> np.ndarray:
        """(years, items) array of a commodity, activity or land field."""
        return np.array([getattr(s, block)[key] for s in self.snapshots])

    def detached(self) -> "Trajectory":
        """Copy without the live solver records (cheap to pickle)."""
        return Trajectory(self.name, self.mode, self.commodities, self.activities, self.lands,
                          self.snapshots, dict(self.tfp_path), dict(self.overrides), None)


def snapshot(params: ModelParameters, record, coeffs: EmissionCoefficients) -> PeriodSnapshot:
    eq, land = record.equilibrium, record.land
    s = eq.state
    exports = eq.exports_by_partner()
    ledger = compute_emissions(eq, land, coeffs)
    macro = {
        "gdp": eq.real_gdp(),
        "nominal_gdp": eq.nominal_gdp(),
        "exports": float(s.qe.sum()),
        "exports_eu": float(exports[EU]),
        "exports_rest": float(exports[REST]),
        "imports": float(s.qm.sum()),
        "production": float(s.u.qa.sum()),
        "domestic_sales": float(s.qd_dem.sum()),
        "real_exchange_rate": eq.real_exchange_rate(),
        "exchange_rate": float(s.u.exr),
        "cpi": float(s.cpi),
        "real_wage": eq.real_wage(),
        "unemployment": float(s.u.url),
        "deforestation": land.qdefortot,
        "deforestation_rate": land.deforestation_rate,
        "forest": float(land.forest),
        "ghg": ledger.total,
        "tfp": float(record.tfp),
        "walras": float(eq.walras),
        "residual": float(eq.residual_norm),
    }
    commodity = {
        "production": s.u.qa.copy(),
        "domestic_sales": s.qd_dem.copy(),
        "exports_eu": s.qe[:, EU].copy(),
        "exports_rest": s.qe[:, REST].copy(),
        "imports": s.qm.copy(),
        "wedge_eu": s.wedge[:, EU].copy(),
    }
    activity = {"value_added": eq.value_added(), "nominal_value_added": eq.nominal_value_added()}
    landsnap = {
        "QFS": land.qfs.copy(),
        "QFINIT": land.qfinit.copy(),
        "QDEFOR": land.qdefor.copy(),
        "UR": np.asarray(land.ur, float).copy(),
        "WFAVG": np.asarray(land.wfavg, float).copy(),
        "QLAND": eq.land_use() * params.base.ha_per_unit,
    }
    return PeriodSnapshot(record.year, macro, commodity, activity, landsnap, ledger)


def _wedge_matrix(params: ModelParameters, spec: ScenarioSpec) -> np.ndarray:
    w = np.zeros((params.nc, 2))
    for shock in spec.shocks:
        if shock.mode is WedgeMode.FIXED:
            w[params.commodity_index(shock.commodity), 0 if shock.destination.value == "EU" else 1] = shock.wedge
    return w


def run_trajectory(
    spec: ScenarioSpec,
    params: ModelParameters,
    projections: Projections,
    coefficients: EmissionCoefficients,
    baseline: Trajectory | None = None,
    tfp_path: Mapping[int, float] | None = None,
) -> Trajectory:
    """Simulate one scenario.

    Baseline mode calibrates TFP to the projected GDP growth unless a
    ``tfp_path`` is given, then re-runs with that path held fixed.
    Counterfactual mode takes the TFP path from ``baseline`` (or
    ``tfp_path``); quantity caps are enforced every shocked year against
    the paired baseline's EU exports.

    Raises:
        MismatchedTrajectories: the baseline does not cover the horizon or
            was built on a different model.
        DeforcgeError: solver failures, annotated with the year.
    """
    P = params.with_overrides(spec.overrides)
    years = spec.years
    if years[0] != P.base_year:
        raise ValueError(f"horizon must start in the base year {P.base_year}")
    if spec.mode is Mode.BASELINE:
        if tfp_path is None:
            targets = CalibrationTargets(projections.gdp_growth, 0.008, projections.population_growth)
            tfp_path = calibrate_tfp_path(P, targets, years, spec.solver)
        shocks = None
    else:
        if baseline is not None:
            if baseline.commodities != P.commodities or any(y not in baseline.years for y in years):
                raise MismatchedTrajectories("baseline does not match the scenario's model or horizon",
                                             baseline=baseline.name, scenario=spec.name)
            tfp_path = tfp_path or baseline.tfp_path
        if tfp_path is None:
            raise MismatchedTrajectories("a counterfactual needs the baseline TFP path", scenario=spec.name)
        caps = [(P.commodity_index(w.commodity), w.target_share) for w in spec.shocks
                if w.mode is WedgeMode.SOLVE_FOR_CAP]
        if caps and baseline is None:
            raise MismatchedTrajectories("quantity caps need the paired baseline trajectory", scenario=spec.name)
        wedge = _wedge_matrix(P, spec)

        def shocks(year):
            if not spec.shocked(year):
                return None
            base_eu = baseline.snapshot(year).commodity["exports_eu"] if caps else None
            return PeriodShock(wedge, tuple((ci, share * base_eu[ci] * (1 - CAP_MARGIN)) for ci, share in caps))

    try:
        result = simulate(P, years, projections, tfp_path=dict(tfp_path), shocks=shocks, config=spec.solver)
    except DeforcgeError as exc:
        exc.context.setdefault("scenario", spec.name)
        raise
    snaps = [snapshot(P, r, coefficients) for r in result.records]
    for snap in snaps:
        if abs(snap.macro["walras"]) > 1e-8:
            log.warning("%s %d: Walras residual %.3e", spec.name, snap.year, snap.macro["walras"])
    return Trajectory(spec.name, spec.mode, tuple(P.commodities), tuple(P.activities), tuple(P.lands), snaps,
                      dict(result.tfp_path), dict(spec.overrides), result.records)


# --------------------------------------------------------------------------
# persistence


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(x) -> str:
    return repr(float(x))


def save_trajectory(traj: Trajectory, directory) -> Path:
    """Write a trajectory as CSV blocks plus ``manifest.json``.

    Floats are written with ``repr`` so reading back is exact. The
    directory is replaced atomically.
    """
    directory = Path(directory)
    directory.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{directory.name}.", dir=directory.parent))
    try:
        manifest = {
            "name": traj.name,
            "mode": traj.mode.value,
            "years": traj.years,
            "commodities": list(traj.commodities),
            "activities": list(traj.activities),
            "lands": list(traj.lands),
            "tfp_path": {str(y): repr(v) for y, v in sorted(traj.tfp_path.items())},
            "overrides": traj.overrides,
            "groups": list(traj.snapshots[0].emissions.groups),
            "emitters": list(traj.snapshots[0].emissions.emitters),
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        _write_csv(tmp / "macro.csv", ("year",) + MACRO_KEYS,
                   [[s.year] + [_f(s.macro[k]) for k in MACRO_KEYS] for s in traj.snapshots])
        _write_csv(tmp / "commodity.csv", ("year", "commodity") + COMMODITY_KEYS,
                   [[s.year, c] + [_f(s.commodity[k][i]) for k in COMMODITY_KEYS]
                    for s in traj.snapshots for i, c in enumerate(traj.commodities)])
        _write_csv(tmp / "activity.csv", ("year", "activity") + ACTIVITY_KEYS,
                   [[s.year, a] + [_f(s.activity[k][i]) for k in ACTIVITY_KEYS]
                    for s in traj.snapshots for i, a in enumerate(traj.activities)])
        _write_csv(tmp / "land.csv", ("period", "factor") + LAND_KEYS,
                   [[s.year, f] + [_f(s.land[k][i]) for k in LAND_KEYS]
                    for s in traj.snapshots for i, f in enumerate(traj.lands)])
        _write_csv(tmp / "emissions.csv", ("year", "group", "emitter", "intensity", "driver"),
                   [[s.year, g, e, _f(v), _f(x)] for s in traj.snapshots for g, e, v, x in ledger_rows(s.emissions)])
        if directory.exists():
            shutil.rmtree(directory)
        os.replace(tmp, directory)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return directory


def _read_rows(path: Path):
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_trajectory(directory) -> Trajectory:
    """Read a trajectory written by :func:`save_trajectory`."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise MismatchedTrajectories(f"cannot read trajectory manifest: {exc}", path=str(directory)) from None
    years = manifest["years"]
    comms, acts, lands = manifest["commodities"], manifest["activities"], manifest["lands"]
    pos = {y: k for k, y in enumerate(years)}
    macro = [dict() for _ in years]
    for row in _read_rows(directory / "macro.csv"):
        macro[pos[int(row["year"])]] = {k: float(row[k]) for k in MACRO_KEYS}

    def block(fname, key, names, fields):
        out = [{k: np.zeros(len(names)) for k in fields} for _ in years]
        idx = {n: i for i, n in enumerate(names)}
        for row in _read_rows(directory / fname):
            t = pos[int(row["year" if "year" in row else "period"])]
            for k in fields:
                out[t][k][idx[row[key]]] = float(row[k])
        return out

    commodity = block("commodity.csv", "commodity", comms, COMMODITY_KEYS)
    activity = block("activity.csv", "activity", acts, ACTIVITY_KEYS)
    land = block("land.csv", "factor", lands, LAND_KEYS)
    em_rows = [[] for _ in years]
    for row in _read_rows(directory / "emissions.csv"):
        em_rows[pos[int(row["year"])]].append((row["group"], row["emitter"], float(row["intensity"]),
                                               float(row["driver"])))
    snaps = [
        PeriodSnapshot(y, macro[t], commodity[t], activity[t], land[t],
                       ledger_from_rows(manifest["groups"], manifest["emitters"], em_rows[t]))
        for t, y in enumerate(years)
    ]
    return Trajectory(manifest["name"], Mode(manifest["mode"]), tuple(comms), tuple(acts), tuple(lands), snaps,
                      {int(y): float(v) for y, v in manifest["tfp_path"].items()}, manifest.get("overrides", {}))
