"""Deviation of a scenario from its baseline, averaged over a window."""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..emissions import EmissionsDeviation, emissions_deviation
from ..errors import MismatchedTrajectories, WindowOutOfRange
from .trajectory import Trajectory

LEVEL = "%"
POINTS = "pp"

# (group, label, macro key, unit)
MACRO_INDICATORS = (
    ("macro", "GDP", "gdp", LEVEL),
    ("macro", "Exports", "exports", LEVEL),
    ("macro", "Exports to EU", "exports_eu", LEVEL),
    ("macro", "Exports to Rest", "exports_rest", LEVEL),
    ("macro", "Imports", "imports", LEVEL),
    ("macro", "Production", "production", LEVEL),
    ("macro", "Domestic sales", "domestic_sales", LEVEL),
    ("macro", "Real exchange rate", "real_exchange_rate", LEVEL),
    ("labor", "Real wage", "real_wage", LEVEL),
    ("labor", "Unemployment rate", "unemployment", POINTS),
    ("environment", "Deforestation (ha)", "deforestation", LEVEL),
    ("environment", "Deforestation rate", "deforestation_rate", POINTS),
    ("environment", "GHG emissions", "ghg", LEVEL),
)
COMMODITY_COLUMNS = ("production", "domestic_sales", "exports", "exports_eu", "exports_rest", "imports")


def percent_deviation(scen, base) -> np.ndarray:
    """100 (s - b) / b elementwise; 0 where both are 0, NaN where only b is."""
    s, b = np.asarray(scen, float), np.asarray(base, float)
    out = np.zeros(np.broadcast(s, b).shape)
    nz = b != 0
    out[nz] = 100.0 * (s[nz] - b[nz]) / b[nz]
    out[~nz & (s != b)] = np.nan
    return out


def point_deviation(scen, base) -> np.ndarray:
    """Percentage-point difference of two fractions."""
    return 100.0 * (np.asarray(scen, float) - np.asarray(base, float))


@dataclass(frozen=True)
class Indicator:
    group: str
    label: str
    value: float
    unit: str


@dataclass
class DeviationReport:
    """Window-average deviations in the layout of the published tables.

    ``indicators`` holds the macro, value-added, labour, environment and
    land-use rows in order; ``commodity`` holds the per-commodity table
    (production, domestic sales, exports, imports).
    """

    scenario: str
    baseline: str
    window: tuple[int, int]
    indicators: list[Indicator]
    commodities: tuple[str, ...]
    commodity: dict[str, np.ndarray]
    emissions: EmissionsDeviation | None = None
    notes: list[str] = field(default_factory=list)

    def value(self, label: str) -> float:
        for row in self.indicators:
            if row.label == label:
                return row.value
        raise KeyError(label)

    def values(self) -> dict[str, float]:
        return {row.label: row.value for row in self.indicators}

    def commodity_value(self, commodity: str, column: str) -> float:
        return float(self.commodity[column][self.commodities.index(commodity)])


def _check(base: Trajectory, scen: Trajectory, window):
    if (base.commodities, base.activities, base.lands) != (scen.commodities, scen.activities, scen.lands):
        raise MismatchedTrajectories("trajectories were built on different models",
                                     baseline=base.name, scenario=scen.name)
    if base.years != scen.years:
        raise MismatchedTrajectories("trajectories cover different years", baseline=base.name, scenario=scen.name)
    start, end = window
    if not (start <= end and start in base.years and end in base.years):
        raise WindowOutOfRange(f"window {start}-{end} is outside the horizon {base.years[0]}-{base.years[-1]}",
                               start=start, end=end)
    return [base.years.index(y) for y in range(start, end + 1)]


def _mean(values) -> float:
    return float(np.mean(values))


def deviation_report(base: Trajectory, scen: Trajectory, window: tuple[int, int] = (2025, 2030)) -> DeviationReport:
    """Average deviation of ``scen`` from ``base`` over ``window`` (inclusive).

    Levels are the mean of 100 (x_s - x_b) / x_b; unemployment and the
    deforestation rate are mean differences in percentage points.

    Raises:
        MismatchedTrajectories: different models or horizons.
        WindowOutOfRange: the window is not inside the horizon.
    """
    rows = _check(base, scen, window)

    def pick(arr):
        return np.asarray(arr)[rows]

    out: list[Indicator] = []
    for group, label, key, unit in MACRO_INDICATORS:
        b, s = pick(base.macro(key)), pick(scen.macro(key))
        dev = point_deviation(s, b) if unit == POINTS else percent_deviation(s, b)
        out.append(Indicator(group, label, _mean(dev), unit))
        if label == "Real exchange rate":
            vb, vs = pick(base.series("activity", "value_added")), pick(scen.series("activity", "value_added"))
            va = percent_deviation(vs, vb).mean(axis=0)
            for a, v in zip(base.activities, va):
                out.append(Indicator("value_added", a, float(v), LEVEL))
            out.append(Indicator("value_added", "Total value added",
                                 _mean(percent_deviation(vs.sum(axis=1), vb.sum(axis=1))), LEVEL))
    lb, ls = pick(base.series("land", "QLAND")), pick(scen.series("land", "QLAND"))
    for f, v in zip(base.lands, percent_deviation(ls, lb).mean(axis=0)):
        out.append(Indicator("land_use", f, float(v), LEVEL))

    commodity = {}
    for col in COMMODITY_COLUMNS:
        if col == "exports":
            b = pick(base.series("commodity", "exports_eu")) + pick(base.series("commodity", "exports_rest"))
            s = pick(scen.series("commodity", "exports_eu")) + pick(scen.series("commodity", "exports_rest"))
        else:
            b, s = pick(base.series("commodity", col)), pick(scen.series("commodity", col))
        commodity[col] = percent_deviation(s, b).mean(axis=0)
    return DeviationReport(
        scenario=scen.name,
        baseline=base.name,
        window=tuple(window),
        indicators=out,
        commodities=base.commodities,
        commodity=commodity,
        emissions=emissions_deviation(base, scen, window),
    )


# --------------------------------------------------------------------------
# output files


def _header(fh, timestamp: bool):
    if timestamp:
        fh.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n")


def _f(x) -> str:
    return repr(float(x))


def write_macro(report: DeviationReport, path, timestamp: bool = True) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _header(fh, timestamp)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "indicator", "unit", "deviation"])
        for row in report.indicators:
            w.writerow([row.group, row.label, row.unit, _f(row.value)])


def write_commodity(report: DeviationReport, path, timestamp: bool = True) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _header(fh, timestamp)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["commodity", *COMMODITY_COLUMNS])
        for i, c in enumerate(report.commodities):
            w.writerow([c, *(_f(report.commodity[col][i]) for col in COMMODITY_COLUMNS)])


def write_emissions(report: DeviationReport, path, timestamp: bool = True) -> None:
    dev = report.emissions
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _header(fh, timestamp)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["emitter", "scale", "composition", "total", "percent"])
        for e, s, c, t, p in dev.rows():
            w.writerow([e, _f(s), _f(c), _f(t), _f(p)])
        w.writerow(["all", _f(dev.scale.sum()), _f(dev.composition.sum()), _f(dev.change.sum()),
                    _f(dev.total_percent)])


def write_report(report: DeviationReport, directory, timestamp: bool = True) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / "deviations_macro.csv", d / "deviations_commodity.csv", d / "emissions_decomposition.csv"]
    write_macro(report, paths[0], timestamp)
    write_commodity(report, paths[1], timestamp)
    write_emissions(report, paths[2], timestamp)
    return paths


def read_csv_rows(path) -> list[dict]:
    """Rows of a report CSV, skipping the optional timestamp line."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


# EU exports must fall by more than this many percent to count as a strong fall
STRONG_EU_FALL = -1.0
LAND_TWINS = ("crop", "lvst", "fore")


def sign_checks(report: DeviationReport) -> list[Check]:
    """Expected directions of the shock relative to the baseline."""
    v = report.values()
    out = [
        Check("GDP falls", v["GDP"] < 0, f"{v['GDP']:.6f}"),
        Check("total exports fall", v["Exports"] < 0, f"{v['Exports']:.6f}"),
        Check("EU exports fall strongly", v["Exports to EU"] < STRONG_EU_FALL, f"{v['Exports to EU']:.6f}"),
        Check("Rest exports do not fall", v["Exports to Rest"] >= 0, f"{v['Exports to Rest']:.6f}"),
        Check("real depreciation", v["Real exchange rate"] > 0, f"{v['Real exchange rate']:.6f}"),
        Check("deforestation falls", v["Deforestation (ha)"] < 0, f"{v['Deforestation (ha)']:.6f}"),
        Check("GHG emissions fall", v["GHG emissions"] < 0, f"{v['GHG emissions']:.6f}"),
    ]
    for base in LAND_TWINS:
        comp, ncomp = f"a_{base}_comp", f"a_{base}_ncomp"
        if comp in v and ncomp in v:
            out.append(Check(f"{base} non-compliant value added falls more than compliant", v[ncomp] < v[comp],
                             f"non-compliant {v[ncomp]:.6f}, compliant {v[comp]:.6f}"))
    return out
