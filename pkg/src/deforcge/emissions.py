"""Greenhouse-gas accounting and the scale/composition decomposition.

Emissions come from two sources. AFOLU emissions scale with the activity
level of land-using activities, plus a (negative) sequestration term per
hectare of remaining forest. Other emissions are attached to the
consumption of emitting products and allocated to whoever consumes them
(activities, households, government).

Every ledger keeps its drivers as a (group x emitter) matrix of driver
quantities and a matching intensity matrix, so emissions are
``(intensity * drivers).sum(axis=0)`` per emitter. A group is an emitting
product or an AFOLU class (all compliance variants of one land use).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InconsistentDrivers, MissingCoefficient, WindowOutOfRange
from .sam import COMPLIANT_SUFFIX, NONCOMPLIANT_SUFFIX

FOREST = "forest"
ACTIVITY = "activity"
LAND = "land"


def _afolu_class(name: str) -> str:
    for suffix in (COMPLIANT_SUFFIX, NONCOMPLIANT_SUFFIX):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


@dataclass(frozen=True)
class EmissionCoefficients:
    """Fixed emission intensities.

    Attributes:
        afolu: MtCO2e per unit activity level, by activity.
        sequestration: MtCO2e per hectare of remaining forest (<= 0).
        non_afolu: MtCO2e per unit consumption, keyed (product, emitter).
    """

    afolu: Mapping[str, float]
    sequestration: float
    non_afolu: Mapping[tuple[str, str], float]

    def __post_init__(self):
        if self.sequestration > 0:
            raise ValueError("sequestration intensity must be non-positive")
        if any(v < 0 for v in self.non_afolu.values()):
            raise ValueError("non-AFOLU intensities must be non-negative")
        if any(v < 0 for v in self.afolu.values()):
            raise ValueError("AFOLU intensities must be non-negative")

    @property
    def products(self) -> list[str]:
        return sorted({c for c, _ in self.non_afolu})

    def scaled(self, factor: float) -> "EmissionCoefficients":
        return EmissionCoefficients(
            {k: v * factor for k, v in self.afolu.items()},
            self.sequestration * factor,
            {k: v * factor for k, v in self.non_afolu.items()},
        )


def load_coefficients(path) -> EmissionCoefficients:
    """Read ``emitter_or_product,counterpart,intensity`` rows.

    ``counterpart`` is ``activity`` for AFOLU intensities, ``land`` for the
    forest sequestration row, and otherwise the consuming emitter.
    """
    afolu, non_afolu, seq = {}, {}, None
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            name, other, value = row["emitter_or_product"], row["counterpart"], float(row["intensity"])
            if other == ACTIVITY:
                afolu[name] = value
            elif other == LAND:
                seq = value
            else:
                non_afolu[(name, other)] = value
    if seq is None:
        raise MissingCoefficient("coefficients file has no forest sequestration row", path=str(path))
    return EmissionCoefficients(afolu, seq, non_afolu)


def save_coefficients(coeffs: EmissionCoefficients, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["emitter_or_product", "counterpart", "intensity"])
        for a, v in coeffs.afolu.items():
            w.writerow([a, ACTIVITY, repr(float(v))])
        w.writerow([FOREST, LAND, repr(float(coeffs.sequestration))])
        for (c, j), v in coeffs.non_afolu.items():
            w.writerow([c, j, repr(float(v))])


@dataclass(frozen=True)
class EmissionsLedger:
    """Emissions by emitter together with the drivers that produced them.

    Attributes:
        groups: driver groups (AFOLU classes, the forest, emitting products).
        emitters: activities, households, government and the forest.
        intensity: (groups, emitters) MtCO2e per driver unit.
        drivers: (groups, emitters) driver quantities.
    """

    groups: tuple[str, ...]
    emitters: tuple[str, ...]
    intensity: np.ndarray
    drivers: np.ndarray

    def __post_init__(self):
        shape = (len(self.groups), len(self.emitters))
        if np.shape(self.intensity) != shape or np.shape(self.drivers) != shape:
            raise InconsistentDrivers("intensity and driver matrices must be (groups, emitters)")

    @property
    def by_emitter(self) -> np.ndarray:
        return (self.intensity * self.drivers).sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.by_emitter.sum())

    def emitter(self, name: str) -> float:
        return float(self.by_emitter[self.emitters.index(name)])


def emitter_names(params) -> tuple[str, ...]:
    return tuple(params.activities) + tuple(params.households) + ("gov", FOREST)


def _layout(params, coeffs: EmissionCoefficients):
    """Groups and the intensity matrix for a parameter set."""
    emitters = emitter_names(params)
    col = {e: j for j, e in enumerate(emitters)}
    for a in coeffs.afolu:
        if a not in col:
            raise MissingCoefficient(f"AFOLU coefficient for unknown activity {a!r}", emitter=a)
    classes = sorted({_afolu_class(a) for a in coeffs.afolu})
    products = coeffs.products
    groups = tuple(classes) + (FOREST,) + tuple(products)
    eps = np.zeros((len(groups), len(emitters)))
    for a, v in coeffs.afolu.items():
        eps[groups.index(_afolu_class(a)), col[a]] = v
    # every variant of a covered class needs its own coefficient
    for k, cls in enumerate(classes):
        for a in params.activities:
            if _afolu_class(a) == cls and a not in coeffs.afolu:
                raise MissingCoefficient(f"no AFOLU coefficient for {a!r}", emitter=a)
    eps[groups.index(FOREST), col[FOREST]] = coeffs.sequestration
    for (c, j), v in coeffs.non_afolu.items():
        if j not in col:
            raise MissingCoefficient(f"coefficient for unknown emitter {j!r}", emitter=j, product=c)
        if c not in params.commodities:
            raise MissingCoefficient(f"coefficient for unknown product {c!r}", product=c)
        eps[groups.index(c), col[j]] = v
    return groups, emitters, eps


def consumption_matrix(params, qint, qh, qg) -> np.ndarray:
    """(commodity, emitter) consumption quantities, forest column zero."""
    return np.hstack([qint, qh, np.asarray(qg)[:, None], np.zeros((params.nc, 1))])


def drivers_from(params, groups, emitters, activity, consumption, forest_ha) -> np.ndarray:
    X = np.zeros((len(groups), len(emitters)))
    for g, name in enumerate(groups):
        if name == FOREST:
            X[g, emitters.index(FOREST)] = forest_ha
        elif name in params.commodities:
            X[g] = consumption[params.commodities.index(name)]
        else:
            members = [i for i, a in enumerate(params.activities) if _afolu_class(a) == name]
            X[g, members] = np.asarray(activity)[members]
    return X


def compute_emissions(equilibrium, land, coeffs: EmissionCoefficients) -> EmissionsLedger:
    """Emissions of one solved period.

    Args:
        equilibrium: a solved :class:`PeriodEquilibrium`.
        land: the period's land account (its forest stock drives sequestration).
        coeffs: emission intensities.

    Raises:
        MissingCoefficient: an emitter with base-year use of an emitting
            product, or an AFOLU activity variant, has no coefficient.
    """
    P = equilibrium.params
    groups, emitters, eps = _layout(P, coeffs)
    s = equilibrium.state
    cons = consumption_matrix(P, s.qint, s.qh, s.exo.qg)
    base = consumption_matrix(P, P.base.qint, P.base.qh, P.base.qg)
    for c in coeffs.products:
        i, g = P.commodities.index(c), groups.index(c)
        missing = [emitters[j] for j in np.flatnonzero(base[i] > 0) if eps[g, j] == 0]
        if missing:
            raise MissingCoefficient(f"no coefficient for consumption of {c!r} by {missing[0]!r}",
                                     product=c, emitter=missing[0])
    X = drivers_from(P, groups, emitters, s.u.qa, cons, land.forest)
    return EmissionsLedger(groups, emitters, eps, X)


@dataclass(frozen=True)
class Decomposition:
    """Per-emitter change split into scale and composition effects."""

    emitters: tuple[str, ...]
    scale: np.ndarray
    composition: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.scale + self.composition


def _totals_and_shares(X):
    T = X.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(T[:, None] != 0, X / np.where(T == 0, 1.0, T)[:, None], 0.0)
    return T, sigma


def decompose_emissions(base: EmissionsLedger, scen: EmissionsLedger) -> Decomposition:
    """Scale/composition decomposition of the change from ``base`` to ``scen``.

    With group totals T and emitter shares s of each group,
    scale_j = sum_g e_gj s0_gj (T1_g - T0_g) and
    composition_j = sum_g e_gj T1_g (s1_gj - s0_gj); they add up to the
    emitter's total change. Groups whose total is zero in both ledgers
    carry no emissions.

    Raises:
        InconsistentDrivers: the ledgers differ in groups, emitters or intensities.
    """
    if base.groups != scen.groups or base.emitters != scen.emitters:
        raise InconsistentDrivers("ledgers have different groups or emitters")
    if not np.array_equal(base.intensity, scen.intensity):
        raise InconsistentDrivers("ledgers were built from different coefficients")
    eps = base.intensity
    T0, s0 = _totals_and_shares(base.drivers)
    T1, s1 = _totals_and_shares(scen.drivers)
    scale = (eps * s0 * (T1 - T0)[:, None]).sum(axis=0)
    # a group that appears from nothing has no base shares; attribute it to composition
    composition = (eps * T1[:, None] * (s1 - s0)).sum(axis=0)
    return Decomposition(base.emitters, scale, composition)


def decompose_values(eps, T0, s0, T1, s1) -> tuple[np.ndarray, np.ndarray]:
    """Decomposition for explicit totals and share matrices (groups x emitters)."""
    eps, s0, s1 = np.asarray(eps, float), np.asarray(s0, float), np.asarray(s1, float)
    T0, T1 = np.asarray(T0, float), np.asarray(T1, float)
    scale = (eps * s0 * (T1 - T0)[:, None]).sum(axis=0)
    composition = (eps * T1[:, None] * (s1 - s0)).sum(axis=0)
    return scale, composition


@dataclass(frozen=True)
class EmissionsDeviation:
    """Window averages of emission deviations.

    ``percent`` is the mean of 100 (E_scen - E_base) / E_base per emitter;
    ``scale``, ``composition`` and ``change`` are mean MtCO2e changes with
    the forest sink reported as sequestration (positive = more carbon
    stored).
    """

    emitters: tuple[str, ...]
    percent: np.ndarray
    scale: np.ndarray
    composition: np.ndarray
    change: np.ndarray
    total_percent: float
    window: tuple[int, int]

    def rows(self):
        for k, e in enumerate(self.emitters):
            yield e, self.scale[k], self.composition[k], self.change[k], self.percent[k]


def _pct(s, b):
    s, b = np.asarray(s, float), np.asarray(b, float)
    out = np.zeros(np.broadcast(s, b).shape)
    nz = b != 0
    out[nz] = 100.0 * (s[nz] - b[nz]) / b[nz]
    out[~nz & (s != b)] = np.nan
    return out


def emissions_deviation(base, scen, window: tuple[int, int]) -> EmissionsDeviation:
    """Average emission deviation of ``scen`` from ``base`` over ``window``.

    ``base`` and ``scen`` are trajectories exposing ``years`` and
    ``emissions`` (one ledger per year).

    Raises:
        WindowOutOfRange: the window is empty or not covered by both trajectories.
    """
    start, end = window
    years = list(range(start, end + 1))
    if not years or any(y not in base.years or y not in scen.years for y in years):
        raise WindowOutOfRange(f"window {start}-{end} not inside both horizons", start=start, end=end)
    pct, sc, co, tot = [], [], [], []
    for y in years:
        lb = base.emissions[base.years.index(y)]
        ls = scen.emissions[scen.years.index(y)]
        d = decompose_emissions(lb, ls)
        pct.append(np.append(_pct(ls.by_emitter, lb.by_emitter), _pct(ls.total, lb.total)))
        sc.append(d.scale)
        co.append(d.composition)
        tot.append(d.total)
    emitters = base.emissions[0].emitters
    flip = np.where(np.array(emitters) == FOREST, -1.0, 1.0)
    pct = np.mean(pct, axis=0)
    return EmissionsDeviation(
        emitters=emitters,
        percent=pct[:-1],
        scale=np.mean(sc, axis=0) * flip,
        composition=np.mean(co, axis=0) * flip,
        change=np.mean(tot, axis=0) * flip,
        total_percent=float(pct[-1]),
        window=(start, end),
    )


def write_decomposition(dev: EmissionsDeviation, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["emitter", "scale", "composition", "total", "percent"])
        for e, s, c, t, p in dev.rows():
            w.writerow([e, repr(float(s)), repr(float(c)), repr(float(t)), repr(float(p))])


def ledger_rows(ledger: EmissionsLedger) -> Sequence[tuple[str, str, float, float]]:
    """(group, emitter, intensity, driver) entries where either is non-zero."""
    out = []
    for g, j in zip(*np.nonzero((ledger.intensity != 0) | (ledger.drivers != 0))):
        out.append((ledger.groups[g], ledger.emitters[j], float(ledger.intensity[g, j]), float(ledger.drivers[g, j])))
    return out


def ledger_from_rows(groups, emitters, rows) -> EmissionsLedger:
    eps = np.zeros((len(groups), len(emitters)))
    X = np.zeros_like(eps)
    gi = {g: k for k, g in enumerate(groups)}
    ei = {e: k for k, e in enumerate(emitters)}
    for g, e, v, x in rows:
        eps[gi[g], ei[e]] = v
        X[gi[g], ei[e]] = x
    return EmissionsLedger(tuple(groups), tuple(emitters), eps, X)
