"""Calibrated model parameters and the base-year data they came from."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import MissingElasticity
from ..sam import AccountId, Compliance
from .nests import calibrate_nest

PARTNERS = ("EU", "Rest")
EU, REST = 0, 1

# columns of the value-added nest
LAB, CAP, LAND = 0, 1, 2

OVERRIDE_GROUPS = (
    "land_supply",
    "land_wage_curve",
    "labor_wage_curve",
    "cet",
    "destination_cet",
    "armington",
    "value_added",
)


@dataclass(frozen=True)
class BaseData:
    """Base-year quantities (all base prices are one unless noted)."""

    qx: np.ndarray  # output by activity
    qd: np.ndarray  # domestic sales by commodity
    qe: np.ndarray  # exports (nc, 2)
    qm: np.ndarray  # imports at world prices (nc,)
    qq: np.ndarray  # composite absorption
    qint: np.ndarray  # (nc, na)
    qh: np.ndarray  # (nc, nh)
    qg: np.ndarray
    qinv: np.ndarray
    qf: np.ndarray  # (na, 3) factor use, land in value units
    qk: np.ndarray  # capital stock by activity
    qls: float  # labour force
    qfs: np.ndarray  # land supply by land type (value units)
    ha_per_unit: np.ndarray  # hectares per land value unit
    trg: np.ndarray  # real transfers to households
    rem: np.ndarray  # (nh, 2) remittances, foreign currency
    trrowg: np.ndarray  # (2,) transfers to government
    fsav: np.ndarray  # (2,) foreign savings
    wk: np.ndarray  # base capital rental rate
    forest_ha: float
    gdp: float


@dataclass(frozen=True)
class ModelParameters:
    """Everything the within-period system needs, fixed during a run.

    Commodity ``i`` is produced by activity ``i``. Land type ``l`` is used
    only by activity ``land_activity[l]``.
    """

    accounts: tuple[AccountId, ...]
    activities: tuple[str, ...]
    commodities: tuple[str, ...]
    lands: tuple[str, ...]
    households: tuple[str, ...]
    names: dict  # role -> account name (labor, capital, gov, s_i, taxes, row partners)
    compliance: tuple[Compliance, ...]  # per activity/commodity
    twin_base: tuple[str, ...]  # aggregate name of each commodity (crop for c_crop_comp)
    land_activity: np.ndarray
    land_use: tuple[str, ...]
    land_compliance: tuple[Compliance, ...]
    activity_land: np.ndarray  # land index used by each activity, -1 if none

    # production
    ica: np.ndarray
    iva: np.ndarray
    ta: np.ndarray
    va_delta: np.ndarray
    va_scale: np.ndarray
    va_sigma: np.ndarray

    # trade
    tq: np.ndarray
    tm: np.ndarray
    arm_delta: np.ndarray
    arm_scale: np.ndarray
    arm_sigma: np.ndarray
    cet_delta: np.ndarray
    cet_scale: np.ndarray
    cet_sigma: np.ndarray
    dest_delta: np.ndarray
    dest_scale: np.ndarray
    dest_sigma: np.ndarray
    import_share: np.ndarray  # (nc, 2) partner split of imports, accounting only

    # institutions
    shif_lab: np.ndarray
    shif_cap: np.ndarray
    shif_land: np.ndarray  # (nh, nl)
    beta: np.ndarray  # (nc, nh)
    ty: np.ndarray
    mps: np.ndarray
    cwts: np.ndarray

    # factor markets
    url0: float
    eps_lab: float
    urf0: np.ndarray
    eps_land: np.ndarray
    mu: np.ndarray  # land supply elasticity, zero for compliant land
    depreciation: float
    capital_growth: float
    mobility: float
    cap_invest_share: np.ndarray

    base: BaseData
    elasticity_source: dict = field(default_factory=dict)
    base_year: int = 2019

    @property
    def na(self) -> int:
        return len(self.activities)

    @property
    def nc(self) -> int:
        return len(self.commodities)

    @property
    def nl(self) -> int:
        return len(self.lands)

    @property
    def nh(self) -> int:
        return len(self.households)

    def commodity_index(self, name: str) -> int:
        try:
            return self.commodities.index(name)
        except ValueError:
            raise KeyError(f"unknown commodity {name!r}") from None

    def activity_index(self, name: str) -> int:
        try:
            return self.activities.index(name)
        except ValueError:
            raise KeyError(f"unknown activity {name!r}") from None

    def twins(self) -> list[tuple[int, int]]:
        """(compliant, non-compliant) index pairs of split commodities."""
        out = []
        for i, c in enumerate(self.compliance):
            if c is Compliance.COMPLIANT:
                for j, d in enumerate(self.compliance):
                    if d is Compliance.NONCOMPLIANT and self.twin_base[j] == self.twin_base[i]:
                        out.append((i, j))
        return out

    def noncompliant_lands(self) -> np.ndarray:
        return np.array([c is Compliance.NONCOMPLIANT for c in self.land_compliance])

    def with_overrides(self, overrides: dict[str, float] | None) -> "ModelParameters":
        """Copy with elasticity groups scaled by multiplicative factors.

        Share and shift parameters of the affected nests are recalibrated
        so the base-year point still solves the system.
        """
        if not overrides:
            return self
        changes = {}
        for group, factor in overrides.items():
            if group not in OVERRIDE_GROUPS:
                raise MissingElasticity(f"unknown elasticity group {group!r}", group=group)
            if not factor > 0:
                raise ValueError(f"override factor for {group} must be positive")
        f = {g: float(overrides.get(g, 1.0)) for g in OVERRIDE_GROUPS}
        b = self.base
        if f["land_supply"] != 1.0:
            changes["mu"] = self.mu * f["land_supply"]
        if f["land_wage_curve"] != 1.0:
            changes["eps_land"] = self.eps_land * f["land_wage_curve"]
        if f["labor_wage_curve"] != 1.0:
            changes["eps_lab"] = self.eps_lab * f["labor_wage_curve"]
        if f["cet"] != 1.0 or f["destination_cet"] != 1.0:
            cet_sigma = self.cet_sigma * f["cet"]
            dest_sigma = self.dest_sigma * f["destination_cet"]
            changes.update(trade_supply_nests(b.qd, b.qe, cet_sigma, dest_sigma))
        if f["armington"] != 1.0:
            changes.update(armington_nests(b.qd, b.qm, self.tm, b.qq, self.arm_sigma * f["armington"]))
        if f["value_added"] != 1.0:
            wprice = value_added_prices(self.na, b.wk, b.qf)
            changes.update(value_added_nests(wprice, b.qf, self.va_sigma * f["value_added"], self.iva * b.qx))
        return replace(self, **changes)


def value_added_prices(na, wk, qf):
    p = np.ones((na, 3))
    p[:, CAP] = wk
    return p


def value_added_nests(prices, qf, sigma, qva):
    delta = np.zeros_like(qf)
    scale = np.zeros(len(qf))
    for a in range(len(qf)):
        nest = calibrate_nest(prices[a], qf[a], sigma[a], q0=qva[a])
        delta[a] = nest.delta
        scale[a] = nest.scale
    return {"va_delta": delta, "va_scale": scale, "va_sigma": np.asarray(sigma, float)}


def armington_nests(qd, qm, tm, qq, sigma):
    nc = len(qd)
    delta = np.zeros((nc, 2))
    scale = np.zeros(nc)
    for c in range(nc):
        p0 = np.array([1.0, 1.0 + tm[c]])
        x0 = np.array([qd[c], qm[c]])
        # composite price is one gross of sales tax, so the CES unit cost is (1 - tq)
        nest = calibrate_nest(p0, x0, sigma[c], q0=qq[c])
        delta[c] = nest.delta
        scale[c] = nest.scale
    return {"arm_delta": delta, "arm_scale": scale, "arm_sigma": np.asarray(sigma, float)}


def trade_supply_nests(qd, qe, cet_sigma, dest_sigma):
    nc = len(qd)
    cet_delta = np.zeros((nc, 2))
    cet_scale = np.ones(nc)
    dest_delta = np.zeros((nc, 2))
    dest_scale = np.ones(nc)
    for c in range(nc):
        qe_tot = qe[c].sum()
        if qe_tot > 0:
            bottom = calibrate_nest(np.ones(2), qe[c], -dest_sigma[c])
            dest_delta[c], dest_scale[c] = bottom.delta, bottom.scale
        else:
            dest_delta[c] = (0.5, 0.5)
        top = calibrate_nest(np.ones(2), np.array([qd[c], qe_tot]), -cet_sigma[c])
        cet_delta[c], cet_scale[c] = top.delta, top.scale
    return {
        "cet_delta": cet_delta,
        "cet_scale": cet_scale,
        "cet_sigma": np.asarray(cet_sigma, float),
        "dest_delta": dest_delta,
        "dest_scale": dest_scale,
        "dest_sigma": np.asarray(dest_sigma, float),
    }
