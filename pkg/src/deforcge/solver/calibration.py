"""Calibration of model parameters from a balanced SAM."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from ..cge.params import (
    BaseData,
    ModelParameters,
    armington_nests,
    trade_supply_nests,
    value_added_nests,
    value_added_prices,
)
from ..errors import DimensionMismatch, InconsistentFactorData, MissingElasticity, UnbalancedSAM
from ..sam import (COMPLIANT_SUFFIX, NONCOMPLIANT_SUFFIX, Compliance, Kind, Partner, SocialAccountingMatrix,
                   check_balance)

DEFAULT_TAXES = {"tax_act": "tax_act", "tax_com": "tax_com", "tax_imp": "tax_imp", "tax_dir": "tax_dir"}


@dataclass(frozen=True)
class Elasticities:
    """Behavioural elasticities keyed by account name.

    Split accounts fall back to the entry of their aggregate name, so a
    table for ``c_crop`` covers ``c_crop_comp`` and ``c_crop_ncomp``.
    The destination CET elasticity is ``destination_factor`` times the
    top-level CET elasticity.
    """

    armington: Mapping[str, float]
    cet: Mapping[str, float]
    value_added: Mapping[str, float] = field(default_factory=dict)
    value_added_default: float | None = 0.8
    destination_factor: float = 2.0

    def lookup(self, table: str, name: str) -> float:
        values = getattr(self, table)
        for key in (name, _aggregate_name(name)):
            if key in values:
                v = float(values[key])
                if not v > 0:
                    raise MissingElasticity(f"{table} elasticity for {name!r} must be positive", account=name)
                return v
        if table == "value_added" and self.value_added_default is not None:
            return float(self.value_added_default)
        raise MissingElasticity(f"no {table} elasticity for {name!r}", account=name, table=table)


@dataclass(frozen=True)
class LandFactor:
    use: str
    hectares: float
    unemployment: float


@dataclass(frozen=True)
class FactorData:
    """Endowment data that the SAM does not carry."""

    labor_account: str
    labor_unemployment: float
    capital_account: str
    land: Mapping[str, LandFactor]
    labor_wage_elasticity: float = -0.1
    land_wage_elasticity: float = -0.4
    land_supply_elasticity: float = 0.06
    forest_stock_ha: float = 0.0
    depreciation: float = 0.05
    capital_growth: float = 0.03
    mobility: float = 0.25
    taxes: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_TAXES))

    @classmethod
    def from_dict(cls, d: Mapping) -> "FactorData":
        try:
            lab, cap, land = d["labor"], d["capital"], d["land"]
            factors = {
                name: LandFactor(str(v["use"]), float(v["hectares"]), float(v["unemployment"]))
                for name, v in land["factors"].items()
            }
            return cls(
                labor_account=lab["account"],
                labor_unemployment=float(lab["unemployment"]),
                capital_account=cap["account"],
                land=factors,
                labor_wage_elasticity=float(lab.get("wage_curve_elasticity", -0.1)),
                land_wage_elasticity=float(land.get("wage_curve_elasticity", -0.4)),
                land_supply_elasticity=float(land.get("supply_elasticity", 0.06)),
                forest_stock_ha=float(land.get("forest_stock_ha", 0.0)),
                depreciation=float(cap.get("depreciation", 0.05)),
                capital_growth=float(cap.get("base_growth", 0.03)),
                mobility=float(land.get("mobility", 0.25)),
                taxes={**DEFAULT_TAXES, **d.get("taxes", {})},
            )
        except (KeyError, TypeError) as exc:
            raise InconsistentFactorData(f"factor data is missing {exc}") from None


def load_factor_data(path) -> FactorData:
    with Path(path).open(encoding="utf-8") as fh:
        return FactorData.from_dict(yaml.safe_load(fh))


def load_elasticities(trade_path, va_path=None, value_added_default: float | None = 0.8) -> Elasticities:
    """Read ``account,armington,cet`` (and optionally ``account,value_added``)."""
    arm, cet, va = {}, {}, {}
    with Path(trade_path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row.get("armington"):
                arm[row["account"]] = float(row["armington"])
            if row.get("cet"):
                cet[row["account"]] = float(row["cet"])
    if va_path is not None:
        with Path(va_path).open(newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                va[row["account"]] = float(row["value_added"])
    return Elasticities(arm, cet, va, value_added_default)


def _aggregate_name(name: str) -> str:
    for suffix in (COMPLIANT_SUFFIX, NONCOMPLIANT_SUFFIX):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


def _single(sam, kind):
    accs = sam.of_kind(kind)
    if len(accs) != 1:
        raise InconsistentFactorData(f"expected exactly one {kind.value} account, found {len(accs)}")
    return accs[0].name


def calibrate(sam: SocialAccountingMatrix, elasticities: Elasticities, factors: FactorData) -> ModelParameters:
    """Choose shares and shifts so the SAM is the base-year equilibrium."""
    report = check_balance(sam, 1e-7)
    if not report.balanced:
        worst = report.worst(1)[0]
        raise UnbalancedSAM(f"SAM not balanced (worst account {worst[0]})", imbalance=report.max_relative_imbalance)
    F = sam.flows
    ix = sam.index
    rs = sam.row_sums()

    activities = tuple(a.name for a in sam.of_kind(Kind.ACTIVITY))
    commodity_set = {c.name for c in sam.of_kind(Kind.COMMODITY)}
    commodities = []
    for a in activities:
        sold = [c for c in commodity_set if F[ix(a), ix(c)] > 0]
        if len(sold) != 1:
            raise DimensionMismatch(f"activity {a!r} must produce exactly one commodity", activity=a)
        commodities.append(sold[0])
    if set(commodities) != commodity_set or len(set(commodities)) != len(commodities):
        raise DimensionMismatch("activities and commodities must pair one to one")
    commodities = tuple(commodities)
    households = tuple(h.name for h in sam.of_kind(Kind.HOUSEHOLD))
    gov = _single(sam, Kind.GOVERNMENT)
    s_i = _single(sam, Kind.SAVINGS_INVESTMENT)
    rows = {a.partner: a.name for a in sam.of_kind(Kind.REST_OF_WORLD)}
    if set(rows) != {Partner.EU, Partner.REST} or len(sam.of_kind(Kind.REST_OF_WORLD)) != 2:
        raise InconsistentFactorData("rest of the world must be partitioned into exactly EU and Rest")
    row_names = (rows[Partner.EU], rows[Partner.REST])
    taxes = dict(factors.taxes)
    for t in taxes.values():
        if t not in sam or sam.account(t).kind is not Kind.TAX:
            raise InconsistentFactorData(f"tax account {t!r} not found")

    lab, cap = factors.labor_account, factors.capital_account
    factor_names = [f.name for f in sam.of_kind(Kind.FACTOR)]
    for f in (lab, cap):
        if f not in factor_names:
            raise InconsistentFactorData(f"factor {f!r} not in SAM")
    lands = tuple(f for f in factor_names if f not in (lab, cap))
    if set(lands) != set(factors.land):
        raise InconsistentFactorData("land factors in SAM and factor data differ",
                                     sam=sorted(lands), data=sorted(factors.land))

    ia = [ix(a) for a in activities]
    ic = [ix(c) for c in commodities]
    ih = [ix(h) for h in households]
    na = len(activities)
    nh = len(households)

    qx = np.array([F[ix(a), ix(c)] for a, c in zip(activities, commodities)])
    qint = F[np.ix_(ic, ia)]
    ta = F[ix(taxes["tax_act"]), ia] / qx
    qe = np.column_stack([F[ic, ix(r)] for r in row_names])
    m_by = np.column_stack([F[ix(r), ic] for r in row_names])
    qm = m_by.sum(axis=1)
    import_share = np.where(qm[:, None] > 0, m_by / np.where(qm > 0, qm, 1.0)[:, None], 0.5)
    tm = np.where(qm > 0, F[ix(taxes["tax_imp"]), ic] / np.where(qm > 0, qm, 1.0), 0.0)
    qh = F[np.ix_(ic, ih)]
    qg = F[ic, ix(gov)]
    qinv = F[ic, ix(s_i)]
    qq = qint.sum(axis=1) + qh.sum(axis=1) + qg + qinv
    tq = F[ix(taxes["tax_com"]), ic] / qq
    qd = qx - qe.sum(axis=1)
    if np.any(qd <= 0):
        raise InconsistentFactorData("every commodity needs positive domestic sales")

    # factors
    lab_pay = F[ix(lab), ia]
    cap_pay = F[ix(cap), ia]
    land_activity = np.zeros(len(lands), dtype=int)
    activity_land = -np.ones(na, dtype=int)
    land_pay = np.zeros(len(lands))
    for l, f in enumerate(lands):
        users = [k for k, a in enumerate(ia) if F[ix(f), a] > 0]
        if len(users) != 1:
            raise InconsistentFactorData(f"land factor {f!r} must be used by exactly one activity", factor=f)
        if activity_land[users[0]] >= 0:
            raise InconsistentFactorData(f"activity {activities[users[0]]!r} uses more than one land type")
        land_activity[l] = users[0]
        activity_land[users[0]] = l
        land_pay[l] = F[ix(f), ia[users[0]]]
        if F[ix(f)].sum() - land_pay[l] > 1e-9 * land_pay[l]:
            raise InconsistentFactorData(f"land factor {f!r} receives income from non-activities", factor=f)
        data = factors.land[f]
        if not data.hectares > 0:
            raise InconsistentFactorData(f"land factor {f!r} is paid but has no hectares", factor=f)
        if not 0 < data.unemployment < 1:
            raise InconsistentFactorData(f"land unemployment for {f!r} must lie in (0, 1)", factor=f)
    if not 0 < factors.labor_unemployment < 1:
        raise InconsistentFactorData("labour unemployment must lie in (0, 1)")
    for f in (lab, cap, *lands):
        paid_out = F[:, ix(f)]
        if abs(paid_out[ih].sum() - paid_out.sum()) > 1e-9 * max(1.0, paid_out.sum()):
            raise InconsistentFactorData(f"factor {f!r} pays income to non-household accounts", factor=f)
        if abs(paid_out.sum() - rs[ix(f)]) > 1e-7 * max(1.0, rs[ix(f)]):
            raise InconsistentFactorData(f"factor {f!r} income and payments differ", factor=f)

    va = lab_pay + cap_pay + np.array([land_pay[activity_land[k]] if activity_land[k] >= 0 else 0.0
                                       for k in range(na)])
    if np.any(va <= 0):
        raise InconsistentFactorData("every activity needs positive value added")
    iva = va / qx
    ica = qint / qx[None, :]

    k_total = qinv.sum() / (factors.depreciation + factors.capital_growth)
    if cap_pay.sum() > 0 and not k_total > 0:
        raise InconsistentFactorData("capital income without investment to anchor the stock")
    r0 = cap_pay.sum() / k_total
    qk = cap_pay / r0
    wk = np.full(na, r0)
    qf = np.zeros((na, 3))
    qf[:, 0] = lab_pay
    qf[:, 1] = qk
    for l, a in enumerate(land_activity):
        qf[a, 2] = land_pay[l]
    urf0 = np.array([factors.land[f].unemployment for f in lands])
    qfs = land_pay / (1 - urf0)
    ha_per_unit = np.array([factors.land[f].hectares for f in lands]) / land_pay
    qls = lab_pay.sum() / (1 - factors.labor_unemployment)

    # households
    yh = rs[ih]
    shif = {}
    for f in (lab, cap, *lands):
        col = F[ih, ix(f)]
        shif[f] = col / col.sum() if col.sum() > 0 else np.full(nh, 1.0 / nh)
    taxd = F[ix(taxes["tax_dir"]), ih]
    savh = F[ix(s_i), ih]
    cons = qh.sum(axis=0)
    for k, h in enumerate(households):
        if abs(taxd[k] + savh[k] + cons[k] - F[:, ih[k]].sum()) > 1e-9 * max(1.0, yh[k]):
            raise InconsistentFactorData(f"household {h!r} spends on accounts the model does not carry")
    ty = taxd / yh
    mps = savh / (yh - taxd)
    beta = qh / cons[None, :]
    trg = F[ih, ix(gov)]
    rem = np.column_stack([F[ih, ix(r)] for r in row_names])
    trrowg = np.array([F[ix(gov), ix(r)] for r in row_names])
    fsav = np.array([F[ix(s_i), ix(r)] - F[ix(r), ix(s_i)] for r in row_names])
    cwts = qh.sum(axis=1) / qh.sum()

    # elasticities
    arm_sigma = np.array([elasticities.lookup("armington", c) for c in commodities])
    cet_sigma = np.array([elasticities.lookup("cet", c) for c in commodities])
    dest_sigma = elasticities.destination_factor * cet_sigma
    va_sigma = np.array([elasticities.lookup("value_added", a) for a in activities])

    compliance = tuple(sam.account(c).compliance for c in commodities)
    land_compliance = tuple(sam.account(f).compliance for f in lands)
    mu = np.array([factors.land_supply_elasticity if c is Compliance.NONCOMPLIANT else 0.0
                   for c in land_compliance])

    nests = {}
    nests.update(value_added_nests(value_added_prices(na, wk, qf), qf, va_sigma, iva * qx))
    nests.update(armington_nests(qd, qm, tm, qq, arm_sigma))
    nests.update(trade_supply_nests(qd, qe, cet_sigma, dest_sigma))

    gdp = float(qh.sum() + qg.sum() + qinv.sum() + qe.sum() - qm.sum())
    base = BaseData(
        qx=qx, qd=qd, qe=qe, qm=qm, qq=qq, qint=qint, qh=qh, qg=qg, qinv=qinv, qf=qf, qk=qk, qls=float(qls),
        qfs=qfs, ha_per_unit=ha_per_unit, trg=trg, rem=rem, trrowg=trrowg, fsav=fsav, wk=wk,
        forest_ha=float(factors.forest_stock_ha), gdp=gdp,
    )
    names = {"labor": lab, "capital": cap, "gov": gov, "s_i": s_i,
             "row_eu": row_names[0], "row_rest": row_names[1], **taxes}
    return ModelParameters(
        accounts=sam.accounts,
        activities=activities,
        commodities=commodities,
        lands=lands,
        households=households,
        names=names,
        compliance=compliance,
        twin_base=tuple(_aggregate_name(c) for c in commodities),
        land_activity=land_activity,
        land_use=tuple(factors.land[f].use for f in lands),
        land_compliance=land_compliance,
        activity_land=activity_land,
        ica=ica,
        iva=iva,
        ta=ta,
        tq=tq,
        tm=tm,
        import_share=import_share,
        shif_lab=shif[lab],
        shif_cap=shif[cap],
        shif_land=np.column_stack([shif[f] for f in lands]) if lands else np.zeros((nh, 0)),
        beta=beta,
        ty=ty,
        mps=mps,
        cwts=cwts,
        url0=float(factors.labor_unemployment),
        eps_lab=float(factors.labor_wage_elasticity),
        urf0=urf0,
        eps_land=np.full(len(lands), float(factors.land_wage_elasticity)),
        mu=mu,
        depreciation=float(factors.depreciation),
        capital_growth=float(factors.capital_growth),
        mobility=float(factors.mobility),
        cap_invest_share=cap_pay / cap_pay.sum(),
        base=base,
        elasticity_source={"armington": arm_sigma.copy(), "cet": cet_sigma.copy(), "value_added": va_sigma.copy()},
        base_year=sam.base_year,
        **nests,
    )
