"""Within-period equilibrium system.

The unknown vector holds, in log space, domestic prices ``PD``, activity
levels ``QA``, sector-specific capital rents ``WK``, the wage ``WL`` and
labour unemployment ``URL``, land rents ``WF`` and land unemployment
``URF``, the exchange rate ``EXR``, an investment scaling ``IADJ`` and,
for every export cap, the price factor ``1 - wedge`` on the capped flow.
Everything else follows explicitly. The savings-investment balance is the
redundant equation and is reported as the Walras residual.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, DomainError, NegativeDisposableIncome, NonPositivePrice
from ..sam import SocialAccountingMatrix
from .nests import agg_price, nest_quantities
from .params import CAP, EU, LAB, LAND, ModelParameters


@dataclass(frozen=True)
class PeriodInputs:
    """Exogenous values for one period."""

    year: int
    tfp: np.ndarray  # per activity
    qls: float
    qfs: np.ndarray  # land supply per land type, model units
    qk: np.ndarray  # capital stock per activity
    pwm: np.ndarray
    pwe: np.ndarray  # (nc, 2)
    wedge: np.ndarray  # (nc, 2) fraction of the world price removed
    fsav: float
    cpi: float
    qg: np.ndarray
    trg: np.ndarray  # real transfers per household
    rem: np.ndarray  # (nh, 2)
    trrowg: np.ndarray  # (2,)
    caps: tuple = ()  # ((commodity index, EU export target), ...)

    def with_(self, **changes) -> "PeriodInputs":
        return replace(self, **changes)


def base_inputs(params: ModelParameters, year: int | None = None) -> PeriodInputs:
    b = params.base
    return PeriodInputs(
        year=params.base_year if year is None else year,
        tfp=np.ones(params.na),
        qls=b.qls,
        qfs=b.qfs.copy(),
        qk=b.qk.copy(),
        pwm=np.ones(params.nc),
        pwe=np.ones((params.nc, 2)),
        wedge=np.zeros((params.nc, 2)),
        fsav=float(b.fsav.sum()),
        cpi=1.0,
        qg=b.qg.copy(),
        trg=b.trg.copy(),
        rem=b.rem.copy(),
        trrowg=b.trrowg.copy(),
    )


@dataclass
class PeriodUnknowns:
    pd: np.ndarray
    qa: np.ndarray
    wk: np.ndarray
    wl: float
    url: float
    wf: np.ndarray
    urf: np.ndarray
    exr: float
    iadj: float
    vcap: np.ndarray = field(default_factory=lambda: np.zeros(0))


class Layout:
    """Positions of each unknown block inside the flat vector."""

    def __init__(self, na: int, nc: int, nl: int, ncap: int = 0):
        if na != nc:
            raise DimensionMismatch("one commodity per activity is required", na=na, nc=nc)
        sizes = [("pd", nc), ("qa", na), ("wk", na), ("wl", 1), ("url", 1), ("wf", nl), ("urf", nl),
                 ("exr", 1), ("iadj", 1), ("vcap", ncap)]
        self.slices = {}
        pos = 0
        for name, n in sizes:
            self.slices[name] = slice(pos, pos + n)
            pos += n
        self.n = pos
        self.na, self.nc, self.nl, self.ncap = na, nc, nl, ncap

    def pack(self, u: PeriodUnknowns) -> np.ndarray:
        x = np.empty(self.n)
        for name, sl in self.slices.items():
            x[sl] = np.atleast_1d(getattr(u, name))
        if np.any(x <= 0):
            raise NonPositivePrice("unknowns must be strictly positive")
        return np.log(x)

    def unpack(self, z: np.ndarray) -> PeriodUnknowns:
        x = np.exp(z)
        s = self.slices
        return PeriodUnknowns(
            pd=x[s["pd"]], qa=x[s["qa"]], wk=x[s["wk"]], wl=float(x[s["wl"]][0]), url=float(x[s["url"]][0]),
            wf=x[s["wf"]], urf=x[s["urf"]], exr=float(x[s["exr"]][0]), iadj=float(x[s["iadj"]][0]),
            vcap=x[s["vcap"]],
        )

    def labels(self, params: ModelParameters) -> list[str]:
        """Unknown labels in vector order."""
        out = [f"PD[{c}]" for c in params.commodities]
        out += [f"QA[{a}]" for a in params.activities]
        out += [f"WK[{a}]" for a in params.activities]
        out += ["WL", "UR[labor]"]
        out += [f"WF[{f}]" for f in params.lands]
        out += [f"UR[{f}]" for f in params.lands]
        out += ["EXR", "IADJ"]
        out += [f"VCAP[{k}]" for k in range(self.ncap)]
        return out


def equation_labels(params: ModelParameters, ncap: int = 0) -> list[str]:
    out = [f"zero_profit[{a}]" for a in params.activities]
    out += [f"capital_market[{a}]" for a in params.activities]
    out += ["labor_market", "labor_wage_curve"]
    out += [f"land_market[{f}]" for f in params.lands]
    out += [f"land_wage_curve[{f}]" for f in params.lands]
    out += [f"domestic_market[{c}]" for c in params.commodities]
    out += ["balance_of_payments", "numeraire"]
    out += [f"export_cap[{k}]" for k in range(ncap)]
    return out


@dataclass
class State:
    """All endogenous variables at one point (not necessarily a solution)."""

    u: PeriodUnknowns
    exo: PeriodInputs
    pm: np.ndarray
    pe: np.ndarray
    wedge: np.ndarray
    peagg: np.ndarray
    px: np.ndarray
    pq: np.ndarray
    pva: np.ndarray
    cva: np.ndarray
    cpi: float
    qf: np.ndarray
    qd_sup: np.ndarray
    qe: np.ndarray
    qint: np.ndarray
    qh: np.ndarray
    qinv: np.ndarray
    qq: np.ndarray
    qd_dem: np.ndarray
    qm: np.ndarray
    yfl: float
    yfk: np.ndarray
    yfland: np.ndarray
    yh: np.ndarray
    taxd: np.ndarray
    savh: np.ndarray
    eh: np.ndarray
    yg: float
    gsav: float
    tax_act: np.ndarray
    tax_com: np.ndarray
    tax_imp: np.ndarray


def evaluate(params: ModelParameters, u: PeriodUnknowns, exo: PeriodInputs) -> State:
    """Compute every explicit variable from the unknowns."""
    P = params
    if np.any(u.pd <= 0) or u.exr <= 0 or u.wl <= 0 or np.any(u.wf <= 0) or np.any(u.wk <= 0):
        raise NonPositivePrice("prices must be strictly positive")
    if not (0 < u.url < 1) or np.any(u.urf <= 0) or np.any(u.urf >= 1):
        raise DomainError("unemployment rates must lie in (0, 1)")
    exr = u.exr
    pm = exo.pwm * (1 + P.tm) * exr
    wedge = exo.wedge
    if exo.caps:
        wedge = wedge.copy()
        for k, (ci, _) in enumerate(exo.caps):
            wedge[ci, EU] = 1.0 - u.vcap[k]
    pe = exo.pwe * (1 - wedge) * exr
    peagg = agg_price(pe, P.dest_delta, P.dest_scale, -P.dest_sigma)
    ptop = np.column_stack([u.pd, peagg])
    px = agg_price(ptop, P.cet_delta, P.cet_scale, -P.cet_sigma)
    parm = np.column_stack([u.pd, pm])
    pq_net = agg_price(parm, P.arm_delta, P.arm_scale, P.arm_sigma)
    pq = pq_net / (1 - P.tq)
    pva = (px * (1 - P.ta) - pq @ P.ica) / P.iva
    cpi = float(P.cwts @ pq)

    fp = np.ones((P.na, 3))
    fp[:, LAB] = u.wl
    fp[:, CAP] = u.wk
    has_land = P.activity_land >= 0
    fp[has_land, LAND] = u.wf[P.activity_land[has_land]]
    va_scale = P.va_scale * exo.tfp
    cva = agg_price(fp, P.va_delta, va_scale, P.va_sigma)
    qva = P.iva * u.qa
    qf = nest_quantities(qva, cva, fp, P.va_delta, va_scale, P.va_sigma)

    qtop = nest_quantities(u.qa, px, ptop, P.cet_delta, P.cet_scale, -P.cet_sigma)
    qd_sup = qtop[:, 0]
    qe = nest_quantities(qtop[:, 1], peagg, pe, P.dest_delta, P.dest_scale, -P.dest_sigma)

    yfl = u.wl * qf[:, LAB].sum()
    yfk = u.wk * qf[:, CAP]
    yfland = u.wf * qf[P.land_activity, LAND]
    yh = P.shif_lab * yfl + P.shif_cap * yfk.sum() + P.shif_land @ yfland + exo.trg * cpi + exo.rem.sum(axis=1) * exr
    if np.any(yh < 0):
        raise NegativeDisposableIncome("negative household income")
    taxd = P.ty * yh
    savh = P.mps * (yh - taxd)
    eh = yh - taxd - savh
    qh = P.beta * eh[None, :] / pq[:, None]
    qint = P.ica * u.qa[None, :]
    qinv = P.base.qinv * u.iadj
    qq = qint.sum(axis=1) + qh.sum(axis=1) + exo.qg + qinv
    qarm = nest_quantities(qq, pq_net, parm, P.arm_delta, P.arm_scale, P.arm_sigma)

    tax_act = P.ta * px * u.qa
    tax_com = P.tq * pq * qq
    tax_imp = P.tm * exo.pwm * exr * qarm[:, 1]
    yg = tax_act.sum() + tax_com.sum() + tax_imp.sum() + taxd.sum() + exo.trrowg.sum() * exr
    gsav = yg - pq @ exo.qg - exo.trg.sum() * cpi
    return State(
        u=u, exo=exo, pm=pm, pe=pe, wedge=wedge, peagg=peagg, px=px, pq=pq, pva=pva, cva=cva, cpi=cpi,
        qf=qf, qd_sup=qd_sup, qe=qe, qint=qint, qh=qh, qinv=qinv, qq=qq, qd_dem=qarm[:, 0], qm=qarm[:, 1],
        yfl=yfl, yfk=yfk, yfland=yfland, yh=yh, taxd=taxd, savh=savh, eh=eh, yg=yg, gsav=gsav,
        tax_act=tax_act, tax_com=tax_com, tax_imp=tax_imp,
    )


def residual_vector(params: ModelParameters, s: State) -> np.ndarray:
    """Raw residuals in natural units (see :func:`equation_labels`)."""
    P, u, exo = params, s.u, s.exo
    land_dem = s.qf[P.land_activity, LAND]
    parts = [
        s.pva - s.cva,
        s.qf[:, CAP] - exo.qk,
        [s.qf[:, LAB].sum() - (1 - u.url) * exo.qls],
        [u.wl / s.cpi - (u.url / P.url0) ** P.eps_lab],
        land_dem - (1 - u.urf) * exo.qfs,
        u.wf / s.cpi - (u.urf / P.urf0) ** P.eps_land,
        s.qd_sup - s.qd_dem,
        [balance_of_payments(P, s)],
        [s.cpi - exo.cpi],
        [s.qe[ci, EU] - target for ci, target in exo.caps],
    ]
    return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def balance_of_payments(params: ModelParameters, s: State) -> float:
    """Foreign-currency inflows minus outflows."""
    exo = s.exo
    inflow = (exo.pwe * (1 - s.wedge) * s.qe).sum() + exo.fsav + exo.rem.sum() + exo.trrowg.sum()
    return float(inflow - exo.pwm @ s.qm)


def walras_residual(params: ModelParameters, s: State) -> float:
    """Savings minus investment, relative to investment spending."""
    inv = float(s.pq @ s.qinv)
    sav = s.savh.sum() + s.gsav + s.exo.fsav * s.u.exr
    return (sav - inv) / max(1.0, abs(inv))


def residual_scale(params: ModelParameters, ncap: int = 0, cap_scale=None) -> np.ndarray:
    """Base magnitudes that make every residual dimensionless."""
    b = params.base
    parts = [
        np.ones(params.na),
        np.maximum(b.qk, 1e-12),
        [b.qls],
        [1.0],
        np.maximum(b.qfs, 1e-12),
        np.ones(params.nl),
        np.maximum(np.maximum(b.qd, 1e-3 * b.qx), 1e-12),
        [max(1.0, b.qm.sum())],
        [1.0],
        cap_scale if cap_scale is not None else np.ones(ncap),
    ]
    return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def assemble_residuals(params: ModelParameters, x: PeriodUnknowns, exogenous: PeriodInputs) -> np.ndarray:
    """Residual vector of the square system at ``x``."""
    ncap = len(exogenous.caps)
    if len(np.atleast_1d(x.vcap)) != ncap:
        raise DimensionMismatch("one cap price factor per export cap is required", caps=ncap)
    layout = Layout(params.na, params.nc, params.nl, ncap)
    r = residual_vector(params, evaluate(params, x, exogenous))
    if r.size != layout.n:
        raise DimensionMismatch(f"{r.size} equations for {layout.n} unknowns")
    return r


def base_unknowns(params: ModelParameters, ncap: int = 0) -> PeriodUnknowns:
    b = params.base
    return PeriodUnknowns(
        pd=np.ones(params.nc), qa=b.qx.copy(), wk=b.wk.copy(), wl=1.0, url=params.url0,
        wf=np.ones(params.nl), urf=params.urf0.copy(), exr=1.0, iadj=1.0, vcap=np.ones(ncap),
    )


def dump_residuals(params: ModelParameters, x: PeriodUnknowns, exogenous: PeriodInputs, path) -> None:
    """Write labelled residuals to CSV for debugging."""
    r = assemble_residuals(params, x, exogenous)
    labels = equation_labels(params, len(exogenous.caps))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["equation", "residual"])
        for lab, v in zip(labels, r):
            w.writerow([lab, repr(float(v))])


# --------------------------------------------------------------------------
# Solved period
# --------------------------------------------------------------------------

@dataclass
class PeriodEquilibrium:
    """A solved period with derived aggregates."""

    params: ModelParameters
    state: State
    residual_norm: float
    walras: float
    iterations: int
    jacobian: object = None  # factorisation reused for warm starts

    @property
    def unknowns(self) -> PeriodUnknowns:
        return self.state.u

    @property
    def exogenous(self) -> PeriodInputs:
        return self.state.exo

    @property
    def year(self) -> int:
        return self.state.exo.year

    # aggregates -------------------------------------------------------
    def real_gdp(self) -> float:
        """GDP at market prices valued at base-year prices."""
        s = self.state
        absorption = s.qh.sum() + s.exo.qg.sum() + s.qinv.sum()
        return float(absorption + s.qe.sum() - s.qm.sum())

    def nominal_gdp(self) -> float:
        s = self.state
        return float(s.pq @ (s.qh.sum(axis=1) + s.exo.qg + s.qinv) + (s.pe * s.qe).sum() - (s.exo.pwm * s.u.exr) @ s.qm)

    def exports_by_partner(self) -> np.ndarray:
        return self.state.qe.sum(axis=0)

    def imports_by_partner(self) -> np.ndarray:
        return self.params.import_share.T @ self.state.qm

    def value_added(self) -> np.ndarray:
        """Real value added by activity (base-price VA per unit times VA volume)."""
        return self.params.iva * self.state.u.qa

    def nominal_value_added(self) -> np.ndarray:
        s = self.state
        return s.pva * self.params.iva * s.u.qa

    def land_use(self) -> np.ndarray:
        """Employed land by type in model units."""
        return self.state.qf[self.params.land_activity, LAND]

    def real_wage(self) -> float:
        return self.state.u.wl / self.state.cpi

    def real_land_rent(self) -> np.ndarray:
        return self.state.u.wf / self.state.cpi

    def real_exchange_rate(self) -> float:
        return self.state.u.exr / self.state.cpi

    def to_sam(self) -> SocialAccountingMatrix:
        """Rebuild the SAM implied by this equilibrium."""
        return equilibrium_sam(self.params, self.state)


def equilibrium_sam(params: ModelParameters, s: State) -> SocialAccountingMatrix:
    P, u, exo = params, s.u, s.exo
    idx = {a.name: i for i, a in enumerate(P.accounts)}
    n = len(P.accounts)
    F = np.zeros((n, n))
    nm = P.names
    rows = [nm["row_eu"], nm["row_rest"]]
    ia = [idx[a] for a in P.activities]
    ic = [idx[c] for c in P.commodities]
    ih = [idx[h] for h in P.households]
    il = [idx[f] for f in P.lands]
    gov, si = idx[nm["gov"]], idx[nm["s_i"]]
    t_act, t_com, t_imp, t_dir = (idx[nm[k]] for k in ("tax_act", "tax_com", "tax_imp", "tax_dir"))
    lab, cap = idx[nm["labor"]], idx[nm["capital"]]

    F[np.ix_(ic, ia)] = s.pq[:, None] * s.qint
    F[lab, ia] = u.wl * s.qf[:, LAB]
    F[cap, ia] = u.wk * s.qf[:, CAP]
    for l, a in enumerate(P.land_activity):
        F[il[l], ia[a]] = u.wf[l] * s.qf[a, LAND]
    F[t_act, ia] = s.tax_act
    F[ia, ic] = s.px * u.qa
    mval = exo.pwm * u.exr * s.qm
    for p, r in enumerate(rows):
        F[idx[r], ic] = mval * P.import_share[:, p]
        F[ic, idx[r]] = s.pe[:, p] * s.qe[:, p]
    F[t_imp, ic] = s.tax_imp
    F[t_com, ic] = s.tax_com
    F[np.ix_(ic, ih)] = s.pq[:, None] * s.qh
    F[ic, gov] = s.pq * exo.qg
    F[ic, si] = s.pq * s.qinv
    F[ih, lab] = P.shif_lab * s.yfl
    F[ih, cap] = P.shif_cap * s.yfk.sum()
    F[np.ix_(ih, il)] = P.shif_land * s.yfland[None, :]
    F[ih, gov] = exo.trg * s.cpi
    for p, r in enumerate(rows):
        F[ih, idx[r]] = exo.rem[:, p] * u.exr
        F[gov, idx[r]] = exo.trrowg[p] * u.exr
    F[t_dir, ih] = s.taxd
    F[si, ih] = s.savh
    F[gov, t_act] = s.tax_act.sum()
    F[gov, t_com] = s.tax_com.sum()
    F[gov, t_imp] = s.tax_imp.sum()
    F[gov, t_dir] = s.taxd.sum()
    F[si, gov] = max(s.gsav, 0.0)
    if s.gsav < 0:
        F[gov, si] = -s.gsav
    # foreign savings per partner close each partner account
    for r in rows:
        j = idx[r]
        gap = F[j].sum() - F[:, j].sum()
        if gap >= 0:
            F[si, j] = gap
        else:
            F[j, si] = -gap
    return SocialAccountingMatrix(P.accounts, F, P.base_year)


def analytic_columns(params: ModelParameters, u: PeriodUnknowns, exo: PeriodInputs) -> dict[int, np.ndarray]:
    """Exact Jacobian columns (raw residuals, log unknowns) for unemployment rates.

    Unemployment enters only its own market and wage-curve equations, so
    these columns are sparse and cheap.
    """
    layout = Layout(params.na, params.nc, params.nl, len(exo.caps))
    eq = _equation_offsets(params)
    cols = {}
    col = np.zeros(layout.n)
    col[eq["labor_market"]] = u.url * exo.qls
    col[eq["labor_wage_curve"]] = -params.eps_lab * (u.url / params.url0) ** params.eps_lab
    cols[layout.slices["url"].start] = col
    start = layout.slices["urf"].start
    for l in range(params.nl):
        col = np.zeros(layout.n)
        col[eq["land_market"] + l] = u.urf[l] * exo.qfs[l]
        col[eq["land_wage_curve"] + l] = -params.eps_land[l] * (u.urf[l] / params.urf0[l]) ** params.eps_land[l]
        cols[start + l] = col
    return cols


def _equation_offsets(params: ModelParameters) -> dict[str, int]:
    na, nl = params.na, params.nl
    out = {"zero_profit": 0, "capital_market": na, "labor_market": 2 * na, "labor_wage_curve": 2 * na + 1}
    out["land_market"] = 2 * na + 2
    out["land_wage_curve"] = out["land_market"] + nl
    out["domestic_market"] = out["land_wage_curve"] + nl
    out["balance_of_payments"] = out["domestic_market"] + params.nc
    out["numeraire"] = out["balance_of_payments"] + 1
    out["export_cap"] = out["numeraire"] + 1
    return out
