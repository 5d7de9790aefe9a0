"""CES / CET nests, wage curves and the household block.

All nests share one primal form ``Q = A * (sum_i d_i x_i**rho)**(1/rho)``
with ``rho = (s - 1) / s``. A substitution nest (CES, Armington) has
``s = sigma > 0``; a transformation nest (CET) is the same function with
``s = -sigma``. The dual gives

    unit cost / revenue  c = (1/A) * (sum_i d_i**s p_i**(1-s))**(1/(1-s))
    quantity             x_i = Q * A**(s-1) * (d_i * c / p_i)**s

and ``s == 1`` is the Cobb-Douglas limit of the cost function. Entries with
``d_i == 0`` are inactive (zero quantity, price irrelevant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NegativeDisposableIncome, NonPositivePrice

_CD_TOL = 1e-12


@dataclass(frozen=True)
class Nest:
    """Calibrated nest: shares, shift and signed elasticity."""

    delta: np.ndarray
    scale: float
    elasticity: float  # signed: > 0 substitution, < 0 transformation

    @classmethod
    def cet(cls, delta, scale, sigma):
        return cls(np.asarray(delta, float), float(scale), -float(sigma))

    @classmethod
    def ces(cls, delta, scale, sigma):
        return cls(np.asarray(delta, float), float(scale), float(sigma))


def agg_price(p, delta, scale, s):
    """Unit cost (s > 0) or unit revenue (s < 0), vectorised over leading axes.

    ``p`` and ``delta`` have shape (..., k); ``scale`` and ``s`` broadcast
    against the leading shape.
    """
    p = np.asarray(p, dtype=float)
    delta = np.asarray(delta, dtype=float)
    s = np.asarray(s, dtype=float)
    active = delta > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        s_ = s[..., None]
        term = np.where(active, delta ** s_ * p ** (1.0 - s_), 0.0)
        ces = np.sum(term, axis=-1) ** (1.0 / (1.0 - s))
        cd_terms = np.where(active, delta * (np.log(p) - np.log(np.where(active, delta, 1.0))), 0.0)
        cd = np.exp(np.sum(cd_terms, axis=-1))
    value = np.where(np.abs(s - 1.0) < _CD_TOL, cd, ces)
    return value / scale


def nest_quantities(q, c, p, delta, scale, s):
    """Quantities of each branch for composite level ``q`` at unit price ``c``."""
    p = np.asarray(p, dtype=float)
    delta = np.asarray(delta, dtype=float)
    s = np.asarray(s, dtype=float)
    s_ = s[..., None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(delta > 0, (delta * np.asarray(c)[..., None] / p) ** s_, 0.0)
    return np.asarray(q)[..., None] * (np.asarray(scale) ** (s - 1.0))[..., None] * ratio


def nest_level(x, delta, scale, s):
    """Primal aggregate ``A * (sum d x**rho)**(1/rho)`` (used by calibration checks)."""
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    active = delta > 0
    if abs(s - 1.0) < _CD_TOL:
        return scale * float(np.exp(np.sum(np.where(active, delta * np.log(np.where(active, x, 1.0)), 0.0))))
    rho = (s - 1.0) / s
    return scale * float(np.sum(np.where(active, delta * np.where(active, x, 1.0) ** rho, 0.0)) ** (1.0 / rho))


def calibrate_nest(p0, x0, s, q0=None) -> Nest:
    """Shares and shift reproducing base prices/quantities as an optimum.

    ``q0`` defaults to the value of the branches at base prices, which makes
    the composite price equal to one.
    """
    p0 = np.asarray(p0, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    active = x0 > 0
    if not active.any():
        raise ValueError("cannot calibrate a nest with no active branch")
    raw = np.zeros_like(x0)
    if abs(s - 1.0) < _CD_TOL:
        raw[active] = p0[active] * x0[active]
    else:
        raw[active] = p0[active] * x0[active] ** (1.0 / s)
    delta = raw / raw.sum()
    if q0 is None:
        q0 = float(np.dot(p0, x0))
    level_at_unit_scale = nest_level(x0, delta, 1.0, s)
    return Nest(delta, q0 / level_at_unit_scale, float(s))


def _check_prices(*arrays):
    for a in arrays:
        if np.any(np.asarray(a) <= 0) or not np.all(np.isfinite(a)):
            raise NonPositivePrice("prices must be finite and strictly positive")


# --------------------------------------------------------------------------
# Named operations
# --------------------------------------------------------------------------

def ces_value_added(factor_prices, nest: Nest, target_level: float, tfp: float = 1.0):
    """Cost-minimising factor demands for ``target_level`` units of value added.

    Returns (demands, unit_cost). Cost is linear homogeneous in prices.
    """
    _check_prices(np.asarray(factor_prices)[nest.delta > 0])
    scale = nest.scale * tfp
    c = agg_price(factor_prices, nest.delta, scale, nest.elasticity)
    x = nest_quantities(target_level, c, factor_prices, nest.delta, scale, nest.elasticity)
    return x, float(c)


def leontief_intermediates(level: float, ica, iva: float):
    """Fixed-coefficient intermediate demands and the value-added requirement."""
    ica = np.asarray(ica, dtype=float)
    return ica * level, iva * level


def cet_two_level(output: float, domestic_price: float, export_prices, top: Nest, bottom: Nest):
    """Allocate output between the domestic market and export destinations.

    The top nest splits output into domestic sales and an export aggregate;
    the bottom nest splits the aggregate over destinations. Returns
    (domestic supply, exports by destination, output price).
    """
    export_prices = np.asarray(export_prices, dtype=float)
    _check_prices([domestic_price], export_prices[bottom.delta > 0])
    pe_agg = agg_price(export_prices, bottom.delta, bottom.scale, bottom.elasticity)
    p_top = np.array([domestic_price, pe_agg])
    px = agg_price(p_top, top.delta, top.scale, top.elasticity)
    qd, qe_agg = nest_quantities(output, px, p_top, top.delta, top.scale, top.elasticity)
    qe = nest_quantities(qe_agg, pe_agg, export_prices, bottom.delta, bottom.scale, bottom.elasticity)
    return float(qd), qe, float(px)


def armington_compose(domestic_price: float, import_price: float, nest: Nest, demand: float):
    """Split composite demand into domestic and imported varieties.

    Returns (domestic demand, import demand, composite price), where the
    composite price is the CES unit cost (net of sales tax).
    """
    _check_prices([domestic_price, import_price])
    p = np.array([domestic_price, import_price])
    pq = agg_price(p, nest.delta, nest.scale, nest.elasticity)
    qd, qm = nest_quantities(demand, pq, p, nest.delta, nest.scale, nest.elasticity)
    return float(qd), float(qm), float(pq)


def wage_curve(unemployment_rate, ref_wage, ref_rate, elasticity):
    """Real factor price implied by an unemployment rate: w0 * (u/u0)**e."""
    u = np.asarray(unemployment_rate, dtype=float)
    if np.any(u <= 0) or np.any(u >= 1):
        raise DomainError(f"unemployment rate must lie in (0, 1), got {unemployment_rate}")
    if np.any(np.asarray(ref_rate) <= 0) or np.any(np.asarray(ref_rate) >= 1):
        raise DomainError("reference unemployment must lie in (0, 1)")
    out = ref_wage * (u / ref_rate) ** elasticity
    return float(out) if np.ndim(out) == 0 else out


def household_block(income, budget_shares, prices, tax_rate=0.0, savings_rate=0.0, transfers_out=0.0):
    """Cobb-Douglas consumption for one household group.

    Returns (demand vector, savings, direct tax). Savings are a fixed share
    of income after direct taxes.
    """
    prices = np.asarray(prices, dtype=float)
    shares = np.asarray(budget_shares, dtype=float)
    if income < 0:
        raise NegativeDisposableIncome(f"negative household income {income}")
    if abs(shares.sum() - 1.0) > 1e-9:
        raise ValueError("budget shares must sum to one")
    _check_prices(prices[shares > 0])
    tax = tax_rate * income
    savings = savings_rate * (income - tax)
    disposable = income - tax - savings - transfers_out
    if disposable < 0:
        raise NegativeDisposableIncome(f"disposable income {disposable} < 0")
    return shares * disposable / prices, savings, tax
