"""Between-period updating of land, capital and labour.

Land is tracked in hectares. Non-compliant land grows with new
deforestation, which responds to the real land rent relative to the base
year; compliant land supply only moves through migration between uses of
its own compliance class. The remaining forest shrinks by the hectares
deforested.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ForestExhausted, NegativeStock, NonPositivePrice
from .sam import Compliance

log = logging.getLogger(__name__)


class ForestExhaustedWarning(UserWarning):
    """Deforestation was capped at the remaining forest stock."""


@dataclass(frozen=True)
class LandAccount:
    """Land state for one period, hectares throughout.

    ``qdefor`` is the deforestation generated in this period, which enters
    the next period's initial supply.
    """

    year: int
    lands: tuple[str, ...]
    use: tuple[str, ...]
    compliance: tuple[Compliance, ...]
    qfs: np.ndarray
    qfinit: np.ndarray
    qdefor: np.ndarray
    wfavg: np.ndarray
    ur: np.ndarray
    cpi: float
    forest: float
    mu: np.ndarray
    qfs00: np.ndarray
    wfavg00: np.ndarray
    cpi00: float = 1.0

    def __post_init__(self):
        for name in ("qfs", "qfinit", "qdefor"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise NegativeStock(f"{name} must be non-negative", field=name)
        if self.forest < 0:
            raise NegativeStock("forest stock must be non-negative")

    @property
    def noncompliant(self) -> np.ndarray:
        return np.array([c is Compliance.NONCOMPLIANT for c in self.compliance])

    @property
    def qdefortot(self) -> float:
        return float(np.sum(self.qdefor))

    @property
    def deforestation_rate(self) -> float:
        """Deforested hectares over the remaining forest, per year."""
        return self.qdefortot / self.forest if self.forest > 0 else 0.0

    def real_rent_index(self) -> np.ndarray:
        """Real rent per hectare relative to the base year."""
        return (self.wfavg / self.cpi) / (self.wfavg00 / self.cpi00)

    def observe(self, wfavg, ur, cpi) -> "LandAccount":
        """Record the period's solved rents, unemployment and CPI."""
        return replace(self, wfavg=np.asarray(wfavg, float), ur=np.asarray(ur, float), cpi=float(cpi))


def deforestation_supply(land: LandAccount, year: int | None = None) -> np.ndarray:
    """New deforestation per land type for the period in ``land``.

    QDEFOR = QFS00 * (((WFAVG/CPI) / (WFAVG00/CPI00))**mu - 1), floored at
    zero and zero for compliant land. ``year`` is accepted for symmetry
    with the trajectory loop and must match the account when given.
    """
    if year is not None and year != land.year:
        raise ValueError(f"land account is for {land.year}, not {year}")
    if np.any(land.wfavg <= 0) or land.cpi <= 0 or np.any(land.wfavg00 <= 0) or land.cpi00 <= 0:
        raise NonPositivePrice("land rents and CPI must be positive")
    if np.any(np.asarray(land.mu) < 0):
        raise ValueError("land supply elasticity must be non-negative")
    raw = land.qfs00 * (land.real_rent_index() ** land.mu - 1.0)
    return np.where(land.noncompliant, np.maximum(raw, 0.0), 0.0)


def record_deforestation(land: LandAccount, qdefor, strict: bool = False) -> LandAccount:
    """Attach this period's deforestation, capped at the remaining forest.

    When the requested hectares exceed the forest they are scaled down pro
    rata with a warning, or :class:`ForestExhausted` is raised if ``strict``.
    """
    qdefor = np.asarray(qdefor, dtype=float)
    total = qdefor.sum()
    if total > land.forest:
        if strict:
            raise ForestExhausted(f"deforestation {total:.6g} ha exceeds remaining forest {land.forest:.6g} ha",
                                  year=land.year)
        warnings.warn(f"{land.year}: deforestation capped at the remaining forest stock", ForestExhaustedWarning)
        qdefor = qdefor * (land.forest / total)
    return replace(land, qdefor=qdefor)


def advance_land(land: LandAccount, strict: bool = False) -> LandAccount:
    """Initial supply and forest for the next period.

    Non-compliant land adds this period's deforestation, compliant land
    carries over, and the forest loses the hectares deforested. The
    returned account has ``qfs == qfinit`` until migration is applied.
    """
    land = record_deforestation(land, land.qdefor, strict)
    qfinit = land.qfs + np.where(land.noncompliant, land.qdefor, 0.0)
    forest = max(land.forest - land.qdefortot, 0.0)
    return replace(
        land,
        year=land.year + 1,
        qfinit=qfinit,
        qfs=qfinit.copy(),
        qdefor=np.zeros_like(land.qdefor),
        forest=forest,
    )


def migrate_land(
    qfinit: Sequence[float],
    returns: Sequence[float],
    mobility: float,
    classes: Sequence | None = None,
) -> np.ndarray:
    """Reallocate hectares towards higher-return uses within each class.

    The gross flow from use i to use j of the same class is
    ``mobility * qfinit[i] * max(0, (r_j - r_i) / r_i)``. If a use would
    send out more than it holds, its outflows are scaled down pro rata.
    Hectares are conserved within every class.
    """
    q = np.asarray(qfinit, dtype=float)
    r = np.asarray(returns, dtype=float)
    if np.any(q < 0):
        raise NegativeStock("initial land supply must be non-negative")
    if np.any(r <= 0):
        raise NonPositivePrice("land returns must be positive")
    if not mobility >= 0:
        raise ValueError("mobility must be non-negative")
    classes = np.zeros(len(q), dtype=int) if classes is None else np.asarray(list(classes), dtype=object)
    same = classes[:, None] == classes[None, :]
    gain = np.maximum(0.0, (r[None, :] - r[:, None]) / r[:, None])
    flow = mobility * q[:, None] * gain * same
    np.fill_diagonal(flow, 0.0)
    out = flow.sum(axis=1)
    over = out > q
    if np.any(over):
        flow[over] *= (q[over] / out[over])[:, None]
    # exact per-class conservation: each flow leaves one use and enters another
    return q - flow.sum(axis=1) + flow.sum(axis=0)


@dataclass(frozen=True)
class CapitalAccount:
    """Sector-specific capital stocks."""

    stock: np.ndarray
    depreciation: float
    shares: np.ndarray

    def __post_init__(self):
        if not 0 <= self.depreciation <= 1:
            raise ValueError("depreciation must lie in [0, 1]")
        if np.any(np.asarray(self.stock) < 0):
            raise NegativeStock("capital stocks must be non-negative")


def advance_capital_labor(
    capital: CapitalAccount,
    equilibrium_or_investment,
    labor_supply: float,
    population_growth: float,
) -> tuple[CapitalAccount, float]:
    """Next-period capital stocks and labour supply.

    ``equilibrium_or_investment`` is a solved period (its real investment
    is used) or a real investment amount.
    """
    inv = equilibrium_or_investment
    if hasattr(inv, "state"):
        inv = float(inv.state.qinv.sum())
    if inv < 0:
        raise ValueError("real investment must be non-negative")
    stock = (1 - capital.depreciation) * capital.stock + capital.shares * inv
    return replace(capital, stock=stock), labor_supply * (1 + population_growth)
