"""Construction of the deforestation-regulation export shock."""

from __future__ import annotations

import logging
import warnings
from typing import Sequence

import numpy as np

from ..cge import system as S
from ..cge.params import EU, ModelParameters
from ..errors import CapUnreachable, NotDisaggregated
from ..sam import COMPLIANT_SUFFIX, NONCOMPLIANT_SUFFIX
from ..solver.newton import SolverConfig, solve_period
from .spec import PriceWedge

log = logging.getLogger(__name__)

MAX_WEDGE = 1.0 - 1e-6


class CapPinnedWarning(UserWarning):
    """A cap could not be met and its wedge was pinned at the maximum."""


def _variants(params: ModelParameters, name: str) -> tuple[str, str]:
    base = name
    for suffix in (COMPLIANT_SUFFIX, NONCOMPLIANT_SUFFIX):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    if not base.startswith("c_"):
        base = "c_" + base
    comp, ncomp = base + COMPLIANT_SUFFIX, base + NONCOMPLIANT_SUFFIX
    if comp not in params.commodities or ncomp not in params.commodities:
        raise NotDisaggregated(f"{base} is not split into compliant and non-compliant variants", commodity=base)
    return comp, ncomp


def build_eudr_shock(
    params: ModelParameters,
    covered: Sequence[str],
    compliant_wedge: float = 0.06,
    noncompliant_cap: float = 0.01,
    config: SolverConfig | None = None,
    xtol: float = 1e-9,
    pin_unreachable: bool = False,
) -> list[PriceWedge]:
    """Export wedges for the covered products.

    Compliant variants lose ``compliant_wedge`` of the EU price. Each
    non-compliant variant gets the wedge that brings its EU exports down to
    ``noncompliant_cap`` of the unshocked base-year level, found by
    bisection over base-year solves with every other wedge in place.

    Args:
        covered: products to cover, by aggregate name (``crop``, ``c_crop``)
            or by either variant.
        pin_unreachable: pin an unreachable cap at the maximum wedge with a
            warning instead of raising.

    Raises:
        NotDisaggregated: a covered product lacks one of its variants.
        CapUnreachable: even a wedge of 1 - 1e-6 leaves exports above the cap.
    """
    if not 0 <= compliant_wedge < 1:
        raise ValueError("compliant wedge must lie in [0, 1)")
    if not 0 < noncompliant_cap <= 1:
        raise ValueError("cap must lie in (0, 1]")
    config = config or SolverConfig()
    pairs = []
    for name in covered:
        pair = _variants(params, name)
        if pair not in pairs:
            pairs.append(pair)
    if not pairs:
        return []

    exo = S.base_inputs(params)
    ref = solve_period(params, exo, config)
    wedge = np.zeros((params.nc, 2))
    for comp, _ in pairs:
        wedge[params.commodity_index(comp), EU] = compliant_wedge
    ncomp_idx = [params.commodity_index(n) for _, n in pairs]
    target = {ci: noncompliant_cap * ref.state.qe[ci, EU] for ci in ncomp_idx}
    warm = [ref]

    def eu_exports(ci, w):
        trial = wedge.copy()
        trial[ci, EU] = w
        eq = solve_period(params, exo.with_(wedge=trial), config, warm[0])
        warm[0] = eq
        return eq.state.qe

    # Gauss-Seidel sweeps: each cap is bisected with the others held fixed
    for sweep in range(4):
        for ci in ncomp_idx:
            qe = eu_exports(ci, MAX_WEDGE)
            if qe[ci, EU] > target[ci]:
                name = params.commodities[ci]
                if not pin_unreachable:
                    raise CapUnreachable(f"{name}: EU exports stay above the cap at the maximum wedge",
                                         commodity=name, exports=float(qe[ci, EU]), cap=float(target[ci]))
                warnings.warn(f"{name}: cap unreachable, wedge pinned at {MAX_WEDGE}", CapPinnedWarning)
                wedge[ci, EU] = MAX_WEDGE
                continue
            lo, hi = 0.0, MAX_WEDGE
            if eu_exports(ci, lo)[ci, EU] <= target[ci]:
                hi = lo
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                if eu_exports(ci, mid)[ci, EU] <= target[ci]:
                    hi = mid
                else:
                    lo = mid
            wedge[ci, EU] = hi
        final = solve_period(params, exo.with_(wedge=wedge), config, warm[0]).state.qe
        if all(final[ci, EU] <= target[ci] for ci in ncomp_idx):
            break
        log.debug("cap sweep %d left some exports above the cap; sweeping again", sweep)

    out = []
    for (comp, ncomp), ci in zip(pairs, ncomp_idx):
        out.append(PriceWedge.fixed(comp, compliant_wedge))
        out.append(PriceWedge.cap(ncomp, noncompliant_cap, wedge=float(wedge[ci, EU])))
    return out
