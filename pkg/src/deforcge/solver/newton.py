"""Damped Newton solver for the within-period system."""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from ..cge import system as S
from ..cge.params import EU, ModelParameters
from ..errors import DeforcgeError, NotConverged, SingularJacobian

log = logging.getLogger(__name__)


class JacobianMode(str, enum.Enum):
    FINITE_DIFFERENCE = "finite-difference"
    ANALYTIC = "analytic-where-available"


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-9
    max_iterations: int = 200
    damping: float = 1.0
    jacobian_mode: JacobianMode = JacobianMode.ANALYTIC
    fd_step: float = 1e-7
    reuse_jacobian: bool = True

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        object.__setattr__(self, "jacobian_mode", JacobianMode(self.jacobian_mode))

    @classmethod
    def from_dict(cls, d) -> "SolverConfig":
        d = dict(d or {})
        known = {k: d[k] for k in ("tolerance", "max_iterations", "damping", "jacobian_mode", "fd_step",
                                   "reuse_jacobian") if k in d}
        return cls(**known)


@dataclass
class _Factor:
    lu: tuple
    n: int


class _Problem:
    """Scaled residual function in log unknowns."""

    def __init__(self, params: ModelParameters, exo: S.PeriodInputs):
        self.params = params
        self.exo = exo
        ncap = len(exo.caps)
        self.layout = S.Layout(params.na, params.nc, params.nl, ncap)
        # caps are tight quantities, so measure their residuals relative to the target
        cap_scale = np.array([max(target, 1e-12 * params.base.qe[ci, EU], 1e-300) for ci, target in exo.caps])
        self.scale = S.residual_scale(params, ncap, cap_scale)
        self.evaluations = 0

    def state(self, z):
        return S.evaluate(self.params, self.layout.unpack(z), self.exo)

    def __call__(self, z):
        self.evaluations += 1
        try:
            with np.errstate(all="ignore"):
                r = S.residual_vector(self.params, self.state(z)) / self.scale
        except (DeforcgeError, FloatingPointError, ZeroDivisionError):
            return None
        if not np.all(np.isfinite(r)):
            return None
        return r

    def jacobian(self, z, f, config: SolverConfig):
        n = z.size
        J = np.empty((n, n))
        analytic = {}
        if config.jacobian_mode is JacobianMode.ANALYTIC:
            u = self.layout.unpack(z)
            analytic = {j: c / self.scale for j, c in S.analytic_columns(self.params, u, self.exo).items()}
        for j in range(n):
            if j in analytic:
                J[:, j] = analytic[j]
                continue
            h = config.fd_step * max(1.0, abs(z[j]))
            zj = z.copy()
            zj[j] += h
            fj = self(zj)
            if fj is None:
                zj[j] = z[j] - h
                fj = self(zj)
                if fj is None:
                    raise SingularJacobian(f"residual undefined around unknown {j}", unknown=j)
                J[:, j] = (f - fj) / h
            else:
                J[:, j] = (fj - f) / h
        return J

    def factor(self, J):
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            try:
                lu = lu_factor(J, check_finite=True)
            except (LinAlgWarning, ValueError):
                lu = None
        if lu is not None:
            d = np.abs(np.diag(lu[0]))
            if d.min() > 1e-13 * max(d.max(), 1e-300):
                return _Factor(lu, J.shape[0])
        self._raise_singular(J)

    def _raise_singular(self, J):
        u, s, _ = np.linalg.svd(J)
        weights = np.abs(u[:, -1])
        labels = S.equation_labels(self.params, len(self.exo.caps))
        worst = [labels[i] for i in np.argsort(-weights)[:5] if weights[i] > 1e-3]
        raise SingularJacobian(
            f"Jacobian is singular (smallest singular value {s[-1]:.3g}); involved equations: {', '.join(worst)}",
            equations=";".join(worst), sigma_min=float(s[-1]),
        )


def _norm(f):
    return float(np.max(np.abs(f))) if f is not None else np.inf


def solve_period(
    params: ModelParameters,
    exogenous: S.PeriodInputs,
    config: SolverConfig | None = None,
    warm_start=None,
) -> S.PeriodEquilibrium:
    """Solve one period's square system.

    Args:
        params: calibrated parameters.
        exogenous: period inputs.
        config: solver settings.
        warm_start: a :class:`PeriodEquilibrium` (its Jacobian factor is
            reused) or :class:`PeriodUnknowns`; defaults to the base point.

    Raises:
        NotConverged: with the best residual and the iteration trace.
        SingularJacobian: with the equations spanning the null direction.
    """
    config = config or SolverConfig()
    prob = _Problem(params, exogenous)
    ncap = len(exogenous.caps)
    factor = None
    if isinstance(warm_start, S.PeriodEquilibrium):
        factor = warm_start.jacobian
        warm_start = warm_start.unknowns
    if warm_start is None:
        u0 = S.base_unknowns(params, ncap)
    else:
        u0 = warm_start
        v = np.atleast_1d(u0.vcap)
        if v.size != ncap:
            u0 = S.PeriodUnknowns(u0.pd, u0.qa, u0.wk, u0.wl, u0.url, u0.wf, u0.urf, u0.exr, u0.iadj,
                                  np.ones(ncap))
    z = prob.layout.pack(u0)
    if factor is not None and (factor.n != z.size or not config.reuse_jacobian):
        factor = None

    f = prob(z)
    if f is None:
        z = prob.layout.pack(S.base_unknowns(params, ncap))
        f = prob(z)
        if f is None:
            raise NotConverged("residual undefined at the starting point", best_residual=float("inf"))
    norm = _norm(f)
    trace = [(0, norm, 0.0)]
    fresh = False
    it = 0
    while norm > config.tolerance:
        if it >= config.max_iterations:
            raise NotConverged(
                f"no convergence in {config.max_iterations} iterations (best residual {norm:.3e})",
                best_residual=norm, trace=trace, year=exogenous.year,
            )
        it += 1
        if factor is None:
            factor = prob.factor(prob.jacobian(z, f, config))
            fresh = True
        dz = -lu_solve(factor.lu, f)
        t = config.damping
        accepted = False
        while t >= 1e-6:
            fn = prob(z + t * dz)
            nn = _norm(fn)
            # a stale Jacobian must still deliver real contraction
            need = norm * (1 - 1e-4 * t) if fresh else 0.5 * norm
            if nn < need:
                accepted = True
                break
            if not fresh:
                break
            t *= 0.5
        if not accepted:
            if fresh:
                raise NotConverged(
                    f"line search failed at iteration {it} (residual {norm:.3e})",
                    best_residual=norm, trace=trace, year=exogenous.year,
                )
            factor = None
            continue
        z = z + t * dz
        f, norm = fn, nn
        trace.append((it, norm, t))
        log.debug("year %s iter %d residual %.3e step %.3g", exogenous.year, it, norm, t)
        if not config.reuse_jacobian:
            factor = None
        fresh = False

    # one extra chord step tightens the redundant savings-investment balance
    if factor is not None and norm > 0:
        dz = -lu_solve(factor.lu, f)
        fn = prob(z + dz)
        if _norm(fn) < norm:
            z, f, norm = z + dz, fn, _norm(fn)

    # independent verification with a fresh evaluation
    state = prob.state(z)
    check = np.max(np.abs(S.residual_vector(params, state) / prob.scale))
    if not check <= config.tolerance:
        raise NotConverged("verification of the solution failed", best_residual=float(check), trace=trace)
    walras = S.walras_residual(params, state)
    if abs(walras) > 1e-8:
        log.warning("year %s: Walras residual %.3e exceeds 1e-8", exogenous.year, walras)
    log.debug("year %s solved in %d iterations (%d evaluations)", exogenous.year, it, prob.evaluations)
    return S.PeriodEquilibrium(params, state, float(check), float(walras), it, factor)
