import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from deforcge.cge import system as S
from deforcge.cge.nests import (
    Nest,
    agg_price,
    armington_compose,
    calibrate_nest,
    ces_value_added,
    cet_two_level,
    household_block,
    leontief_intermediates,
    nest_quantities,
    wage_curve,
)
from deforcge.cge.params import CAP, EU, LAB, LAND
from deforcge.errors import DimensionMismatch, DomainError, NegativeDisposableIncome, NonPositivePrice
from deforcge.solver.newton import solve_period


def _branch_optimum(p, delta, scale, s):
    """Independent oracle: optimise p.x over a two-branch CES/CET frontier at level 1.

    Minimises cost for s > 0 and maximises revenue for s < 0. The frontier
    is parametrised by the branch ratio r = x1/x2, and the primal first-order
    condition d(p.x)/dx1 = 0 along it is root-found in log r.
    """
    rho = (s - 1.0) / s
    target = (1.0 / scale) ** rho

    def point(z):
        r = np.exp(z)
        x2 = (target / (delta[0] * r ** rho + delta[1])) ** (1.0 / rho)
        return np.array([r * x2, x2])

    def slope(z):
        return p[0] - p[1] * (delta[0] / delta[1]) * np.exp(z * (rho - 1.0))

    bound = 50.0 / abs(rho - 1.0)
    z = brentq(slope, -bound, bound, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    x = point(z)
    return x, float(p @ x)


class TestValueAdded:
    def test_symmetry(self):
        nest = Nest.ces([0.5, 0.5], 1.0, 1.5)
        x, _ = ces_value_added(np.array([1.0, 1.0]), nest, 10.0)
        assert x[0] == pytest.approx(x[1], rel=1e-14)

    def test_price_homogeneity(self):
        nest = Nest.ces([0.3, 0.5, 0.2], 1.7, 0.8)
        p = np.array([1.0, 1.3, 0.7])
        x1, c1 = ces_value_added(p, nest, 5.0)
        x2, c2 = ces_value_added(2 * p, nest, 5.0)
        np.testing.assert_allclose(x2, x1, rtol=1e-13)
        assert c2 == pytest.approx(2 * c1, rel=1e-13)

    def test_cost_minimisation_oracle(self):
        nest = Nest.ces([0.6, 0.4], 1.0, 0.8)
        p = np.array([1.0, 2.0])
        x, c = ces_value_added(p, nest, 1.0)
        x_star, cost = _branch_optimum(p, nest.delta, nest.scale, 0.8)
        assert x[0] / x[1] == pytest.approx(x_star[0] / x_star[1], rel=1e-6)
        assert c == pytest.approx(cost, rel=1e-9)

    def test_cobb_douglas_limit(self):
        p = np.array([1.0, 2.0])
        cd = Nest.ces([0.6, 0.4], 1.0, 1.0)
        near = Nest.ces([0.6, 0.4], 1.0, 1.0 + 1e-7)
        x_cd, c_cd = ces_value_added(p, cd, 1.0)
        x_near, c_near = ces_value_added(p, near, 1.0)
        np.testing.assert_allclose(x_cd, x_near, rtol=1e-5)
        assert c_cd == pytest.approx(c_near, rel=1e-5)
        # Cobb-Douglas expenditure shares equal the share parameters
        np.testing.assert_allclose(p * x_cd / c_cd, [0.6, 0.4], rtol=1e-12)

    def test_non_positive_price(self):
        with pytest.raises(NonPositivePrice):
            ces_value_added(np.array([1.0, 0.0]), Nest.ces([0.5, 0.5], 1.0, 1.5), 1.0)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.05, 0.95),
    st.floats(0.2, 4.0).filter(lambda s: abs(s - 1) > 0.05),
    st.floats(0.3, 3.0),
    st.floats(0.3, 3.0),
    st.booleans(),
)
def test_nest_duality(d0, sigma, p0, p1, transformation):
    """Unit cost/revenue and branch quantities agree with a numeric optimiser."""
    delta = np.array([d0, 1 - d0])
    p = np.array([p0, p1])
    s = -sigma if transformation else sigma
    price = float(agg_price(p, delta, 1.0, s))
    x = nest_quantities(1.0, price, p, delta, 1.0, s)
    x_star, value = _branch_optimum(p, delta, 1.0, s)
    assert price == pytest.approx(value, rel=1e-8)
    np.testing.assert_allclose(x, x_star, rtol=1e-6)


class TestLeontief:
    def test_zero(self):
        q, va = leontief_intermediates(0.0, [0.2, 0.3], 0.5)
        assert np.all(q == 0) and va == 0

    def test_example(self):
        q, va = leontief_intermediates(10.0, [0.2, 0.3], 0.5)
        np.testing.assert_allclose(q, [2.0, 3.0])
        assert va == pytest.approx(5.0)

    def test_linearity(self):
        q1, _ = leontief_intermediates(3.0, [0.2, 0.3], 0.5)
        q2, _ = leontief_intermediates(6.0, [0.2, 0.3], 0.5)
        np.testing.assert_allclose(q2, 2 * q1)


def _trade_nests(sigma_t=1.5, qd=100.0, qe=(50.0, 50.0)):
    bottom = calibrate_nest(np.ones(2), np.array(qe), -2 * sigma_t)
    top = calibrate_nest(np.ones(2), np.array([qd, sum(qe)]), -sigma_t)
    return top, bottom


class TestCET:
    def test_eu_price_cut(self):
        top, bottom = _trade_nests()
        _, qe0, _ = cet_two_level(200.0, 1.0, [1.0, 1.0], top, bottom)
        _, qe1, _ = cet_two_level(200.0, 1.0, [0.94, 1.0], top, bottom)
        ratio = (qe1[EU] / qe1[1]) / (qe0[EU] / qe0[1])
        assert ratio == pytest.approx(0.94 ** 3.0, rel=1e-12)
        assert ratio == pytest.approx(0.8306, abs=5e-5)

    def test_base_point(self):
        top, bottom = _trade_nests()
        qd, qe, px = cet_two_level(200.0, 1.0, [1.0, 1.0], top, bottom)
        assert qd == pytest.approx(100.0, rel=1e-12)
        np.testing.assert_allclose(qe, [50.0, 50.0], rtol=1e-12)
        assert px == pytest.approx(1.0, rel=1e-12)

    def test_zero_output(self):
        top, bottom = _trade_nests()
        qd, qe, _ = cet_two_level(0.0, 1.0, [1.0, 1.2], top, bottom)
        assert qd == 0 and np.all(qe == 0)

    def test_adding_up(self):
        top, bottom = _trade_nests()
        qd, qe, px = cet_two_level(200.0, 1.1, [0.9, 1.3], top, bottom)
        # revenue exhaustion: px * output = pd * qd + pe * qe
        assert px * 200.0 == pytest.approx(1.1 * qd + 0.9 * qe[0] + 1.3 * qe[1], rel=1e-12)


class TestArmington:
    def test_services_import_price(self):
        nest = calibrate_nest(np.ones(2), np.array([80.0, 20.0]), 0.9)
        d0, m0, _ = armington_compose(1.0, 1.0, nest, 100.0)
        d1, m1, _ = armington_compose(1.0, 1.1, nest, 100.0)
        ratio = (m1 / d1) / (m0 / d0)
        assert ratio == pytest.approx(1.1 ** -0.9, rel=1e-12)
        assert ratio == pytest.approx(0.9178, abs=5e-5)

    def test_base_split(self):
        nest = calibrate_nest(np.ones(2), np.array([80.0, 20.0]), 0.9)
        d, m, pq = armington_compose(1.0, 1.0, nest, 100.0)
        assert (d, m, pq) == pytest.approx((80.0, 20.0, 1.0), rel=1e-12)

    def test_near_perfect_substitutes(self):
        nest = calibrate_nest(np.ones(2), np.array([50.0, 50.0]), 50.0)
        d, m, _ = armington_compose(1.0, 1.01, nest, 100.0)
        # oracle: import share falls by 1.01**-50 relative to domestic
        assert m / d == pytest.approx(1.01 ** -50, rel=1e-10)
        assert d > 0.6 * 100 and m < 0.4 * 100

    def test_non_positive(self):
        nest = calibrate_nest(np.ones(2), np.array([50.0, 50.0]), 2.0)
        with pytest.raises(NonPositivePrice):
            armington_compose(-1.0, 1.0, nest, 1.0)


class TestWageCurve:
    def test_reference_point(self):
        assert wage_curve(0.1, 1.0, 0.1, -0.1) == 1.0

    def test_labor(self):
        assert wage_curve(0.2, 1.0, 0.1, -0.1) == pytest.approx(2 ** -0.1)
        assert wage_curve(0.2, 1.0, 0.1, -0.1) == pytest.approx(0.9330, abs=5e-5)

    def test_land(self):
        assert wage_curve(0.05, 1.0, 0.1, -0.4) == pytest.approx(0.5 ** -0.4)
        assert wage_curve(0.05, 1.0, 0.1, -0.4) == pytest.approx(1.3195, abs=5e-5)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, u):
        with pytest.raises(DomainError):
            wage_curve(u, 1.0, 0.1, -0.1)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.998), st.floats(1e-4, 1e-3), st.floats(-2.0, -0.01))
def test_wage_curve_decreasing(u, du, eps):
    assert wage_curve(u + du, 1.0, 0.1, eps) < wage_curve(u, 1.0, 0.1, eps)


class TestHousehold:
    def test_single_good(self):
        q, sav, tax = household_block(10.0, [1.0], [2.0])
        assert q[0] == 5.0 and sav == 0 and tax == 0

    def test_homogeneity(self):
        q1, _, _ = household_block(10.0, [0.5, 0.5], [1.0, 2.0], 0.1, 0.2)
        q2, _, _ = household_block(20.0, [0.5, 0.5], [2.0, 4.0], 0.1, 0.2)
        np.testing.assert_allclose(q1, q2, rtol=1e-14)

    def test_expenditure_shares(self):
        p = np.array([1.5, 0.7, 3.0])
        q, sav, tax = household_block(100.0, [0.5, 0.3, 0.2], p, 0.1, 0.2, 5.0)
        spend = p * q
        np.testing.assert_allclose(spend / spend.sum(), [0.5, 0.3, 0.2], rtol=1e-14)
        assert spend.sum() == pytest.approx(100.0 - tax - sav - 5.0)

    def test_negative_disposable(self):
        with pytest.raises(NegativeDisposableIncome):
            household_block(10.0, [1.0], [1.0], transfers_out=11.0)


class TestResiduals:
    def test_base_point(self, params):
        r = S.assemble_residuals(params, S.base_unknowns(params), S.base_inputs(params))
        scale = S.residual_scale(params)
        assert np.max(np.abs(r / scale)) <= 1e-9

    def test_price_perturbation_gives_excess_supply(self, params):
        u = S.base_unknowns(params)
        ci = params.commodity_index("c_crop_comp")
        u.pd = u.pd.copy()
        u.pd[ci] *= 1.01
        r = S.assemble_residuals(params, u, S.base_inputs(params))
        labels = S.equation_labels(params)
        assert r[labels.index("domestic_market[c_crop_comp]")] > 0

    def test_foreign_savings_increment(self, params):
        exo = S.base_inputs(params)
        r = S.assemble_residuals(params, S.base_unknowns(params), exo.with_(fsav=exo.fsav + 3.25))
        assert r[S.equation_labels(params).index("balance_of_payments")] == pytest.approx(3.25, rel=1e-9)

    def test_dimension_mismatch(self, params):
        exo = S.base_inputs(params).with_(caps=((0, 1.0),))
        with pytest.raises(DimensionMismatch):
            S.assemble_residuals(params, S.base_unknowns(params), exo)

    def test_dump(self, params, tmp_path):
        S.dump_residuals(params, S.base_unknowns(params), S.base_inputs(params), tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "equation,residual"
        assert len(lines) == 1 + len(S.equation_labels(params))


def _shocked_inputs(params):
    exo = S.base_inputs(params)
    wedge = exo.wedge.copy()
    wedge[params.commodity_index("c_crop_comp"), EU] = 0.06
    return exo.with_(wedge=wedge)


class TestEquilibriumProperties:
    def test_walras(self, params):
        eq = solve_period(params, _shocked_inputs(params))
        assert abs(eq.walras) <= 1e-8

    def test_zero_profit(self, params):
        s = solve_period(params, _shocked_inputs(params)).state
        revenue = s.px * (1 - params.ta) * s.u.qa
        fp = np.zeros_like(s.qf)
        fp[:, LAB] = s.u.wl
        fp[:, CAP] = s.u.wk
        has_land = params.activity_land >= 0
        fp[has_land, LAND] = s.u.wf[params.activity_land[has_land]]
        cost = s.pq @ s.qint + (fp * s.qf).sum(axis=1)
        np.testing.assert_allclose(cost, revenue, rtol=1e-8)

    def test_numeraire_homogeneity(self, params):
        exo = _shocked_inputs(params)
        a = solve_period(params, exo).state
        b = solve_period(params, exo.with_(cpi=2.0)).state
        np.testing.assert_allclose(b.u.qa, a.u.qa, rtol=1e-8)
        for name in ("qe", "qm", "qh", "qf", "qinv"):
            np.testing.assert_allclose(getattr(b, name), getattr(a, name), rtol=1e-8, atol=1e-12)
        assert b.u.exr == pytest.approx(2 * a.u.exr, rel=1e-8)
        assert b.u.url == pytest.approx(a.u.url, rel=1e-8)
