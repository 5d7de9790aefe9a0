import dataclasses
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from deforcge import data
from deforcge.cge import system as S
from deforcge.cge.params import EU
from deforcge.errors import MissingElasticity, NotConverged, TargetInfeasible, UnbalancedSAM
from deforcge.simulate import Projections, simulate
from deforcge.solver.calibration import Elasticities, calibrate, load_elasticities, load_factor_data
from deforcge.solver.newton import JacobianMode, SolverConfig, _Problem, solve_period
from deforcge.solver.targets import (
    CalibrationTargets,
    average_deforestation_rate,
    calibrate_land_elasticity,
    calibrate_tfp_path,
)


def _factors():
    return load_factor_data(data.path("factors.yaml"))


def _elasticities():
    return load_elasticities(data.path("elasticities.csv"), data.path("va_elasticities.csv"))


class TestCalibrate:
    def test_replicates_every_sam_flow(self, params, bundled_sam):
        t0 = time.perf_counter()
        eq = solve_period(params, S.base_inputs(params))
        assert time.perf_counter() - t0 < 1.0
        assert eq.residual_norm <= 1e-9
        rebuilt = eq.to_sam()
        assert rebuilt.names == bundled_sam.names
        nz = bundled_sam.flows > 0
        rel = np.abs(rebuilt.flows[nz] - bundled_sam.flows[nz]) / bundled_sam.flows[nz]
        assert rel.max() <= 1e-6
        assert np.all(rebuilt.flows[~nz] == 0)

    def test_sales_tax_rate_is_sam_ratio(self, params, bundled_sam):
        F, ix = bundled_sam.flows, bundled_sam.index
        for i, c in enumerate(params.commodities):
            domestic_use = sum(F[ix(c), ix(a)] for a in params.activities)
            domestic_use += sum(F[ix(c), ix(h)] for h in params.households)
            domestic_use += F[ix(c), ix(params.names["gov"])] + F[ix(c), ix(params.names["s_i"])]
            assert params.tq[i] == pytest.approx(F[ix("tax_com"), ix(c)] / domestic_use, rel=1e-14)

    def test_missing_elasticity(self, bundled_sam):
        e = _elasticities()
        arm = {k: v for k, v in e.armington.items() if k not in ("c_serv", "serv")}
        with pytest.raises(MissingElasticity):
            calibrate(bundled_sam, dataclasses.replace(e, armington=arm), _factors())

    def test_unbalanced(self, bundled_sam):
        flows = bundled_sam.flows.copy()
        flows[0, 1] += 5.0
        with pytest.raises(UnbalancedSAM):
            calibrate(bundled_sam.with_flows(flows), _elasticities(), _factors())

    def test_destination_elasticity_is_twice_top(self, params):
        np.testing.assert_array_equal(params.dest_sigma, 2 * params.cet_sigma)

    def test_elasticity_lookup_falls_back_to_aggregate(self):
        e = Elasticities(armington={"c_crop": 2.0}, cet={})
        assert e.lookup("armington", "c_crop_ncomp") == 2.0


class TestSolvePeriod:
    def test_base_fixed_point(self, params):
        eq = solve_period(params, S.base_inputs(params))
        np.testing.assert_allclose(eq.unknowns.qa, params.base.qx, rtol=1e-12)
        assert eq.unknowns.exr == pytest.approx(1.0, abs=1e-12)

    def test_export_price_cut(self, params):
        exo = S.base_inputs(params)
        ci = params.commodity_index("c_crop_comp")
        pwe = exo.pwe.copy()
        pwe[ci, EU] *= 0.94
        base = solve_period(params, exo)
        eq = solve_period(params, exo.with_(pwe=pwe))
        assert eq.state.qe[ci, EU] < base.state.qe[ci, EU]
        assert eq.unknowns.exr > base.unknowns.exr
        assert eq.real_gdp() <= base.real_gdp()

    def test_labor_supply_matches_miniature(self, params):
        """Directions agree with a one-sector Cobb-Douglas wage-curve economy solved in closed form."""

        def miniature(ls, k=1.0, a=0.4, u0=0.1, eps=-0.1):
            # labour demand w = (1-a)(k/L)^a, wage curve w = (u/u0)^eps, L = (1-u) ls
            def gap(u):
                lab = (1 - u) * ls
                return (1 - a) * (k / lab) ** a - (u / u0) ** eps

            u = brentq(gap, 1e-9, 1 - 1e-9, xtol=1e-15)
            return (u / u0) ** eps, (1 - u) * ls

        w0, l0 = miniature(1.0)
        w1, l1 = miniature(1.01)
        base = solve_period(params, S.base_inputs(params))
        exo = S.base_inputs(params)
        eq = solve_period(params, exo.with_(qls=exo.qls * 1.01))
        employed = lambda e: e.state.qf[:, 0].sum()  # noqa: E731
        assert np.sign(eq.real_wage() - base.real_wage()) == np.sign(w1 - w0) == -1
        assert np.sign(employed(eq) - employed(base)) == np.sign(l1 - l0) == 1

    def test_not_converged(self, params):
        exo = S.base_inputs(params)
        wedge = exo.wedge.copy()
        wedge[:, EU] = 0.3
        with pytest.raises(NotConverged) as info:
            solve_period(params, exo.with_(wedge=wedge), SolverConfig(max_iterations=1))
        assert info.value.context["best_residual"] > SolverConfig().tolerance
        assert info.value.context["trace"]

    def test_jacobian_analytic_columns_match_fd(self, params):
        rng = np.random.default_rng(3)
        exo = S.base_inputs(params)
        prob = _Problem(params, exo)
        z0 = prob.layout.pack(S.base_unknowns(params))
        for _ in range(5):
            z = z0 + rng.normal(scale=0.02, size=z0.size)
            f = prob(z)
            fd = prob.jacobian(z, f, SolverConfig(jacobian_mode=JacobianMode.FINITE_DIFFERENCE, fd_step=1e-7))
            an = prob.jacobian(z, f, SolverConfig(jacobian_mode=JacobianMode.ANALYTIC))
            cols = S.analytic_columns(params, prob.layout.unpack(z), exo)
            assert cols
            for j in cols:
                np.testing.assert_allclose(an[:, j], fd[:, j], rtol=1e-5, atol=1e-7)

    def test_warm_start_needs_fewer_iterations(self, params):
        exo = S.base_inputs(params)
        wedge = exo.wedge.copy()
        wedge[params.commodity_index("c_crop_comp"), EU] = 0.06
        first = solve_period(params, exo.with_(wedge=wedge))
        wedge2 = wedge.copy()
        wedge2[params.commodity_index("c_lvst_comp"), EU] = 0.06
        cold = solve_period(params, exo.with_(wedge=wedge2))
        warm = solve_period(params, exo.with_(wedge=wedge2), warm_start=first)
        assert warm.iterations <= cold.iterations
        np.testing.assert_allclose(warm.unknowns.qa, cold.unknowns.qa, rtol=1e-8)

    def test_result_is_reverified(self, params):
        exo = S.base_inputs(params)
        wedge = exo.wedge.copy()
        wedge[:, EU] = 0.05
        eq = solve_period(params, exo.with_(wedge=wedge))
        fresh = S.assemble_residuals(params, eq.unknowns, exo.with_(wedge=wedge)) / S.residual_scale(params)
        assert np.max(np.abs(fresh)) <= SolverConfig().tolerance

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(tolerance=0)
        with pytest.raises(ValueError):
            SolverConfig(max_iterations=0)
        assert SolverConfig.from_dict({"tolerance": 1e-8}).tolerance == 1e-8


HORIZON = (2019, 2023)


def _growth(result):
    gdp = [r.equilibrium.real_gdp() for r in result.records]
    return {y: gdp[i] / gdp[i - 1] - 1 for i, y in enumerate(result.years) if i > 0}


class TestTFP:
    def test_zero_tfp_growth_target_gives_unit_path(self, params):
        proj = Projections({}, {})
        ref = simulate(params, range(2019, 2024), proj, tfp_path={y: 1.0 for y in range(2019, 2024)})
        path = calibrate_tfp_path(params, CalibrationTargets(_growth(ref)), HORIZON)
        np.testing.assert_allclose(list(path.values()), 1.0, atol=1e-6)

    def test_two_percent_path(self, params):
        targets = CalibrationTargets({y: 0.02 for y in range(2020, 2024)})
        path = calibrate_tfp_path(params, targets, HORIZON)
        levels = [path[y] for y in sorted(path)]
        assert all(b > a for a, b in zip(levels, levels[1:]))
        rerun = simulate(params, range(2019, 2024), targets.projections(), tfp_path=path)
        for year, g in _growth(rerun).items():
            assert g == pytest.approx(0.02, abs=1e-6)

    def test_absurd_target(self, params):
        targets = CalibrationTargets({y: 0.5 for y in range(2020, 2024)})
        with pytest.raises(TargetInfeasible):
            calibrate_tfp_path(params, targets, HORIZON)

    def test_deterministic(self, params):
        targets = CalibrationTargets({y: 0.02 for y in range(2020, 2024)})
        assert calibrate_tfp_path(params, targets, HORIZON) == calibrate_tfp_path(params, targets, HORIZON)


class TestLandElasticity:
    def test_zero_target(self, params):
        targets = CalibrationTargets({y: 0.02 for y in range(2020, 2024)}, deforestation_rate=0.0)
        mu, _ = calibrate_land_elasticity(params, targets, HORIZON)
        assert mu == 0.0

    def test_hits_historical_rate(self, calibrated, inputs):
        assert calibrated.mu > 0
        rerun = simulate(calibrated.params, range(2019, 2031), inputs.projections, tfp_path=calibrated.tfp_path)
        assert average_deforestation_rate(rerun) == pytest.approx(0.008, abs=1e-5)

    def test_reference_value_as_override(self, params):
        np.testing.assert_allclose(params.mu, 0.06 * params.noncompliant_lands())

    def test_target_range(self):
        with pytest.raises(ValueError):
            CalibrationTargets({}, deforestation_rate=0.2)
