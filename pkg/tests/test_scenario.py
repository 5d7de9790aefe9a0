import dataclasses

import numpy as np
import pytest
import yaml

from deforcge import data
from deforcge.cge.params import EU
from deforcge.errors import MismatchedTrajectories, NotDisaggregated, ScenarioFileError, WindowOutOfRange
from deforcge.sam import Kind, Partner
from deforcge.scenario import (
    Mode,
    PriceWedge,
    ScenarioSpec,
    WedgeMode,
    build_eudr_shock,
    coverage_summary,
    deviation_report,
    load_scenario,
    load_trajectory,
    run_trajectory,
    save_trajectory,
    scenario_from_dict,
    sensitivity_suite,
    sign_checks,
)
from deforcge.scenario.spec import scenario_to_dict

from conftest import COVERED

SHOCK_START = 2025


class TestScenarioFile:
    def test_bundled_eudr(self, eudr_spec):
        assert eudr_spec.mode is Mode.COUNTERFACTUAL
        assert eudr_spec.horizon == (2019, 2030)
        assert eudr_spec.shock_start == SHOCK_START
        fixed = [w for w in eudr_spec.shocks if w.mode is WedgeMode.FIXED]
        caps = [w for w in eudr_spec.shocks if w.mode is WedgeMode.SOLVE_FOR_CAP]
        assert len(fixed) == len(caps) == len(COVERED)
        assert all(w.wedge == 0.06 and w.destination is Partner.EU for w in fixed)
        assert all(w.target_share == 0.01 for w in caps)

    def test_round_trip(self, eudr_spec, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(yaml.safe_dump(scenario_to_dict(eudr_spec)))
        assert load_scenario(path) == eudr_spec

    @pytest.mark.parametrize("tree", [
        {"shocks": [{"commodity": "c_crop_comp", "wedge": 1.0}]},
        {"shocks": [{"commodity": "c_crop_comp", "cap": 0.0}]},
        {"shocks": [{"commodity": "c_crop_comp", "wedge": 0.1, "cap": 0.1}]},
        {"shocks": [{"commodity": "c_crop_comp", "destination": "Rest", "cap": 0.1}]},
        {"horizon": {"start": 2030, "end": 2019}},
        {"overrides": {"cet": 0.0}},
        {"overrides": {"nonsense": 1.0}},
        {"report_window": {"start": 2010, "end": 2012}},
        {"surprise": 1},
        [1, 2, 3],
    ])
    def test_invalid(self, tree):
        with pytest.raises(ScenarioFileError):
            scenario_from_dict(tree)

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text("shocks: [unclosed")
        with pytest.raises(ScenarioFileError):
            load_scenario(path)
        with pytest.raises(ScenarioFileError):
            load_scenario(tmp_path / "missing.yaml")

    def test_type_invariants(self):
        with pytest.raises(ValueError):
            PriceWedge.fixed("c", -0.1)
        with pytest.raises(ValueError):
            PriceWedge.cap("c", 1.5)
        with pytest.raises(ValueError):
            ScenarioSpec("x", horizon=(2020, 2020))

    def test_baseline_twin_drops_shocks(self, eudr_spec):
        twin = eudr_spec.baseline()
        assert twin.mode is Mode.BASELINE and twin.shocks == ()
        assert twin.horizon == eudr_spec.horizon
        assert load_scenario(data.path("baseline.yaml")).shocks == ()


class TestBuildShock:
    def test_empty_covered_list(self, calibrated):
        assert build_eudr_shock(calibrated.params, []) == []

    def test_wedges(self, shocked_spec):
        fixed = {w.commodity: w.wedge for w in shocked_spec.shocks if w.mode is WedgeMode.FIXED}
        assert fixed == {f"c_{c}_comp": 0.06 for c in COVERED}
        caps = [w for w in shocked_spec.shocks if w.mode is WedgeMode.SOLVE_FOR_CAP]
        assert {w.commodity for w in caps} == {f"c_{c}_ncomp" for c in COVERED}
        assert all(w.target_share == 0.01 and 0 < w.wedge < 1 for w in caps)

    def test_reference_wedges_meet_cap(self, calibrated, shocked_spec):
        """Base-year bisection oracle: the solved wedges leave at most 1% of EU exports."""
        from deforcge.cge import system as S
        from deforcge.solver.newton import solve_period

        P = calibrated.params
        exo = S.base_inputs(P)
        ref = solve_period(P, exo)
        wedge = exo.wedge.copy()
        for w in shocked_spec.shocks:
            wedge[P.commodity_index(w.commodity), EU] = w.wedge
        eq = solve_period(P, exo.with_(wedge=wedge), warm_start=ref)
        for w in shocked_spec.shocks:
            if w.mode is WedgeMode.SOLVE_FOR_CAP:
                ci = P.commodity_index(w.commodity)
                assert eq.state.qe[ci, EU] <= 0.01 * ref.state.qe[ci, EU] * (1 + 1e-6)

    def test_not_disaggregated(self, calibrated):
        with pytest.raises(NotDisaggregated):
            build_eudr_shock(calibrated.params, ["serv"])


class TestTrajectories:
    def test_caps_hold_every_shocked_year(self, central):
        base, scen = central
        for y in base.years:
            if y < SHOCK_START:
                continue
            b, s = base.snapshot(y).commodity["exports_eu"], scen.snapshot(y).commodity["exports_eu"]
            for c in COVERED:
                ci = base.commodities.index(f"c_{c}_ncomp")
                assert s[ci] <= 0.01 * b[ci]

    def test_compliant_wedge_exact(self, central):
        _, scen = central
        for y in scen.years:
            w = scen.snapshot(y).commodity["wedge_eu"]
            for c in COVERED:
                expected = 0.06 if y >= SHOCK_START else 0.0
                assert w[scen.commodities.index(f"c_{c}_comp")] == expected

    def test_pre_shock_years_match_baseline(self, central):
        base, scen = central
        for y in range(base.years[0], SHOCK_START):
            assert base.snapshot(y).macro == scen.snapshot(y).macro

    def test_null_shock_equivalence(self, central, calibrated, inputs, eudr_spec):
        base, _ = central
        null = dataclasses.replace(eudr_spec, name="null", mode=Mode.COUNTERFACTUAL, shocks=())
        traj = run_trajectory(null, calibrated.params, inputs.projections, inputs.coefficients, baseline=base)
        for key in ("gdp", "exports", "deforestation", "ghg", "real_exchange_rate"):
            np.testing.assert_allclose(traj.macro(key), base.macro(key), rtol=1e-9)

    def test_forest_non_increasing(self, central):
        for traj in central:
            assert np.all(np.diff(traj.macro("forest")) <= 0)

    def test_cumulative_deforestation_below_baseline(self, central):
        base, scen = central
        cb = np.cumsum(base.macro("deforestation"))
        cs = np.cumsum(scen.macro("deforestation"))
        assert np.all(cs <= cb * (1 + 1e-12))

    def test_walras_every_period(self, central):
        for traj in central:
            assert np.max(np.abs(traj.macro("walras"))) <= 1e-8

    def test_counterfactual_needs_tfp(self, calibrated, inputs, shocked_spec):
        with pytest.raises(MismatchedTrajectories):
            run_trajectory(shocked_spec, calibrated.params, inputs.projections, inputs.coefficients)

    def test_save_load_round_trip(self, central, tmp_path):
        base, scen = central
        b = load_trajectory(save_trajectory(base, tmp_path / "b"))
        s = load_trajectory(save_trajectory(scen, tmp_path / "s"))
        assert b.years == base.years and s.name == scen.name
        np.testing.assert_array_equal(b.macro("gdp"), base.macro("gdp"))
        np.testing.assert_array_equal(s.series("land", "QDEFOR"), scen.series("land", "QDEFOR"))
        assert deviation_report(b, s).values() == deviation_report(base, scen).values()


def _with_gdp(traj, values):
    snaps = []
    for snap in traj.snapshots:
        macro = dict(snap.macro)
        if snap.year in values:
            macro["gdp"] = values[snap.year]
        snaps.append(dataclasses.replace(snap, macro=macro))
    return dataclasses.replace(traj, snapshots=snaps, records=None)


class TestDeviationReport:
    def test_identity_is_zero(self, central):
        base, _ = central
        report = deviation_report(base, base)
        assert all(v == 0 for v in report.values().values())
        assert all(np.all(col == 0) for col in report.commodity.values())
        assert report.emissions.total_percent == 0

    def test_toy_gdp_average(self, central):
        base, _ = central
        b = _with_gdp(base, {2025: 100.0, 2026: 100.0})
        s = _with_gdp(base, {2025: 99.9, 2026: 99.7})
        assert deviation_report(b, s, (2025, 2026)).value("GDP") == pytest.approx(-0.2, abs=1e-12)

    def test_window_errors(self, central):
        base, scen = central
        with pytest.raises(WindowOutOfRange):
            deviation_report(base, scen, (2024, 2035))
        short = dataclasses.replace(scen, snapshots=scen.snapshots[:-1], records=None)
        with pytest.raises(MismatchedTrajectories):
            deviation_report(base, short)

    def test_rates_in_points(self, central):
        base, scen = central
        report = deviation_report(base, scen)
        units = {row.label: row.unit for row in report.indicators}
        assert units["Unemployment rate"] == units["Deforestation rate"] == "pp"
        assert units["GDP"] == "%"

    def test_sign_suite(self, central):
        checks = sign_checks(deviation_report(*central))
        assert len(checks) == 10
        failed = [c for c in checks if not c.passed]
        assert not failed, failed


class TestCoverage:
    def test_bundled_matches_cells(self, bundled_sam):
        summary = coverage_summary(bundled_sam)
        comp = sum(bundled_sam.cell(a.name, "row_eu") for a in bundled_sam.of_kind(Kind.COMMODITY)
                   if a.name.endswith("_comp"))
        ncomp = sum(bundled_sam.cell(a.name, "row_eu") for a in bundled_sam.of_kind(Kind.COMMODITY)
                    if a.name.endswith("_ncomp"))
        assert summary.compliant_total == pytest.approx(comp, rel=1e-14)
        assert summary.noncompliant_total == pytest.approx(ncomp, rel=1e-14)
        for row in summary.rows:
            assert 0 <= row.eu_share_of_exports <= 100 and 0 <= row.export_share_of_demand <= 100

    def test_no_eu_exports(self, bundled_sam):
        flows = bundled_sam.flows.copy()
        flows[:, bundled_sam.index("row_eu")] = 0.0
        summary = coverage_summary(bundled_sam.with_flows(flows))
        assert all(r.eu_share_of_exports == 0 for r in summary.rows)
        assert summary.noncompliant_ratio == 0

    def test_not_disaggregated(self):
        from deforcge.sam import load_sam

        with pytest.raises(NotDisaggregated):
            coverage_summary(load_sam(data.path("sam_aggregate.csv")))


def test_unit_override_reproduces_central(central, calibrated, inputs, shocked_spec):
    base, scen = central
    result = sensitivity_suite(shocked_spec.baseline(), shocked_spec, calibrated.params, inputs.projections,
                               inputs.coefficients, calibrated.tfp_path, jobs=1,
                               cases={"unit": ("cet", 1.0)}, central=(base, scen))
    assert not result.failures
    got, want = result.reports["unit"].values(), result.central.values()
    for label, value in want.items():
        assert got[label] == pytest.approx(value, rel=1e-9, abs=1e-9), label
