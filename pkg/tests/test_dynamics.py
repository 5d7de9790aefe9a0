import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deforcge.dynamics import (
    CapitalAccount,
    ForestExhaustedWarning,
    LandAccount,
    advance_capital_labor,
    advance_land,
    deforestation_supply,
    migrate_land,
    record_deforestation,
)
from deforcge.errors import ForestExhausted, NegativeStock, NonPositivePrice
from deforcge.sam import Compliance

C, N = Compliance.COMPLIANT, Compliance.NONCOMPLIANT


def _land(ratio=1.0, mu=0.06, qfs00=100.0, cpi=1.0, forest=1000.0, qdefor=0.0):
    """One compliant and one non-compliant crop land type."""
    return LandAccount(
        year=2020,
        lands=("crop_comp", "crop_ncomp"),
        use=("crop", "crop"),
        compliance=(C, N),
        qfs=np.array([200.0, qfs00]),
        qfinit=np.array([200.0, qfs00]),
        qdefor=np.array([0.0, qdefor]),
        wfavg=np.array([2.0, 2.0 * ratio * cpi]),
        ur=np.array([0.1, 0.1]),
        cpi=cpi,
        forest=forest,
        mu=np.array([0.0, mu]),
        qfs00=np.array([200.0, qfs00]),
        wfavg00=np.array([2.0, 2.0]),
        cpi00=1.0,
    )


class TestDeforestationSupply:
    def test_zero_at_base_rent(self):
        assert np.all(deforestation_supply(_land(1.0)) == 0)

    def test_documented_value(self):
        q = deforestation_supply(_land(1.1))
        expected = math.fsum([100.0 * math.expm1(0.06 * math.log(1.1))])  # independent evaluation
        assert q[1] == pytest.approx(expected, rel=0, abs=1e-10)
        assert q[1] == pytest.approx(0.5735, abs=5e-5)
        assert q[0] == 0

    def test_floor(self):
        assert np.all(deforestation_supply(_land(0.9)) == 0)

    def test_nominal_invariance(self):
        a = deforestation_supply(_land(1.1, cpi=1.0))
        b = deforestation_supply(_land(1.1, cpi=2.0))
        np.testing.assert_allclose(a, b, rtol=1e-14)

    def test_non_positive_price(self):
        land = _land(1.0)
        with pytest.raises(NonPositivePrice):
            deforestation_supply(land.observe([2.0, 0.0], land.ur, 1.0))

    def test_year_mismatch(self):
        with pytest.raises(ValueError):
            deforestation_supply(_land(), year=2021)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(1e-4, 0.2), st.floats(0, 2.0))
def test_deforestation_monotone_in_rent(ratio, step, mu):
    a = deforestation_supply(_land(ratio, mu=mu))[1]
    b = deforestation_supply(_land(ratio * (1 + step), mu=mu))[1]
    assert b >= a >= 0


class TestAdvanceLand:
    def test_non_compliant_adds_deforestation(self):
        nxt = advance_land(_land(qdefor=0.5735))
        assert nxt.qfinit[1] == pytest.approx(100.5735, abs=1e-12)
        assert nxt.year == 2021

    def test_compliant_carries_over(self):
        land = _land(qdefor=3.0)
        assert advance_land(land).qfinit[0] == land.qfs[0]

    def test_forest_subtraction(self):
        nxt = advance_land(_land(qdefor=47.0, forest=1000.0))
        assert nxt.forest == 953.0

    def test_exhaustion_capped_with_warning(self):
        with pytest.warns(ForestExhaustedWarning):
            nxt = advance_land(_land(qdefor=50.0, forest=20.0))
        assert nxt.forest == 0.0
        assert nxt.qfinit[1] == pytest.approx(120.0)

    def test_exhaustion_strict(self):
        with pytest.raises(ForestExhausted):
            record_deforestation(_land(forest=20.0), [0.0, 50.0], strict=True)

    def test_negative_stock(self):
        with pytest.raises(NegativeStock):
            _land(forest=-1.0)


class TestMigration:
    def test_equal_returns(self):
        q = np.array([100.0, 50.0, 25.0])
        np.testing.assert_array_equal(migrate_land(q, [1.0, 1.0, 1.0], 0.25), q)

    def test_documented_flow(self):
        out = migrate_land([100.0, 100.0], [1.0, 1.2], 0.1)
        # 0.1 * 100 * (1.2 - 1.0) / 1.0 = 2 ha move to the second use
        np.testing.assert_allclose(out, [98.0, 102.0], rtol=1e-14)
        assert out.sum() == 200.0

    def test_no_cross_class_flow(self):
        out = migrate_land([100.0, 100.0], [1.0, 5.0], 0.5, classes=["c", "n"])
        np.testing.assert_array_equal(out, [100.0, 100.0])

    def test_outflow_capped(self):
        out = migrate_land([10.0, 10.0, 10.0], [1.0, 50.0, 60.0], 1.0)
        assert out[0] == pytest.approx(0.0, abs=1e-12)
        assert out.sum() == pytest.approx(30.0, rel=1e-15)
        assert np.all(out >= 0)

    def test_errors(self):
        with pytest.raises(NegativeStock):
            migrate_land([-1.0, 1.0], [1.0, 1.0], 0.1)
        with pytest.raises(NonPositivePrice):
            migrate_land([1.0, 1.0], [0.0, 1.0], 0.1)


@settings(max_examples=500, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0, 1e6), st.floats(0.05, 20.0), st.sampled_from("cn")), min_size=2, max_size=6),
    st.floats(0, 2.0),
)
def test_migration_conserves_class_totals(uses, mobility):
    q = np.array([u[0] for u in uses])
    r = np.array([u[1] for u in uses])
    classes = [u[2] for u in uses]
    out = migrate_land(q, r, mobility, classes)
    assert np.all(out >= -1e-9 * max(1.0, q.max()))
    for k in set(classes):
        mask = np.array([c == k for c in classes])
        total = q[mask].sum()
        assert abs(out[mask].sum() - total) <= 1e-12 * max(1.0, total)


class TestCapital:
    def test_decay_only(self):
        k, _ = advance_capital_labor(CapitalAccount(np.array([100.0]), 0.05, np.array([1.0])), 0.0, 1.0, 0.0)
        assert k.stock[0] == pytest.approx(95.0)

    def test_allocation(self):
        start = CapitalAccount(np.array([10.0, 10.0]), 0.0, np.array([0.7, 0.3]))
        k, _ = advance_capital_labor(start, 10.0, 1.0, 0.0)
        np.testing.assert_allclose(k.stock - start.stock, [7.0, 3.0])

    def test_labor_growth(self):
        _, labor = advance_capital_labor(CapitalAccount(np.ones(1), 0.05, np.ones(1)), 0.0, 200.0, 0.01)
        assert labor == pytest.approx(202.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            CapitalAccount(np.ones(1), 1.5, np.ones(1))
        with pytest.raises(ValueError):
            advance_capital_labor(CapitalAccount(np.ones(1), 0.05, np.ones(1)), -1.0, 1.0, 0.0)


def test_baseline_land_accounting(calibrated, inputs):
    """Twelve baseline years: migration conserves classes, forest follows the stock identity."""
    from deforcge.simulate import simulate

    with warnings.catch_warnings():
        warnings.simplefilter("error", ForestExhaustedWarning)
        res = simulate(calibrated.params, range(2019, 2031), inputs.projections, tfp_path=calibrated.tfp_path)
    assert len(res.records) == 12
    prev = None
    for rec in res.records:
        land = rec.land
        for cls in (C, N):
            mask = np.array([c is cls for c in land.compliance])
            total = land.qfinit[mask].sum()
            assert abs(land.qfs[mask].sum() - total) <= 1e-12 * total
        if prev is not None:
            assert land.forest == prev.forest - prev.qdefortot
            assert land.forest <= prev.forest
            expected = prev.qfs + np.where(prev.noncompliant, prev.qdefor, 0.0)
            np.testing.assert_array_equal(land.qfinit, expected)
        prev = land
