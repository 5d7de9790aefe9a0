import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deforcge import data, landshare
from deforcge.errors import (
    LinkageCycle,
    MissingLandUse,
    MissingLinkageTarget,
    NegativeHectares,
    UnmappedCrop,
    ZeroTotalArea,
)
from deforcge.landshare import (
    CensusAreaTable,
    LandUseTable,
    ShareClampWarning,
    TransitionTable,
    activity_share,
    product_shares,
    propagate_indirect,
)


def _share(d2021, d2022, used, older=0.0):
    t = TransitionTable({("crop", "r", 2020): older, ("crop", "r", 2021): d2021, ("crop", "r", 2022): d2022})
    return activity_share(t, LandUseTable({("crop", "r"): used}))[("crop", "r")]


class TestActivityShare:
    def test_documented_example(self):
        assert _share(5, 3, 400) == 8 / 400 == 0.02

    def test_pre_cutoff_years_ignored(self):
        assert _share(5, 3, 400, older=50) == 0.02

    def test_no_conversion(self):
        assert _share(0, 0, 100) == 0.0

    def test_clamped_with_warning(self):
        with pytest.warns(ShareClampWarning):
            assert _share(60, 50, 100) == 1.0

    def test_missing_land_use(self):
        t = TransitionTable({("crop", "r", 2021): 1.0})
        with pytest.raises(MissingLandUse):
            activity_share(t, LandUseTable({("crop", "other"): 10.0}))

    def test_negative_hectares(self):
        with pytest.raises(NegativeHectares):
            TransitionTable({("crop", "r", 2021): -1.0})

    def test_custom_cutoff(self):
        t = TransitionTable({("crop", "r", 2022): 3.0, ("crop", "r", 2023): 1.0})
        out = activity_share(t, LandUseTable({("crop", "r"): 10.0}), cutoff_years={2023})
        assert out[("crop", "r")] == pytest.approx(0.1)


@settings(max_examples=1000, deadline=None)
@given(
    st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1.0, 1e7),
    st.floats(1e-3, 1e3),
)
def test_scale_invariance(d1, d2, used, k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ShareClampWarning)
        a = _share(d1, d2, used)
        b = _share(d1 * k, d2 * k, used * k)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


class TestProductShares:
    def test_single_region(self):
        out = product_shares({("crop", "r"): 0.02}, CensusAreaTable({("soy", "r"): 50.0}), {"soy": "crop"})
        assert out["soy"] == pytest.approx(0.02)

    def test_area_weighted(self):
        census = CensusAreaTable({("soy", "n"): 70.0, ("soy", "s"): 30.0})
        out = product_shares({("crop", "n"): 0.10, ("crop", "s"): 0.0}, census, {"soy": "crop"})
        assert out["soy"] == pytest.approx(0.07, abs=1e-15)

    def test_zero_area(self):
        with pytest.raises(ZeroTotalArea):
            product_shares({}, CensusAreaTable({("soy", "n"): 0.0}), {"soy": "crop"})

    def test_unmapped(self):
        with pytest.raises(UnmappedCrop):
            product_shares({}, CensusAreaTable({("soy", "n"): 1.0}), {})


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0.01, 1e4)), min_size=1, max_size=6))
def test_product_share_is_convex_combination(regions):
    shares = {("crop", f"r{i}"): s for i, (s, _) in enumerate(regions)}
    census = CensusAreaTable({("soy", f"r{i}"): a for i, (_, a) in enumerate(regions)})
    out = product_shares(shares, census, {"soy": "crop"})["soy"]
    lo, hi = min(s for s, _ in regions), max(s for s, _ in regions)
    assert lo - 1e-12 <= out <= hi + 1e-12


class TestPropagate:
    def test_direct(self):
        out = propagate_indirect({"soybeans": 0.25}, {"soy_oil": "soybeans"})
        assert out == {"soybeans": 0.25, "soy_oil": 0.25}

    def test_chain(self):
        out = propagate_indirect({"pasture": 0.04}, {"leather": "cattle", "cattle": "pasture"})
        assert out["leather"] == 0.04 and out["cattle"] == 0.04

    def test_cycle(self):
        with pytest.raises(LinkageCycle):
            propagate_indirect({"x": 0.1}, {"a": "b", "b": "a"})

    def test_missing_target(self):
        with pytest.raises(MissingLinkageTarget):
            propagate_indirect({"x": 0.1}, {"a": "nothing"})


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 1), min_size=1))
def test_propagate_idempotent(raw):
    linkage = {"p1": "p2", "p2": sorted(raw)[0], "p3": sorted(raw)[-1]}
    linkage = {k: v for k, v in linkage.items() if k not in raw}
    once = propagate_indirect(raw, linkage)
    assert propagate_indirect(once, linkage) == once


def test_bundled_share_table_matches_file():
    rows = lambda name: landshare._rows(data.path(name))  # noqa: E731
    shares = landshare.sam_share_table(
        landshare.read_transitions(data.path("transitions.csv")),
        landshare.read_landuse(data.path("landuse.csv")),
        landshare.read_census(data.path("census.csv")),
        {r["crop"]: r["activity"] for r in rows("crop_map.csv")},
        {r["account"]: r["source"] for r in rows("account_sources.csv")},
        landshare.read_linkage(data.path("linkage.csv")),
    )
    assert shares == pytest.approx(landshare.read_shares(data.path("shares.csv")), rel=0, abs=0)
    assert all(0 <= v <= 1 for v in shares.values())
