"""Deterministic generator for the bundled stylized data set.

Run ``python -m deforcge.data.build [outdir]`` to regenerate every bundled
file. The aggregate SAM is assembled from a handful of technical
coefficients so that it balances by construction; household consumption is
the commodity-balance residual, distributed across deciles by RAS.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np
import yaml

from .. import landshare
from ..sam import (
    AccountId,
    Kind,
    Partner,
    SocialAccountingMatrix,
    check_balance,
    disaggregate_accounts,
    ras,
    save_sam,
    split_names,
)

SECTORS = ("crop", "lvst", "fore", "oilm", "meat", "ener", "manuf", "serv")
LAND_SECTORS = {"crop": "f_land_crop", "lvst": "f_land_lvst", "fore": "f_land_fore"}
LAND_USE = {"crop": "crop", "lvst": "livestock", "fore": "forestry"}
COVERED = ("crop", "lvst", "fore", "oilm", "meat")
LINKED = {"oilm": "crop", "meat": "lvst"}
N_HH = 10
HOUSEHOLDS = tuple(f"hh_d{h:02d}" for h in range(1, N_HH + 1))
REGIONS = ("northwest", "northeast", "pampas", "patagonia")

OUTPUT = dict(crop=120, lvst=80, fore=15, oilm=110, meat=90, ener=100, manuf=400, serv=900)
# intermediate coefficients, column = purchasing activity
ICA = {
    "crop": dict(crop=0.05, ener=0.08, manuf=0.15, serv=0.10),
    "lvst": dict(crop=0.15, lvst=0.05, ener=0.04, manuf=0.06, serv=0.08),
    "fore": dict(fore=0.02, ener=0.06, manuf=0.08, serv=0.10),
    "oilm": dict(crop=0.50, ener=0.04, manuf=0.05, serv=0.10),
    "meat": dict(lvst=0.50, ener=0.03, manuf=0.06, serv=0.10),
    "ener": dict(ener=0.20, manuf=0.10, serv=0.15),
    "manuf": dict(crop=0.01, fore=0.02, oilm=0.02, meat=0.02, ener=0.08, manuf=0.25, serv=0.15),
    "serv": dict(oilm=0.005, meat=0.02, ener=0.04, manuf=0.08, serv=0.25),
}
OUTPUT_TAX = dict(serv=0.03)  # default 0.02
VA_SPLIT = {  # labour, capital, land
    "crop": (0.25, 0.35, 0.40),
    "lvst": (0.25, 0.35, 0.40),
    "fore": (0.35, 0.35, 0.30),
    "oilm": (0.40, 0.60, 0.0),
    "meat": (0.50, 0.50, 0.0),
    "ener": (0.30, 0.70, 0.0),
    "manuf": (0.55, 0.45, 0.0),
    "serv": (0.65, 0.35, 0.0),
}
EXPORTS = {  # (EU, Rest)
    "crop": (12.0, 28.0),
    "lvst": (0.3, 1.7),
    "fore": (1.2, 1.8),
    "oilm": (35.0, 55.0),
    "meat": (7.0, 18.0),
    "ener": (1.0, 9.0),
    "manuf": (8.0, 52.0),
    "serv": (10.0, 30.0),
}
IMPORTS = dict(crop=3, lvst=1, fore=2, oilm=1, meat=2, ener=30, manuf=195, serv=50)
IMPORT_EU_SHARE = 0.28
TARIFF = dict(manuf=0.10, ener=0.02, serv=0.0)  # default 0.05
SALES_TAX = dict(crop=0.02, lvst=0.02, fore=0.02, oilm=0.02)  # default 0.05
GOV_DEMAND = dict(serv=150.0, manuf=10.0)
INVESTMENT = dict(manuf=120.0, serv=60.0)
GOV_TRANSFERS = 60.0
REMITTANCES = 5.0
GOV_ROW_TRANSFER = 2.0

LAB_SHARES = [0.03, 0.045, 0.06, 0.07, 0.08, 0.09, 0.105, 0.12, 0.16, 0.24]
CAP_SHARES = [0.01, 0.01, 0.02, 0.03, 0.04, 0.05, 0.07, 0.10, 0.17, 0.50]
LAND_SHARES = [0.0, 0.0, 0.0, 0.01, 0.02, 0.03, 0.05, 0.09, 0.20, 0.60]
TRANSFER_SHARES = [0.14, 0.13, 0.12, 0.11, 0.10, 0.10, 0.09, 0.08, 0.07, 0.06]
REMITTANCE_SHARES = [0.2, 0.15, 0.15, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05]
DIRECT_TAX = [0.0, 0.0, 0.01, 0.02, 0.03, 0.04, 0.06, 0.08, 0.10, 0.14]
SAVING_RATE = [0.01, 0.02, 0.04, 0.06, 0.08, 0.10, 0.13, 0.16, 0.20, 0.30]
FOOD = ("crop", "lvst", "oilm", "meat")

LANDUSE = {
    "crop": (3.0e6, 4.0e6, 22.0e6, 1.0e6),
    "livestock": (8.0e6, 10.0e6, 15.0e6, 7.0e6),
    "forestry": (0.2e6, 1.0e6, 0.3e6, 0.5e6),
}
# hectares converted per (activity, region): {year: ha}
TRANSITIONS = {
    "crop": ({2019: 70e3, 2020: 65e3, 2021: 60e3, 2022: 55e3},
             {2019: 80e3, 2020: 75e3, 2021: 70e3, 2022: 60e3},
             {2019: 8e3, 2020: 6e3, 2021: 5e3, 2022: 4e3},
             {2021: 0.0, 2022: 0.0}),
    "livestock": ({2019: 100e3, 2020: 95e3, 2021: 90e3, 2022: 80e3},
                  {2019: 140e3, 2020: 130e3, 2021: 120e3, 2022: 110e3},
                  {2021: 10e3, 2022: 8e3},
                  {2021: 2e3, 2022: 1e3}),
    "forestry": ({2021: 20e3, 2022: 20e3},
                 {2020: 5e3, 2021: 30e3, 2022: 30e3},
                 {2021: 0.0, 2022: 0.0},
                 {2021: 0.5e3, 2022: 0.5e3}),
}
CENSUS = {  # planted area by region
    "soybeans": (1.6e6, 2.2e6, 11.0e6, 0.1e6),
    "maize": (0.9e6, 1.1e6, 6.5e6, 0.2e6),
    "wheat": (0.5e6, 0.7e6, 4.5e6, 0.7e6),
}
LAND_UNEMPLOYMENT = {"crop": 0.05, "livestock": 0.08, "forestry": 0.10}
LABOR_UNEMPLOYMENT = 0.10
FOREST_STOCK_HA = 7.0e5  # remaining frontier forest open to conversion

ELASTICITIES = {  # armington, top-level CET
    "crop": (2.0, 2.0),
    "lvst": (2.0, 2.0),
    "fore": (2.0, 2.0),
    "oilm": (1.5, 1.5),
    "meat": (1.5, 1.5),
    "ener": (1.5, 1.5),
    "manuf": (1.5, 1.5),
    "serv": (0.9, 0.9),
}
VA_ELASTICITY = 0.8

AFOLU_INVENTORY = {"crop": 30.0, "lvst": 60.0, "fore": 2.0}  # MtCO2e, by land-using class
FOREST_SINK_PER_HA = -2.0e-6
NON_AFOLU_INVENTORY = {"ener": 150.0, "manuf": 20.0}

GDP_GROWTH = {2020: 0.015, 2021: 0.025, 2022: 0.030, 2023: 0.025, 2024: 0.020,
              2025: 0.025, 2026: 0.025, 2027: 0.025, 2028: 0.025, 2029: 0.025, 2030: 0.025}
POPULATION_GROWTH = 0.01


def _tax(table, s, default):
    return table.get(s, default)


def aggregate_sam() -> SocialAccountingMatrix:
    """Eight-sector SAM before the compliance split."""
    accounts = [AccountId(Kind.ACTIVITY, "a_" + s) for s in SECTORS]
    accounts += [AccountId(Kind.COMMODITY, "c_" + s) for s in SECTORS]
    accounts += [AccountId(Kind.FACTOR, "f_lab"), AccountId(Kind.FACTOR, "f_cap")]
    accounts += [AccountId(Kind.FACTOR, LAND_SECTORS[s]) for s in LAND_SECTORS]
    accounts += [AccountId(Kind.HOUSEHOLD, h) for h in HOUSEHOLDS]
    accounts += [AccountId(Kind.GOVERNMENT, "gov")]
    accounts += [AccountId(Kind.TAX, t) for t in ("tax_act", "tax_com", "tax_imp", "tax_dir")]
    accounts += [AccountId(Kind.SAVINGS_INVESTMENT, "s_i")]
    accounts += [AccountId(Kind.REST_OF_WORLD, "row_eu", partner=Partner.EU),
                 AccountId(Kind.REST_OF_WORLD, "row_rest", partner=Partner.REST)]
    idx = {a.name: i for i, a in enumerate(accounts)}
    F = np.zeros((len(accounts), len(accounts)))

    def put(r, c, v):
        F[idx[r], idx[c]] += v

    # production
    for s in SECTORS:
        a, c, x = "a_" + s, "c_" + s, float(OUTPUT[s])
        put(a, c, x)
        for k, coef in ICA[s].items():
            put("c_" + k, a, coef * x)
        ta = _tax(OUTPUT_TAX, s, 0.02)
        put("tax_act", a, ta * x)
        va = x * (1.0 - sum(ICA[s].values()) - ta)
        lab, cap, land = VA_SPLIT[s]
        put("f_lab", a, lab * va)
        put("f_cap", a, cap * va)
        if land:
            put(LAND_SECTORS[s], a, land * va)

    # commodity balance: output + imports + tariffs + sales tax = absorption + exports
    absorption = {}
    for s in SECTORS:
        c = "c_" + s
        eu, rest = EXPORTS[s]
        put(c, "row_eu", eu)
        put(c, "row_rest", rest)
        m = float(IMPORTS[s])
        tm = _tax(TARIFF, s, 0.05)
        put("row_eu", c, IMPORT_EU_SHARE * m)
        put("row_rest", c, (1 - IMPORT_EU_SHARE) * m)
        put("tax_imp", c, tm * m)
        tq = _tax(SALES_TAX, s, 0.05)
        a_val = (OUTPUT[s] - eu - rest + m * (1 + tm)) / (1 - tq)
        absorption[s] = a_val
        put("tax_com", c, tq * a_val)
        put(c, "gov", GOV_DEMAND.get(s, 0.0))
        put(c, "s_i", INVESTMENT.get(s, 0.0))

    intermediate = {s: F[idx["c_" + s], :len(SECTORS)].sum() for s in SECTORS}
    cons = np.array([absorption[s] - intermediate[s] - GOV_DEMAND.get(s, 0.0) - INVESTMENT.get(s, 0.0)
                     for s in SECTORS])
    if np.any(cons <= 0):
        raise AssertionError(f"household consumption residual not positive: {cons}")

    # household incomes
    hh_income = np.zeros(N_HH)
    factor_income = {f: F[idx[f]].sum() for f in ("f_lab", "f_cap", *LAND_SECTORS.values())}
    for h, name in enumerate(HOUSEHOLDS):
        put(name, "f_lab", LAB_SHARES[h] * factor_income["f_lab"])
        put(name, "f_cap", CAP_SHARES[h] * factor_income["f_cap"])
        for f in LAND_SECTORS.values():
            put(name, f, LAND_SHARES[h] * factor_income[f])
        put(name, "gov", TRANSFER_SHARES[h] * GOV_TRANSFERS)
        put(name, "row_rest", REMITTANCE_SHARES[h] * REMITTANCES)
        hh_income[h] = F[idx[name]].sum()
    tax = np.array(DIRECT_TAX) * hh_income
    target_sav = np.array(SAVING_RATE) * (hh_income - tax)
    needed_sav = hh_income.sum() - tax.sum() - cons.sum()
    if needed_sav <= 0:
        raise AssertionError("household savings residual not positive")
    savings = target_sav * needed_sav / target_sav.sum()
    hh_cons = hh_income - tax - savings

    # budget shares tilted towards food for poor deciles, services for rich ones
    rank = np.linspace(0.0, 1.0, N_HH)
    tilt = np.ones((len(SECTORS), N_HH))
    for i, s in enumerate(SECTORS):
        if s in FOOD:
            tilt[i] = 1.6 - 1.0 * rank
        elif s == "serv":
            tilt[i] = 0.7 + 0.6 * rank
    seed = cons[:, None] * tilt * hh_cons[None, :] / hh_cons.sum()
    cmat, _ = ras(seed, cons, hh_cons, tol=1e-14, max_iter=10000)
    for i, s in enumerate(SECTORS):
        for h, name in enumerate(HOUSEHOLDS):
            put("c_" + s, name, cmat[i, h])
    for h, name in enumerate(HOUSEHOLDS):
        put("tax_dir", name, tax[h])
        put("s_i", name, savings[h])

    # government
    for t in ("tax_act", "tax_com", "tax_imp", "tax_dir"):
        put("gov", t, F[idx[t]].sum())
    put("gov", "row_rest", GOV_ROW_TRANSFER)
    g_in = F[idx["gov"]].sum()
    g_out = F[:, idx["gov"]].sum()
    if g_in < g_out:
        raise AssertionError("government savings negative")
    put("s_i", "gov", g_in - g_out)

    # foreign savings closes each partner account
    for r in ("row_eu", "row_rest"):
        gap = F[idx[r]].sum() - F[:, idx[r]].sum()
        if gap < 0:
            raise AssertionError(f"negative foreign savings for {r}: {gap}")
        put("s_i", r, gap)

    sam = SocialAccountingMatrix(tuple(accounts), F, 2019)
    report = check_balance(sam, 1e-9)
    if not report.balanced:
        raise AssertionError(f"aggregate SAM not balanced: {report.worst()}")
    return sam


def land_tables():
    transitions = {}
    for act, per_region in TRANSITIONS.items():
        for region, years in zip(REGIONS, per_region):
            for year, ha in years.items():
                transitions[(act, region, year)] = ha
    landuse = {(act, r): ha for act, vals in LANDUSE.items() for r, ha in zip(REGIONS, vals)}
    census = {(crop, r): ha for crop, vals in CENSUS.items() for r, ha in zip(REGIONS, vals)}
    return (landshare.TransitionTable(transitions), landshare.LandUseTable(landuse),
            landshare.CensusAreaTable(census))


def account_sources() -> dict[str, str]:
    out = {}
    for s in ("crop", "lvst", "fore"):
        source = "crop:*" if s == "crop" else "activity:" + LAND_USE[s]
        for name in ("a_" + s, "c_" + s, LAND_SECTORS[s]):
            out[name] = source
    return out


def linkage() -> dict[str, str]:
    out = {}
    for derived, raw in LINKED.items():
        out["a_" + derived] = "a_" + raw
        out["c_" + derived] = "c_" + raw
    return out


def compute_shares() -> dict[str, float]:
    transitions, landuse, census = land_tables()
    crop_map = {k: "crop" for k in CENSUS}
    return landshare.sam_share_table(transitions, landuse, census, crop_map, account_sources(), linkage())


def land_factor_data(shares) -> dict:
    factors = {}
    for s, f in LAND_SECTORS.items():
        use = LAND_USE[s]
        total = sum(LANDUSE[use])
        comp, ncomp = split_names(f)
        share = shares[f]
        for name, ha in ((comp, (1 - share) * total), (ncomp, share * total)):
            factors[name] = {"use": use, "hectares": float(ha), "unemployment": LAND_UNEMPLOYMENT[use]}
    return factors


def model_inputs(shares) -> dict:
    return {
        "labor": {"account": "f_lab", "unemployment": LABOR_UNEMPLOYMENT, "wage_curve_elasticity": -0.1},
        "capital": {"account": "f_cap", "depreciation": 0.05, "base_growth": 0.03},
        "land": {
            "wage_curve_elasticity": -0.4,
            "supply_elasticity": 0.06,
            "forest_stock_ha": FOREST_STOCK_HA,
            "mobility": 0.25,
            "factors": land_factor_data(shares),
        },
    }


def emission_coefficients(sam: SocialAccountingMatrix) -> list[tuple[str, str, float]]:
    """Intensities that reproduce the inventory at base-year quantities."""
    rows = []
    for s, total in AFOLU_INVENTORY.items():
        names = split_names("a_" + s)
        level = sum(sam.row_sums()[sam.index(n)] for n in names)
        for n in names:
            rows.append((n, "activity", float(total / level)))
    rows.append(("forest", "land", FOREST_SINK_PER_HA))
    consumers = [a.name for a in sam.accounts if a.kind in (Kind.ACTIVITY, Kind.HOUSEHOLD, Kind.GOVERNMENT)]
    for s, total in NON_AFOLU_INVENTORY.items():
        c = "c_" + s
        use = {j: sam.cell(c, j) for j in consumers if sam.cell(c, j) > 0}
        eps = total / sum(use.values())
        for j in use:
            rows.append((c, j, float(eps)))
    return rows


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


EUDR_SCENARIO = {
    "name": "eudr",
    "horizon": {"start": 2019, "end": 2030},
    "shock_start": 2025,
    "shocks": (
        [{"commodity": "c_" + s + "_comp", "destination": "EU", "wedge": 0.06} for s in COVERED]
        + [{"commodity": "c_" + s + "_ncomp", "destination": "EU", "cap": 0.01} for s in COVERED]
    ),
    "overrides": {},
    "solver": {"tolerance": 1e-9, "max_iterations": 200},
    "report_window": {"start": 2025, "end": 2030},
    "calibration": {"deforestation_rate": 0.008},
}

BASELINE_SCENARIO = {
    "name": "baseline",
    "horizon": {"start": 2019, "end": 2030},
    "shocks": [],
    "overrides": {},
    "solver": {"tolerance": 1e-9, "max_iterations": 200},
    "report_window": {"start": 2025, "end": 2030},
}


def build(outdir: str | Path) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    agg = aggregate_sam()
    save_sam(agg, out / "sam_aggregate.csv")

    transitions, landuse, census = land_tables()
    _write_csv(out / "transitions.csv", ["activity", "region", "year", "hectares"],
               [(a, r, y, repr(h)) for (a, r, y), h in sorted(transitions.hectares.items())])
    _write_csv(out / "landuse.csv", ["activity", "region", "hectares"],
               [(a, r, repr(h)) for (a, r), h in sorted(landuse.hectares.items())])
    _write_csv(out / "census.csv", ["crop", "region", "area"],
               [(k, r, repr(h)) for (k, r), h in sorted(census.area.items())])
    _write_csv(out / "crop_map.csv", ["crop", "activity"], [(k, "crop") for k in sorted(CENSUS)])
    _write_csv(out / "account_sources.csv", ["account", "source"], sorted(account_sources().items()))
    _write_csv(out / "linkage.csv", ["derived_product", "raw_material"], sorted(linkage().items()))

    shares = compute_shares()
    landshare.write_shares(shares, out / "shares.csv")
    sam = disaggregate_accounts(agg, shares, linkage(), indirect=linkage().keys())
    report = check_balance(sam, 1e-9)
    if not report.balanced:
        raise AssertionError("disaggregated SAM not balanced")
    save_sam(sam, out / "sam.csv")

    _write_csv(out / "elasticities.csv", ["account", "armington", "cet"],
               [("c_" + s, repr(a), repr(t)) for s, (a, t) in ELASTICITIES.items()])
    _write_csv(out / "va_elasticities.csv", ["account", "value_added"],
               [("a_" + s, repr(VA_ELASTICITY)) for s in SECTORS])
    with (out / "factors.yaml").open("w", encoding="utf-8") as fh:
        yaml.safe_dump(model_inputs(shares), fh, sort_keys=True)
    _write_csv(out / "emission_coefficients.csv", ["emitter_or_product", "counterpart", "intensity"],
               [(e, c, repr(v)) for e, c, v in emission_coefficients(sam)])
    _write_csv(out / "projections.csv", ["year", "gdp_growth", "population_growth"],
               [(y, repr(g), repr(POPULATION_GROWTH)) for y, g in sorted(GDP_GROWTH.items())])
    with (out / "eudr.yaml").open("w", encoding="utf-8") as fh:
        yaml.safe_dump(EUDR_SCENARIO, fh, sort_keys=False)
    with (out / "baseline.yaml").open("w", encoding="utf-8") as fh:
        yaml.safe_dump(BASELINE_SCENARIO, fh, sort_keys=False)


if __name__ == "__main__":
    build(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent)
