"""Direct exposure of exports to the regulation, read off the SAM."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..errors import NotDisaggregated
from ..sam import COMPLIANT_SUFFIX, NONCOMPLIANT_SUFFIX, Compliance, Kind, Partner, SocialAccountingMatrix


@dataclass(frozen=True)
class CoverageRow:
    product: str
    eu_share_of_exports: float  # percent
    export_share_of_demand: float  # percent
    eu_compliant: float
    eu_noncompliant: float

    @property
    def eu_total(self) -> float:
        return self.eu_compliant + self.eu_noncompliant


@dataclass(frozen=True)
class CoverageSummary:
    rows: tuple[CoverageRow, ...]

    @property
    def compliant_total(self) -> float:
        return sum(r.eu_compliant for r in self.rows)

    @property
    def noncompliant_total(self) -> float:
        return sum(r.eu_noncompliant for r in self.rows)

    @property
    def noncompliant_ratio(self) -> float:
        """Non-compliant share of covered EU exports, percent."""
        total = self.compliant_total + self.noncompliant_total
        return 100.0 * self.noncompliant_total / total if total > 0 else 0.0

    def formatted(self) -> dict[str, str]:
        return {
            "noncompliant": f"{self.noncompliant_total:.2f}",
            "compliant": f"{self.compliant_total:.2f}",
            "ratio": f"{self.noncompliant_ratio:.2f}",
        }


def coverage_summary(sam: SocialAccountingMatrix) -> CoverageSummary:
    """EU export exposure of every product split by compliance.

    For each split product: the EU share of its exports, the export share
    of its total demand (row total), and the values exported to the EU by
    the compliant and non-compliant variants.

    Raises:
        NotDisaggregated: no compliance split or no EU/Rest partition.
    """
    row = [a for a in sam.accounts if a.kind is Kind.REST_OF_WORLD]
    eu = [a.name for a in row if a.partner is Partner.EU]
    rest = [a.name for a in row if a.partner is Partner.REST]
    if len(eu) != 1 or len(rest) != 1:
        raise NotDisaggregated("SAM needs exactly one EU and one Rest rest-of-world account")
    eu, rest = eu[0], rest[0]
    comms = {a.name: a for a in sam.accounts if a.kind is Kind.COMMODITY}
    totals = sam.row_sums()
    rows = []
    for name, acc in comms.items():
        if acc.compliance is not Compliance.COMPLIANT or not name.endswith(COMPLIANT_SUFFIX):
            continue
        base = name[: -len(COMPLIANT_SUFFIX)]
        twin = base + NONCOMPLIANT_SUFFIX
        if twin not in comms:
            raise NotDisaggregated(f"{name} has no non-compliant twin", commodity=name)
        names = (name, twin)
        to_eu = [sam.cell(n, eu) for n in names]
        exports = sum(sam.cell(n, eu) + sam.cell(n, rest) for n in names)
        demand = sum(totals[sam.index(n)] for n in names)
        rows.append(CoverageRow(
            product=base,
            eu_share_of_exports=100.0 * sum(to_eu) / exports if exports > 0 else 0.0,
            export_share_of_demand=100.0 * exports / demand if demand > 0 else 0.0,
            eu_compliant=to_eu[0],
            eu_noncompliant=to_eu[1],
        ))
    if not rows:
        raise NotDisaggregated("SAM has no compliance-split commodities")
    return CoverageSummary(tuple(rows))


def write_coverage(summary: CoverageSummary, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product", "eu_share_of_exports", "export_share_of_demand", "eu_compliant", "eu_noncompliant",
                    "eu_total"])
        for r in summary.rows:
            w.writerow([r.product, f"{r.eu_share_of_exports:.2f}", f"{r.export_share_of_demand:.2f}",
                        f"{r.eu_compliant:.2f}", f"{r.eu_noncompliant:.2f}", f"{r.eu_total:.2f}"])
        w.writerow(["total", "", "", f"{summary.compliant_total:.2f}", f"{summary.noncompliant_total:.2f}",
                    f"{summary.compliant_total + summary.noncompliant_total:.2f}"])
        w.writerow(["noncompliant_ratio_percent", "", "", "", "", f"{summary.noncompliant_ratio:.2f}"])
