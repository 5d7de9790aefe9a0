"""Social Accounting Matrix: data model, file I/O, balance checks, RAS and
compliance disaggregation.

A SAM is stored as a dense square matrix; rows are income (receipts) and
columns are expenditure. Account names are unique across the whole matrix
so that long-format records can reference them unambiguously.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DuplicateCell,
    MalformedRecord,
    MissingLinkage,
    NotConverged,
    ShareOutOfRange,
    ZeroLine,
)

log = logging.getLogger(__name__)

COMPLIANT_SUFFIX = "_comp"
NONCOMPLIANT_SUFFIX = "_ncomp"


class Kind(str, enum.Enum):
    ACTIVITY = "Activity"
    COMMODITY = "Commodity"
    FACTOR = "Factor"
    HOUSEHOLD = "Household"
    GOVERNMENT = "Government"
    TAX = "TaxInstrument"
    SAVINGS_INVESTMENT = "SavingsInvestment"
    REST_OF_WORLD = "RestOfWorld"


class Compliance(str, enum.Enum):
    COMPLIANT = "Compliant"
    NONCOMPLIANT = "NonCompliant"
    NA = "NotApplicable"


class Partner(str, enum.Enum):
    EU = "EU"
    REST = "Rest"


@dataclass(frozen=True)
class AccountId:
    kind: Kind
    name: str
    compliance: Compliance = Compliance.NA
    partner: Partner | None = None

    def __post_init__(self):
        if self.partner is not None and self.kind is not Kind.REST_OF_WORLD:
            raise ValueError(f"partner only allowed on RestOfWorld accounts: {self.name}")


@dataclass(frozen=True)
class SocialAccountingMatrix:
    """Square flow ledger. ``flows[i, j]`` is paid by account j to account i."""

    accounts: tuple[AccountId, ...]
    flows: np.ndarray
    base_year: int = 2019
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        flows = np.array(self.flows, dtype=float)
        n = len(self.accounts)
        if flows.shape != (n, n):
            raise ValueError(f"flows must be {n}x{n}, got {flows.shape}")
        if np.any(flows < 0) or not np.all(np.isfinite(flows)):
            raise ValueError("SAM flows must be finite and non-negative")
        flows.setflags(write=False)
        object.__setattr__(self, "flows", flows)
        index = {}
        for i, acc in enumerate(self.accounts):
            if acc.name in index:
                raise ValueError(f"duplicate account name {acc.name!r}")
            index[acc.name] = i
        object.__setattr__(self, "_index", index)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.accounts]

    def __len__(self) -> int:
        return len(self.accounts)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    def account(self, name: str) -> AccountId:
        return self.accounts[self._index[name]]

    def of_kind(self, kind: Kind) -> list[AccountId]:
        return [a for a in self.accounts if a.kind is kind]

    def cell(self, row: str, col: str) -> float:
        return float(self.flows[self._index[row], self._index[col]])

    def row_sums(self) -> np.ndarray:
        return self.flows.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.flows.sum(axis=0)

    def with_flows(self, flows: np.ndarray) -> "SocialAccountingMatrix":
        return SocialAccountingMatrix(self.accounts, flows, self.base_year)

    def records(self) -> list[tuple[str, str, float]]:
        """Non-zero cells in row-major order."""
        rows, cols = np.nonzero(self.flows)
        names = self.names
        return [(names[i], names[j], float(self.flows[i, j])) for i, j in zip(rows, cols)]


@dataclass(frozen=True)
class BalanceReport:
    imbalance: dict[str, float]
    max_relative_imbalance: float
    balanced: bool
    tolerance: float

    def worst(self, n: int = 5) -> list[tuple[str, float]]:
        return sorted(self.imbalance.items(), key=lambda kv: -abs(kv[1]))[:n]


# --------------------------------------------------------------------------
# File I/O
# --------------------------------------------------------------------------

_DECL_HEADER = ["account", "kind", "compliance", "partner"]
_FLOW_HEADER = ["row_account", "col_account", "value"]


def _parse_enum(enum_cls, text: str, line_no: int):
    text = text.strip()
    for member in enum_cls:
        if text.lower() in (member.value.lower(), member.name.lower()):
            return member
    raise MalformedRecord(f"line {line_no}: unknown {enum_cls.__name__} {text!r}", line=line_no)


def load_sam(path: str | Path) -> SocialAccountingMatrix:
    """Read a SAM from the long-format CSV described in the README.

    The file starts with a declaration block of ``#``-prefixed lines
    (``#account,kind,compliance,partner`` header, then one line per
    account). An optional ``#@base_year,<year>`` line sets the base year.
    The flow block follows with header ``row_account,col_account,value``.
    Missing pairs are zero.
    """
    path = Path(path)
    accounts: list[AccountId] = []
    base_year = 2019
    cells: dict[tuple[str, str], float] = {}
    seen_flow_header = False
    with path.open(newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            first = row[0].strip()
            if first.startswith("#"):
                body = [first[1:]] + [c.strip() for c in row[1:]]
                if body[0].startswith("@"):
                    if body[0] == "@base_year":
                        try:
                            base_year = int(body[1])
                        except (IndexError, ValueError):
                            raise MalformedRecord(f"line {line_no}: bad base_year", line=line_no)
                    continue
                if [b.lower() for b in body[:4]] == _DECL_HEADER:
                    continue
                if len(body) < 2:
                    raise MalformedRecord(f"line {line_no}: short account declaration", line=line_no)
                body += [""] * (4 - len(body))
                kind = _parse_enum(Kind, body[1], line_no)
                compliance = _parse_enum(Compliance, body[2], line_no) if body[2] else Compliance.NA
                partner = _parse_enum(Partner, body[3], line_no) if body[3] else None
                try:
                    accounts.append(AccountId(kind, body[0].strip(), compliance, partner))
                except ValueError as exc:
                    raise MalformedRecord(f"line {line_no}: {exc}", line=line_no) from None
                continue
            if [c.strip().lower() for c in row[:3]] == _FLOW_HEADER:
                seen_flow_header = True
                continue
            if not seen_flow_header:
                raise MalformedRecord(f"line {line_no}: flow record before header", line=line_no)
            if len(row) != 3:
                raise MalformedRecord(f"line {line_no}: expected 3 fields, got {len(row)}", line=line_no)
            r, c, v = (x.strip() for x in row)
            try:
                value = float(v)
            except ValueError:
                raise MalformedRecord(f"line {line_no}: non-numeric value {v!r}", line=line_no) from None
            if not math.isfinite(value) or value < 0:
                raise MalformedRecord(f"line {line_no}: value must be finite and >= 0", line=line_no)
            if (r, c) in cells:
                raise DuplicateCell(f"line {line_no}: duplicate cell ({r}, {c})", row=r, col=c)
            cells[(r, c)] = value

    names = {a.name for a in accounts}
    if len(names) != len(accounts):
        raise MalformedRecord("duplicate account declaration")
    index = {a.name: i for i, a in enumerate(accounts)}
    flows = np.zeros((len(accounts), len(accounts)))
    for (r, c), value in cells.items():
        for name in (r, c):
            if name not in index:
                raise MalformedRecord(f"undeclared account {name!r}", account=name)
        flows[index[r], index[c]] = value
    return SocialAccountingMatrix(tuple(accounts), flows, base_year)


def save_sam(sam: SocialAccountingMatrix, path: str | Path) -> None:
    """Write ``sam`` in the format read by :func:`load_sam` (lossless floats)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["#@base_year", sam.base_year])
        w.writerow(["#" + _DECL_HEADER[0]] + _DECL_HEADER[1:])
        for a in sam.accounts:
            w.writerow(["#" + a.name, a.kind.value, a.compliance.value, a.partner.value if a.partner else ""])
        w.writerow(_FLOW_HEADER)
        for r, c, v in sam.records():
            w.writerow([r, c, repr(v)])


# --------------------------------------------------------------------------
# Balance and RAS
# --------------------------------------------------------------------------

def check_balance(sam: SocialAccountingMatrix, tol: float = 1e-9) -> BalanceReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    rows, cols = sam.row_sums(), sam.col_sums()
    diff = rows - cols
    rel = np.abs(diff) / np.maximum(1.0, rows)
    worst = float(rel.max()) if len(rel) else 0.0
    return BalanceReport(
        imbalance={n: float(d) for n, d in zip(sam.names, diff)},
        max_relative_imbalance=worst,
        balanced=worst <= tol,
        tolerance=tol,
    )


def ras(
    matrix: np.ndarray,
    row_targets: np.ndarray,
    col_targets: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> tuple[np.ndarray, int]:
    """Biproportional scaling of ``matrix`` to the given margins.

    Returns the scaled matrix and the number of row/column sweeps used.
    Zero cells stay zero. Convergence is measured as the largest relative
    deviation of any margin from its target.
    """
    x = np.array(matrix, dtype=float)
    r_t = np.asarray(row_targets, dtype=float)
    c_t = np.asarray(col_targets, dtype=float)
    for label, sums, targets in (("row", x.sum(axis=1), r_t), ("column", x.sum(axis=0), c_t)):
        bad = np.flatnonzero((sums == 0) & (targets > 0))
        if bad.size:
            raise ZeroLine(f"{label} {int(bad[0])} is all zero but its target is positive", index=int(bad[0]))

    def gap(m):
        dr = np.abs(m.sum(axis=1) - r_t) / np.maximum(1.0, r_t)
        dc = np.abs(m.sum(axis=0) - c_t) / np.maximum(1.0, c_t)
        return max(dr.max(initial=0.0), dc.max(initial=0.0))

    it = 0
    while gap(x) > tol:
        if it >= max_iter:
            raise NotConverged(f"RAS did not converge in {max_iter} iterations", gap=gap(x))
        rs = x.sum(axis=1)
        x *= np.divide(r_t, rs, out=np.zeros_like(rs), where=rs > 0)[:, None]
        cs = x.sum(axis=0)
        x *= np.divide(c_t, cs, out=np.zeros_like(cs), where=cs > 0)[None, :]
        it += 1
    return x, it


def ras_balance(
    sam: SocialAccountingMatrix,
    tol: float = 1e-10,
    max_iter: int = 1000,
    targets: np.ndarray | None = None,
) -> SocialAccountingMatrix:
    """Balance a SAM by RAS towards common row/column totals.

    By default each account's target total is the average of its current
    row and column sums.
    """
    if targets is None:
        targets = 0.5 * (sam.row_sums() + sam.col_sums())
    targets = np.asarray(targets, dtype=float)
    if check_balance(sam, tol).balanced and np.allclose(sam.row_sums(), targets, rtol=tol, atol=0):
        return sam
    flows, it = ras(sam.flows, targets, targets, tol=tol, max_iter=max_iter)
    log.debug("RAS converged after %d sweeps", it)
    return sam.with_flows(flows)


# --------------------------------------------------------------------------
# Compliance split
# --------------------------------------------------------------------------

def split_names(name: str) -> tuple[str, str]:
    """(compliant, non-compliant) twin names for a split account."""
    return name + COMPLIANT_SUFFIX, name + NONCOMPLIANT_SUFFIX


def _resolve_share(name, shares, linkage, indirect):
    if name in shares:
        return shares[name]
    seen = [name]
    current = name
    while current in linkage:
        current = linkage[current]
        if current in seen:
            raise MissingLinkage(f"linkage cycle through {current!r}", account=name)
        seen.append(current)
        if current in shares:
            return shares[current]
    raise MissingLinkage(f"no raw-material share reachable from {name!r}", account=name)


def disaggregate_accounts(
    sam: SocialAccountingMatrix,
    shares: Mapping[str, float],
    linkage: Mapping[str, str] | None = None,
    indirect: Iterable[str] = (),
) -> SocialAccountingMatrix:
    """Split accounts into compliant / non-compliant twins.

    Args:
        sam: matrix to split.
        shares: non-compliant share per account (activities, commodities and
            the land factors that go with them).
        linkage: derived product -> driving raw material. Linked accounts
            inherit the share of their target.
        indirect: accounts that must be split through ``linkage``; a missing
            mapping raises :class:`MissingLinkage`.

    Every cell of a split account is divided s / (1 - s). When both the row
    and the column account are split with the same share the split is
    diagonal (non-compliant pays non-compliant), otherwise the cell is split
    by the product of the two shares. Either way per-cell mass and both
    margins are preserved, so a balanced input stays balanced.
    """
    linkage = dict(linkage or {})
    for name in indirect:
        if name not in linkage:
            raise MissingLinkage(f"indirect product {name!r} has no raw-material mapping", account=name)

    split: dict[str, float] = {}
    for name in list(shares) + list(linkage):
        if name not in sam or name in split:
            continue
        acc = sam.account(name)
        if acc.kind is Kind.TAX:
            raise ValueError(f"tax account {name!r} cannot be split by compliance")
        s = _resolve_share(name, shares, linkage, indirect)
        if not (0.0 <= s <= 1.0) or not math.isfinite(s):
            raise ShareOutOfRange(f"share for {name!r} is {s}", account=name, share=s)
        split[name] = float(s)

    new_accounts: list[AccountId] = []
    # (old index, weight kind) per new position: kind 0 = unsplit, 1 = compliant, 2 = non-compliant
    origin: list[tuple[int, int]] = []
    for i, acc in enumerate(sam.accounts):
        if acc.name in split:
            c_name, n_name = split_names(acc.name)
            new_accounts.append(replace(acc, name=c_name, compliance=Compliance.COMPLIANT))
            new_accounts.append(replace(acc, name=n_name, compliance=Compliance.NONCOMPLIANT))
            origin += [(i, 1), (i, 2)]
        else:
            new_accounts.append(acc)
            origin.append((i, 0))

    old = sam.flows
    names = sam.names
    n = len(new_accounts)
    flows = np.zeros((n, n))
    for p, (i, ki) in enumerate(origin):
        si = split.get(names[i])
        for q, (j, kj) in enumerate(origin):
            v = old[i, j]
            if v == 0.0:
                continue
            sj = split.get(names[j])
            flows[p, q] = _split_cell(v, si, ki, sj, kj)
    return SocialAccountingMatrix(tuple(new_accounts), flows, sam.base_year)


def _part(v: float, s: float, k: int) -> float:
    # non-compliant takes s*v, compliant takes the remainder so the pair sums to v
    nc = s * v
    return nc if k == 2 else v - nc


def _split_cell(v, si, ki, sj, kj) -> float:
    if ki == 0 and kj == 0:
        return v
    if ki == 0:
        return _part(v, sj, kj)
    if kj == 0:
        return _part(v, si, ki)
    if si == sj:
        return _part(v, si, ki) if ki == kj else 0.0
    return _part(_part(v, si, ki), sj, kj)
