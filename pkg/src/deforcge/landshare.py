"""Share of land, and hence production, that fails the deforestation
cutoff.

The activity-level share in a region is post-cutoff converted hectares
over the hectares the activity uses in the last observed year. Crop-level
shares inherit the regional activity share and are aggregated to national
figures with planted-area weights.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    LinkageCycle,
    MissingLandUse,
    MissingLinkageTarget,
    NegativeHectares,
    UnmappedCrop,
    ZeroTotalArea,
)

log = logging.getLogger(__name__)

DEFAULT_CUTOFF_YEARS = frozenset({2021, 2022})
ACTIVITIES = ("crop", "livestock", "forestry")


class ShareClampWarning(UserWarning):
    """Converted hectares exceeded land in use; the share was clamped to 1."""


@dataclass(frozen=True)
class TransitionTable:
    """Hectares of forest converted to each use, keyed by (activity, region, year)."""

    hectares: Mapping[tuple[str, str, int], float]

    def __post_init__(self):
        for key, ha in self.hectares.items():
            if ha < 0:
                raise NegativeHectares(f"negative converted hectares at {key}", key=key)


@dataclass(frozen=True)
class LandUseTable:
    """Hectares in use in the last observed year, keyed by (activity, region)."""

    hectares: Mapping[tuple[str, str], float]

    def __post_init__(self):
        for key, ha in self.hectares.items():
            if ha < 0:
                raise NegativeHectares(f"negative land use at {key}", key=key)


@dataclass(frozen=True)
class CensusAreaTable:
    """Planted area keyed by (crop, region)."""

    area: Mapping[tuple[str, str], float]

    def __post_init__(self):
        for key, ha in self.area.items():
            if ha < 0:
                raise NegativeHectares(f"negative census area at {key}", key=key)

    def crops(self) -> list[str]:
        return sorted({k for k, _ in self.area})


# account -> share in [0, 1]
NonCompliantShareTable = dict


def activity_share(
    transitions: TransitionTable,
    landuse: LandUseTable,
    cutoff_years: Iterable[int] = DEFAULT_CUTOFF_YEARS,
) -> dict[tuple[str, str], float]:
    """Non-compliant land share for every (activity, region) in ``transitions``."""
    cutoff = set(cutoff_years)
    converted: dict[tuple[str, str], float] = {}
    for (activity, region, year), ha in transitions.hectares.items():
        key = (activity, region)
        converted.setdefault(key, 0.0)
        if year in cutoff:
            converted[key] += ha

    out = {}
    for key, d in converted.items():
        if key not in landuse.hectares:
            raise MissingLandUse(f"no land-use entry for {key}", key=key)
        used = landuse.hectares[key]
        if used <= 0:
            if d > 0:
                raise MissingLandUse(f"land use for {key} is zero but conversions exist", key=key)
            out[key] = 0.0
            continue
        share = d / used
        if share > 1.0:
            warnings.warn(f"converted land exceeds land in use for {key}; share clamped to 1", ShareClampWarning)
            share = 1.0
        out[key] = share
    return out


def product_shares(
    activity_shares: Mapping[tuple[str, str], float],
    census: CensusAreaTable,
    crop_to_activity: Mapping[str, str],
) -> dict[str, float]:
    """National share per crop, area-weighted across regions."""
    out = {}
    for crop in census.crops():
        if crop not in crop_to_activity:
            raise UnmappedCrop(f"crop {crop!r} has no activity mapping", crop=crop)
        activity = crop_to_activity[crop]
        total = 0.0
        weighted = 0.0
        for (k, region), area in census.area.items():
            if k != crop:
                continue
            total += area
            weighted += area * activity_shares.get((activity, region), 0.0)
        if total <= 0:
            raise ZeroTotalArea(f"crop {crop!r} has zero planted area", crop=crop)
        out[crop] = weighted / total
    return out


def national_activity_shares(
    activity_shares: Mapping[tuple[str, str], float], landuse: LandUseTable
) -> dict[str, float]:
    """Land-use weighted national share per activity."""
    used: dict[str, float] = {}
    conv: dict[str, float] = {}
    for (activity, region), ha in landuse.hectares.items():
        used[activity] = used.get(activity, 0.0) + ha
        conv[activity] = conv.get(activity, 0.0) + ha * activity_shares.get((activity, region), 0.0)
    return {a: conv[a] / used[a] for a in used if used[a] > 0}


def propagate_indirect(shares: Mapping[str, float], linkage: Mapping[str, str]) -> dict[str, float]:
    """Give each derived product the share of its (transitive) raw material."""
    out = dict(shares)
    for product in linkage:
        if product in shares:
            continue
        chain = [product]
        current = product
        while current in linkage:
            current = linkage[current]
            if current in chain:
                raise LinkageCycle(" <- ".join(chain + [current]), chain=chain)
            chain.append(current)
            if current in shares:
                break
        if current not in shares:
            raise MissingLinkageTarget(f"{product!r} links to {current!r}, which has no share", product=product)
        out[product] = shares[current]
    return out


# --------------------------------------------------------------------------
# CSV interfaces
# --------------------------------------------------------------------------

def _rows(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [{k.strip(): (v or "").strip() for k, v in row.items()} for row in csv.DictReader(fh)]


def read_transitions(path) -> TransitionTable:
    data = {}
    for r in _rows(path):
        key = (r["activity"], r["region"], int(r["year"]))
        if key in data:
            raise ValueError(f"duplicate transition key {key}")
        data[key] = float(r["hectares"])
    return TransitionTable(data)


def read_landuse(path) -> LandUseTable:
    return LandUseTable({(r["activity"], r["region"]): float(r["hectares"]) for r in _rows(path)})


def read_census(path) -> CensusAreaTable:
    return CensusAreaTable({(r["crop"], r["region"]): float(r["area"]) for r in _rows(path)})


def read_linkage(path) -> dict[str, str]:
    return {r["derived_product"]: r["raw_material"] for r in _rows(path)}


def read_shares(path) -> dict[str, float]:
    return {r["account"]: float(r["share"]) for r in _rows(path)}


def write_shares(shares: Mapping[str, float], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["account", "share"])
        for k in sorted(shares):
            w.writerow([k, repr(float(shares[k]))])


def sam_share_table(
    transitions: TransitionTable,
    landuse: LandUseTable,
    census: CensusAreaTable,
    crop_to_activity: Mapping[str, str],
    account_map: Mapping[str, str],
    linkage: Mapping[str, str] = None,
    cutoff_years: Iterable[int] = DEFAULT_CUTOFF_YEARS,
) -> dict[str, float]:
    """Build the account share table consumed by SAM disaggregation.

    ``account_map`` maps a SAM account to its source: ``crop:<name>`` for a
    census crop (or ``crop:*`` for the area-weighted aggregate of every crop
    of the crop activity) and ``activity:<name>`` for an activity-level
    share, which is applied uniformly to all products of that activity.
    """
    regional = activity_share(transitions, landuse, cutoff_years)
    national = national_activity_shares(regional, landuse)
    crops = product_shares(regional, census, crop_to_activity)
    out = {}
    for account, source in account_map.items():
        kind, _, name = source.partition(":")
        if kind == "activity":
            out[account] = national[name]
        elif kind == "crop" and name == "*":
            weights = {k: sum(a for (c, _), a in census.area.items() if c == k) for k in crops}
            total = sum(weights.values())
            if total <= 0:
                raise ZeroTotalArea("no planted area in census")
            out[account] = sum(crops[k] * weights[k] for k in crops) / total
        elif kind == "crop":
            out[account] = crops[name]
        else:
            raise ValueError(f"unknown share source {source!r} for {account!r}")
    if linkage:
        out = propagate_indirect(out, linkage)
    return out
