"""Scenario definitions and the scenario file format."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import yaml

from ..cge.params import OVERRIDE_GROUPS
from ..errors import ScenarioFileError
from ..sam import Partner
from ..solver.newton import SolverConfig


class Mode(str, enum.Enum):
    BASELINE = "Baseline"
    COUNTERFACTUAL = "Counterfactual"


class WedgeMode(str, enum.Enum):
    FIXED = "Fixed"
    SOLVE_FOR_CAP = "SolveForQuantityCap"


@dataclass(frozen=True)
class PriceWedge:
    """A cut in the world price received for one export flow.

    For ``SOLVE_FOR_CAP`` the wedge is whatever it takes for exports to
    that destination to fall to ``target_share`` of their baseline level;
    ``wedge`` then holds the reference-year solution (or 0 if unresolved).
    """

    commodity: str
    destination: Partner = Partner.EU
    wedge: float = 0.0
    mode: WedgeMode = WedgeMode.FIXED
    target_share: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "destination", Partner(self.destination))
        object.__setattr__(self, "mode", WedgeMode(self.mode))
        if not 0 <= self.wedge < 1:
            raise ValueError(f"wedge for {self.commodity} must lie in [0, 1)")
        if self.mode is WedgeMode.SOLVE_FOR_CAP:
            if self.target_share is None or not 0 < self.target_share <= 1:
                raise ValueError(f"cap share for {self.commodity} must lie in (0, 1]")
            if self.destination is not Partner.EU:
                raise ValueError("quantity caps are supported on EU flows only")

    @classmethod
    def fixed(cls, commodity: str, wedge: float, destination=Partner.EU) -> "PriceWedge":
        return cls(commodity, destination, wedge)

    @classmethod
    def cap(cls, commodity: str, share: float, wedge: float = 0.0) -> "PriceWedge":
        return cls(commodity, Partner.EU, wedge, WedgeMode.SOLVE_FOR_CAP, share)


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to run one trajectory.

    Attributes:
        horizon: first and last simulated year (inclusive).
        shock_start: first year the shocks apply; ``None`` means every year.
        overrides: multiplicative factors per elasticity group.
        report_window: default window for deviation reports.
        deforestation_target: average baseline deforestation rate used to
            calibrate the land-supply elasticity, if any.
    """

    name: str
    horizon: tuple[int, int] = (2019, 2030)
    mode: Mode = Mode.BASELINE
    shocks: tuple[PriceWedge, ...] = ()
    overrides: Mapping[str, float] = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    shock_start: int | None = 2025
    report_window: tuple[int, int] | None = (2025, 2030)
    deforestation_target: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "shocks", tuple(self.shocks))
        object.__setattr__(self, "overrides", dict(self.overrides))
        start, end = self.horizon
        if not start < end:
            raise ValueError("horizon start must precede its end")
        for group, factor in self.overrides.items():
            if group not in OVERRIDE_GROUPS:
                raise ValueError(f"unknown override group {group!r}")
            if not factor > 0:
                raise ValueError(f"override factor for {group} must be positive")
        if self.report_window is not None:
            ws, we = self.report_window
            if not start <= ws <= we <= end:
                raise ValueError("report window must lie inside the horizon")

    @property
    def years(self) -> list[int]:
        return list(range(self.horizon[0], self.horizon[1] + 1))

    def shocked(self, year: int) -> bool:
        return bool(self.shocks) and (self.shock_start is None or year >= self.shock_start)

    def baseline(self) -> "ScenarioSpec":
        """The business-as-usual twin: same horizon and overrides, no shocks."""
        return replace(self, name=f"{self.name}-baseline" if self.mode is Mode.COUNTERFACTUAL else self.name,
                       mode=Mode.BASELINE, shocks=())

    def with_overrides(self, overrides: Mapping[str, float], suffix: str = "") -> "ScenarioSpec":
        merged = {**self.overrides, **overrides}
        return replace(self, name=self.name + suffix, overrides=merged)


def _pair(node, key, path):
    if node is None:
        return None
    if isinstance(node, Mapping):
        try:
            return int(node["start"]), int(node["end"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioFileError(f"{key} needs integer start and end", path=str(path), section=key) from None
    if isinstance(node, (list, tuple)) and len(node) == 2:
        return int(node[0]), int(node[1])
    raise ScenarioFileError(f"{key} must be a start/end pair", path=str(path), section=key)


def _shock(entry, path) -> PriceWedge:
    if not isinstance(entry, Mapping) or "commodity" not in entry:
        raise ScenarioFileError("each shock needs a commodity", path=str(path), section="shocks")
    dest = entry.get("destination", "EU")
    has_wedge, has_cap = "wedge" in entry, "cap" in entry
    if has_wedge == has_cap:
        raise ScenarioFileError(f"shock on {entry['commodity']} needs exactly one of wedge or cap",
                                path=str(path), section="shocks")
    try:
        if has_cap:
            if Partner(dest) is not Partner.EU:
                raise ValueError("caps apply to EU flows only")
            return PriceWedge.cap(str(entry["commodity"]), float(entry["cap"]))
        return PriceWedge.fixed(str(entry["commodity"]), float(entry["wedge"]), Partner(dest))
    except ValueError as exc:
        raise ScenarioFileError(str(exc), path=str(path), section="shocks") from None


def scenario_from_dict(d: Mapping, path="<memory>") -> ScenarioSpec:
    """Build a spec from the parsed scenario file tree."""
    if not isinstance(d, Mapping):
        raise ScenarioFileError("scenario file must hold a mapping", path=str(path))
    unknown = set(d) - {"name", "mode", "horizon", "shock_start", "shocks", "overrides", "solver",
                        "report_window", "calibration"}
    if unknown:
        raise ScenarioFileError(f"unknown sections: {', '.join(sorted(unknown))}", path=str(path))
    shocks = tuple(_shock(e, path) for e in d.get("shocks") or ())
    mode = d.get("mode", Mode.COUNTERFACTUAL.value if shocks else Mode.BASELINE.value)
    calib = d.get("calibration") or {}
    try:
        return ScenarioSpec(
            name=str(d.get("name", Path(str(path)).stem)),
            horizon=_pair(d.get("horizon"), "horizon", path) or (2019, 2030),
            mode=Mode(mode),
            shocks=shocks,
            overrides={str(k): float(v) for k, v in (d.get("overrides") or {}).items()},
            solver=SolverConfig.from_dict(d.get("solver")),
            shock_start=int(d["shock_start"]) if d.get("shock_start") is not None else None,
            report_window=_pair(d.get("report_window"), "report_window", path),
            deforestation_target=(float(calib["deforestation_rate"])
                                  if calib.get("deforestation_rate") is not None else None),
        )
    except (ValueError, TypeError) as exc:
        raise ScenarioFileError(str(exc), path=str(path)) from None


def load_scenario(path) -> ScenarioSpec:
    """Read a YAML scenario file.

    Raises:
        ScenarioFileError: unreadable file, bad YAML or invalid content.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioFileError(f"cannot read scenario file: {exc}", path=str(path)) from None
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioFileError(f"invalid YAML: {exc}", path=str(path)) from None
    return scenario_from_dict(tree, path)


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    shocks = []
    for w in spec.shocks:
        entry = {"commodity": w.commodity, "destination": w.destination.value}
        if w.mode is WedgeMode.SOLVE_FOR_CAP:
            entry["cap"] = w.target_share
        else:
            entry["wedge"] = w.wedge
        shocks.append(entry)
    out = {
        "name": spec.name,
        "mode": spec.mode.value,
        "horizon": {"start": spec.horizon[0], "end": spec.horizon[1]},
        "shock_start": spec.shock_start,
        "shocks": shocks,
        "overrides": dict(spec.overrides),
        "solver": {"tolerance": spec.solver.tolerance, "max_iterations": spec.solver.max_iterations,
                   "damping": spec.solver.damping, "jacobian_mode": spec.solver.jacobian_mode.value},
    }
    if spec.report_window:
        out["report_window"] = {"start": spec.report_window[0], "end": spec.report_window[1]}
    if spec.deforestation_target is not None:
        out["calibration"] = {"deforestation_rate": spec.deforestation_target}
    return out
