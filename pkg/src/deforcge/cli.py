"""Command-line entry point.

Subcommands: ``shares``, ``sam split``, ``calibrate``, ``run``,
``sensitivity``, ``report`` and ``validate``. Data goes to files (or
stdout); progress and diagnostics go to stderr. Module errors exit with
status 1 and a JSON error record on stderr, usage errors with status 2.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import data, landshare
from .cge import system as S
from .errors import DeforcgeError, ScenarioFileError
from .sam import Partner, check_balance, disaggregate_accounts, load_sam, save_sam
from .solver.newton import solve_period

log = logging.getLogger("deforcge")

COVERED_DEFAULT = ("crop", "lvst", "fore", "oilm", "meat")


class UsageError(Exception):
    """Bad command-line usage (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass(frozen=True)
class RunManifest:
    """What a run read and where it wrote, with a content-derived id."""

    inputs: dict
    scenario: str | None
    out: str
    run_id: str

    @classmethod
    def build(cls, inputs: dict, scenario, out, extra: str = "") -> "RunManifest":
        h = hashlib.sha256()
        for key in sorted(inputs):
            h.update(key.encode())
            h.update(Path(inputs[key]).read_bytes())
        if scenario:
            h.update(Path(scenario).read_bytes())
        h.update(extra.encode())
        return cls(dict(inputs), str(scenario) if scenario else None, str(out), h.hexdigest()[:16])


def _window(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError("window must look like START:END") from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _input_flags(p):
    p.add_argument("--sam", help="disaggregated SAM (default: bundled)")
    p.add_argument("--data-dir", help="directory holding the other input files (default: bundled)")


def _output_flags(p, window=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp line from CSV outputs")
    if window:
        p.add_argument("--window", type=_window, help="report window START:END")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deforcge", description="CGE engine for deforestation-linked export restrictions")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("shares", help="compute non-compliant shares from land-use data")
    for name in ("transitions", "landuse", "census", "crop-map", "sources", "linkage"):
        p.add_argument(f"--{name}", help=f"{name} CSV (default: bundled)")
    p.add_argument("--cutoff", default="2021,2022", help="comma-separated post-cutoff years")
    p.add_argument("--out", help="output CSV (default: stdout)")

    p = sub.add_parser("sam", help="SAM operations")
    sam_sub = p.add_subparsers(dest="sam_command", parser_class=_Parser)
    ps = sam_sub.add_parser("split", help="split accounts into compliant and non-compliant twins")
    ps.add_argument("--sam", help="aggregate SAM (default: bundled)")
    ps.add_argument("--shares", help="share table CSV (default: bundled)")
    ps.add_argument("--linkage", help="linkage CSV (default: bundled)")
    ps.add_argument("--out", required=True, help="output SAM CSV")

    p = sub.add_parser("calibrate", help="calibrate and write a parameter bundle")
    _input_flags(p)
    p.add_argument("--scenario", help="scenario file with calibration targets")
    p.add_argument("--tolerance", type=_positive_float, help="solver tolerance")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="run baseline and scenario, write trajectories and reports")
    _input_flags(p)
    p.add_argument("--scenario", help="scenario file (default: bundled EUDR scenario)")
    p.add_argument("--tolerance", type=_positive_float, help="solver tolerance")
    _output_flags(p)

    p = sub.add_parser("sensitivity", help="run the elasticity sensitivity suite")
    _input_flags(p)
    p.add_argument("--scenario", help="scenario file (default: bundled EUDR scenario)")
    p.add_argument("--tolerance", type=_positive_float, help="solver tolerance")
    p.add_argument("--jobs", type=_positive_int, help="parallel scenario runs (default: CPU count)")
    _output_flags(p)

    p = sub.add_parser("report", help="re-render reports from stored trajectories")
    p.add_argument("--from", dest="source", required=True, help="directory written by 'run'")
    _output_flags(p)

    p = sub.add_parser("validate", help="check SAM balance and lint inputs")
    _input_flags(p)
    p.add_argument("--scenario", help="scenario file to lint")
    p.add_argument("--tolerance", type=_positive_float, default=1e-7, help="balance tolerance")
    return parser


# --------------------------------------------------------------------------
# helpers


def _data_file(args, name: str) -> Path:
    base = Path(args.data_dir) if getattr(args, "data_dir", None) else data.DATA_DIR
    return base / name


def _input_paths(args) -> dict:
    return {
        "sam": str(Path(args.sam) if args.sam else _data_file(args, "sam.csv")),
        "elasticities": str(_data_file(args, "elasticities.csv")),
        "va_elasticities": str(_data_file(args, "va_elasticities.csv")),
        "factors": str(_data_file(args, "factors.yaml")),
        "projections": str(_data_file(args, "projections.csv")),
        "coefficients": str(_data_file(args, "emission_coefficients.csv")),
    }


def _check_paths(paths: dict):
    for key, p in paths.items():
        if not Path(p).is_file():
            raise UsageError(f"{key} file not found: {p}")


def _scenario(args):
    from .scenario.spec import load_scenario

    path = args.scenario or str(data.path("eudr.yaml"))
    if not Path(path).is_file():
        raise UsageError(f"scenario file not found: {path}")
    spec = load_scenario(path)
    if getattr(args, "tolerance", None):
        spec = replace(spec, solver=replace(spec.solver, tolerance=args.tolerance))
    return spec, path


def _prepare(args):
    from .scenario.inputs import calibrate_baseline, load_inputs
    from .scenario.shock import CapPinnedWarning, build_eudr_shock
    from .scenario.spec import Mode, WedgeMode

    paths = _input_paths(args)
    _check_paths(paths)
    spec, spec_path = _scenario(args)
    inputs = load_inputs(**paths)
    t0 = time.perf_counter()
    cal = calibrate_baseline(inputs, spec)
    log.info("baseline calibrated in %.2f s", time.perf_counter() - t0)
    if spec.mode is Mode.COUNTERFACTUAL:
        caps = [w for w in spec.shocks if w.mode is WedgeMode.SOLVE_FOR_CAP]
        if caps:
            # resolve reference-year wedges for the capped flows (reported; caps are enforced every year)
            fixed = [w.wedge for w in spec.shocks if w.mode is WedgeMode.FIXED and w.destination is Partner.EU]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", CapPinnedWarning)
                resolved = {w.commodity: w for w in build_eudr_shock(
                    cal.params, [w.commodity for w in caps], max(fixed, default=0.0), caps[0].target_share,
                    spec.solver, pin_unreachable=True) if w.mode is WedgeMode.SOLVE_FOR_CAP}
            shocks = tuple(resolved.get(w.commodity, w) if w.mode is WedgeMode.SOLVE_FOR_CAP else w
                           for w in spec.shocks)
            spec = replace(spec, shocks=shocks)
    return inputs, cal, spec, spec_path, paths


def _mkdir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {p}: {exc}") from None
    if not os.access(p, os.W_OK):
        raise UsageError(f"output directory is not writable: {p}")
    return p


def _jsonable(o):
    return o.tolist() if hasattr(o, "tolist") else str(o)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _log_checks(checks, prefix: str) -> bool:
    ok = True
    for c in checks:
        log.info("%s %s: %s (%s)", prefix, "PASS" if c.passed else "FAIL", c.name, c.detail)
        ok &= c.passed
    return ok


def _write_checks(path: Path, checks, notes=()):
    with path.open("w", encoding="utf-8") as fh:
        for c in checks:
            fh.write(f"{'PASS' if c.passed else 'FAIL'}\t{c.name}\t{c.detail}\n")
        for note in notes:
            fh.write(f"NOTE\t{note}\n")


# --------------------------------------------------------------------------
# commands


def cmd_shares(args) -> int:
    def pick(flag, name):
        return Path(flag) if flag else data.path(name)

    try:
        cutoff = tuple(int(y) for y in args.cutoff.split(","))
    except ValueError:
        raise UsageError("--cutoff must be comma-separated years") from None
    transitions = landshare.read_transitions(pick(args.transitions, "transitions.csv"))
    landuse = landshare.read_landuse(pick(args.landuse, "landuse.csv"))
    census = landshare.read_census(pick(args.census, "census.csv"))
    crop_map = {r["crop"]: r["activity"] for r in landshare._rows(pick(args.crop_map, "crop_map.csv"))}
    sources = {r["account"]: r["source"] for r in landshare._rows(pick(args.sources, "account_sources.csv"))}
    linkage = landshare.read_linkage(pick(args.linkage, "linkage.csv"))
    shares = landshare.sam_share_table(transitions, landuse, census, crop_map, sources, linkage, cutoff)
    if args.out:
        landshare.write_shares(shares, args.out)
    else:
        sys.stdout.write("account,share\n")
        for k in sorted(shares):
            sys.stdout.write(f"{k},{shares[k]!r}\n")
    return 0


def cmd_sam_split(args) -> int:
    sam = load_sam(args.sam or data.path("sam_aggregate.csv"))
    shares = landshare.read_shares(args.shares or data.path("shares.csv"))
    linkage = landshare.read_linkage(args.linkage or data.path("linkage.csv"))
    split = disaggregate_accounts(sam, shares, linkage, indirect=linkage.keys())
    save_sam(split, args.out)
    report = check_balance(split, 1e-7)
    log.info("split SAM written to %s (max relative imbalance %.3e)", args.out, report.max_relative_imbalance)
    return 0


def cmd_calibrate(args) -> int:
    out = _mkdir(args.out)
    inputs, cal, spec, spec_path, paths = _prepare(args)
    P = cal.params
    eq = solve_period(P, S.base_inputs(P), spec.solver)
    bundle = {
        "land_supply_elasticity": cal.mu,
        "tfp_path": {str(y): v for y, v in sorted(cal.tfp_path.items())},
        "base_residual": eq.residual_norm,
        "base_walras": eq.walras,
        "accounts": [a.name for a in P.accounts],
        "activities": list(P.activities),
        "commodities": list(P.commodities),
        "lands": list(P.lands),
        "value_added_elasticity": {a: float(v) for a, v in zip(P.activities, P.va_sigma)},
        "armington_elasticity": {c: float(v) for c, v in zip(P.commodities, P.arm_sigma)},
        "cet_elasticity": {c: float(v) for c, v in zip(P.commodities, P.cet_sigma)},
        "destination_cet_elasticity": {c: float(v) for c, v in zip(P.commodities, P.dest_sigma)},
        "elasticity_source": dict(P.elasticity_source),
    }
    _write_json(out / "parameters.json", bundle)
    _write_json(out / "run_manifest.json", asdict(RunManifest.build(paths, spec_path, out)))
    log.info("parameters written to %s", out / "parameters.json")
    return 0


def _render(base, scen, window, out: Path, timestamp: bool, sam=None):
    from .scenario.coverage import coverage_summary, write_coverage
    from .scenario.report import deviation_report, sign_checks, write_report

    report = deviation_report(base, scen, window)
    write_report(report, out, timestamp)
    if sam is not None:
        write_coverage(coverage_summary(sam), out / "coverage.csv")
    checks = sign_checks(report)
    _write_checks(out / "sign_checks.tsv", checks)
    return report, checks


def cmd_run(args) -> int:
    from .scenario.spec import Mode
    from .scenario.trajectory import run_trajectory, save_trajectory

    out = _mkdir(args.out)
    inputs, cal, spec, spec_path, paths = _prepare(args)
    window = args.window or spec.report_window or (2025, 2030)
    base = run_trajectory(spec.baseline(), cal.params, inputs.projections, inputs.coefficients,
                          tfp_path=cal.tfp_path)
    scen = base
    if spec.mode is Mode.COUNTERFACTUAL:
        scen = run_trajectory(spec, cal.params, inputs.projections, inputs.coefficients, baseline=base)
    tdir = out / "trajectories"
    save_trajectory(base, tdir / "baseline")
    save_trajectory(scen, tdir / "scenario")
    manifest = asdict(RunManifest.build(paths, spec_path, out, f"{window}"))
    manifest.update(window=list(window), scenario_name=spec.name, land_supply_elasticity=cal.mu)
    _write_json(out / "run_manifest.json", manifest)
    report, checks = _render(base, scen, window, out, not args.no_timestamp, inputs.sam)
    _log_checks(checks, "sign")
    log.info("GDP %.4f%%, EU exports %.4f%%, deforestation %.4f%% over %d-%d", report.value("GDP"),
             report.value("Exports to EU"), report.value("Deforestation (ha)"), *window)
    return 0


def cmd_sensitivity(args) -> int:
    from .scenario.sensitivity import divergence_note, ordering_checks, sensitivity_suite, write_comparison
    from .scenario.trajectory import save_trajectory

    out = _mkdir(args.out)
    inputs, cal, spec, spec_path, paths = _prepare(args)
    window = args.window or spec.report_window or (2025, 2030)
    result = sensitivity_suite(spec.baseline(), spec, cal.params, inputs.projections, inputs.coefficients,
                               cal.tfp_path, window=window, jobs=args.jobs)
    for case, (base, scen) in result.trajectories.items():
        save_trajectory(base, out / "trajectories" / case / "baseline")
        save_trajectory(scen, out / "trajectories" / case / "scenario")
    write_comparison(result, out / "deviations_sensitivity.csv", not args.no_timestamp)
    checks = ordering_checks(result)
    notes = [divergence_note(c) for c in checks if c.name.startswith("export loss") and not c.passed]
    _write_checks(out / "sensitivity_checks.tsv", checks, notes)
    _log_checks(checks, "ordering")
    for note in notes:
        log.info("%s", note)
    manifest = asdict(RunManifest.build(paths, spec_path, out, f"{window}"))
    manifest.update(window=list(window), cases=sorted(result.trajectories), failures=result.failures,
                    land_supply_elasticity=cal.mu)
    _write_json(out / "run_manifest.json", manifest)
    log.info("sensitivity suite finished in %.1f s", result.seconds)
    return 1 if result.failures else 0


def cmd_report(args) -> int:
    from .scenario.trajectory import load_trajectory

    src = Path(args.source)
    manifest_path = src / "run_manifest.json"
    if not manifest_path.is_file():
        raise UsageError(f"no run manifest in {src}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    base = load_trajectory(src / "trajectories" / "baseline")
    scen = load_trajectory(src / "trajectories" / "scenario")
    window = args.window or tuple(manifest.get("window") or (2025, 2030))
    out = _mkdir(args.out)
    sam_path = manifest.get("inputs", {}).get("sam")
    sam = load_sam(sam_path) if sam_path and Path(sam_path).is_file() else None
    _render(base, scen, window, out, not args.no_timestamp, sam)
    return 0


def cmd_validate(args) -> int:
    from .scenario.coverage import coverage_summary
    from .solver.calibration import calibrate, load_elasticities, load_factor_data

    paths = _input_paths(args)
    _check_paths(paths)
    sam = load_sam(paths["sam"])
    report = check_balance(sam, args.tolerance)
    status = "balanced" if report.balanced else "unbalanced"
    print(f"{status}: {len(sam.names)} accounts, max relative imbalance {report.max_relative_imbalance:.3e}")
    if not report.balanced:
        for name, gap in report.worst(5):
            print(f"  {name}: {gap:.6g}")
        return 1
    params = calibrate(sam, load_elasticities(paths["elasticities"], paths["va_elasticities"]),
                       load_factor_data(paths["factors"]))
    eq = solve_period(params, S.base_inputs(params))
    print(f"calibration: base residual {eq.residual_norm:.3e}, Walras {eq.walras:.3e}")
    cov = coverage_summary(sam).formatted()
    print(f"coverage: EU exports compliant {cov['compliant']}, non-compliant {cov['noncompliant']} "
          f"({cov['ratio']}%)")
    if args.scenario:
        spec, _ = _scenario(args)
        for w in spec.shocks:
            if w.commodity not in params.commodities:
                raise ScenarioFileError(f"shock on unknown commodity {w.commodity!r}", path=args.scenario)
        print(f"scenario {spec.name}: {len(spec.shocks)} shocks, horizon {spec.horizon[0]}-{spec.horizon[1]}")
    return 0


COMMANDS = {
    "shares": cmd_shares,
    "calibrate": cmd_calibrate,
    "run": cmd_run,
    "sensitivity": cmd_sensitivity,
    "report": cmd_report,
    "validate": cmd_validate,
}


def _configure_logging():
    level = os.environ.get("DEFORCGE_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def cmd_dispatch(argv=None) -> int:
    """Parse ``argv`` and run the command; returns the exit status."""
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            raise UsageError("a subcommand is required")
        if args.command == "sam":
            if args.sam_command != "split":
                raise UsageError("usage: deforcge sam split --out FILE [...]")
            return cmd_sam_split(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 2
    except DeforcgeError as exc:
        sys.stderr.write(json.dumps(exc.record(), sort_keys=True) + "\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(cmd_dispatch())


if __name__ == "__main__":
    main()
