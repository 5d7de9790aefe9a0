import dataclasses

import pytest

from deforcge import data
from deforcge.sam import load_sam
from deforcge.scenario import (
    build_eudr_shock,
    calibrate_baseline,
    load_inputs,
    load_scenario,
    run_trajectory,
)
from deforcge.solver.calibration import calibrate, load_elasticities, load_factor_data

COVERED = ("crop", "lvst", "fore", "oilm", "meat")


@pytest.fixture(scope="session")
def bundled_sam():
    return load_sam(data.path("sam.csv"))


@pytest.fixture(scope="session")
def params(bundled_sam):
    """Parameters at the factor-file land-supply elasticity (no dynamics calibration)."""
    return calibrate(
        bundled_sam,
        load_elasticities(data.path("elasticities.csv"), data.path("va_elasticities.csv")),
        load_factor_data(data.path("factors.yaml")),
    )


@pytest.fixture(scope="session")
def inputs():
    return load_inputs()


@pytest.fixture(scope="session")
def eudr_spec():
    return load_scenario(data.path("eudr.yaml"))


@pytest.fixture(scope="session")
def calibrated(inputs, eudr_spec):
    """Baseline with calibrated land-supply elasticity and TFP path."""
    return calibrate_baseline(inputs, eudr_spec)


@pytest.fixture(scope="session")
def shocked_spec(calibrated, eudr_spec):
    shocks = build_eudr_shock(calibrated.params, COVERED, 0.06, 0.01, eudr_spec.solver)
    return dataclasses.replace(eudr_spec, shocks=tuple(shocks))


@pytest.fixture(scope="session")
def central(inputs, calibrated, shocked_spec):
    """(baseline, EUDR) trajectories on the calibrated bundled model."""
    base = run_trajectory(shocked_spec.baseline(), calibrated.params, inputs.projections, inputs.coefficients,
                          tfp_path=calibrated.tfp_path)
    scen = run_trajectory(shocked_spec, calibrated.params, inputs.projections, inputs.coefficients, baseline=base)
    return base, scen


# ---------------------------------------------------------------------------
# acceptance verdicts, printed as one line per criterion after the run

ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 12


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def verdict(request):
    """Record ``(criterion, passed, detail)`` for the acceptance summary."""

    def record(number: int, passed: bool, detail: str) -> bool:
        request.config.stash[ACCEPTANCE][number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        passed, detail = results.get(n, (False, "not evaluated"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
