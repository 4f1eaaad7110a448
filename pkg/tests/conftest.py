import numpy as np
import pytest

from landau_spectra.landau import LandauModel
from landau_spectra.potentials import AnnulusStep, Gaussian, RadialStep, SectorTile


@pytest.fixture
def model():
    return LandauModel(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def disk():
    return AnnulusStep(0.0, 1.0, 1.0)


@pytest.fixture
def analytic_potentials():
    return [
        AnnulusStep(0.0, 1.0, 1.0),
        RadialStep((0.0, 0.5, 1.2), (2.0, -0.7)),
        Gaussian(1.5, 0.8),
        SectorTile(1.0, 4, {(1, 1): 1.0, (1, 2): -0.5}),
    ]


# -- acceptance reporting ------------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def record():
    """record(criterion, case, passed, detail) for the acceptance summary."""
    def _record(criterion, case, passed, detail=""):
        ACCEPTANCE.setdefault(criterion, []).append((case, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        cases = ACCEPTANCE[crit]
        ok = sum(p for _, p, _ in cases)
        status = "PASS" if ok == len(cases) else "FAIL"
        tr.write_line(f"criterion {crit}: {status} ({ok}/{len(cases)} cases)")
        for case, passed, detail in cases:
            if not passed or len(cases) > 1:
                tr.write_line(f"    {'pass' if passed else 'FAIL'}  {case}  {detail}")
