from __future__ import annotations

import numpy as np
import pytest

from junctionlab.dnmap import split_dn
from junctionlab.geometry import EssentialInterval
from junctionlab.intermediate import IntermediateDN, intermediate_eigenvalues
from junctionlab.presets import asymmetric_junction, printed_model_dn, symmetric_junction
from junctionlab.spectral import rectangle_eigendata

DELTA = (4.2, 5.8)
LAM_CUT = 40.0
L_MAX = 8
# Thermal window around the Fermi level; holds both intermediate eigenvalues of the asymmetric junction.
WINDOW = EssentialInterval(Lambda=5.0, half_width=0.3, delta=DELTA)

ACCEPTANCE_LINES: list[str] = []


class Pipeline:
    def __init__(self, junction, delta=DELTA, lam_cut=LAM_CUT, l_max=L_MAX):
        self.junction = junction
        self.eigendata = rectangle_eigendata(junction, lam_cut, l_max)
        self.rdn = split_dn(self.eigendata, delta, lam_cut)
        self.idn = IntermediateDN(self.rdn)
        self.eigen = intermediate_eigenvalues(self.idn)


@pytest.fixture(scope="session")
def asym():
    return Pipeline(asymmetric_junction())


@pytest.fixture(scope="session")
def printed():
    idn = IntermediateDN(printed_model_dn())
    return idn, intermediate_eigenvalues(idn)


@pytest.fixture(scope="session")
def sym_junction():
    return symmetric_junction()


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
