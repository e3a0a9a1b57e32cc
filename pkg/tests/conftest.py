import sys

import numpy as np
import pytest

from forbidlab.eigensolve import EigenPair, assemble, eigenpairs_near
from forbidlab.geometry import TorusDomain, two_bump_scene


def synthetic_pair(field, domain, h=0.1, E_h=1.0):
    return EigenPair(h, E_h, np.asarray(field, float), 0.0, domain, E_h)


@pytest.fixture(scope="session")
def tb_scene():
    return two_bump_scene(256)


@pytest.fixture(scope="session")
def tb_pair_005(tb_scene):
    op = assemble(tb_scene.domain, tb_scene.potential, 0.05, tb_scene.energy)
    return eigenpairs_near(op, 1.0, 1, tol=1e-8)[0]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
