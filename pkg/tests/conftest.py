import math

import numpy as np
import pytest

from wfrsmc.core import vp_schedule
from wfrsmc.models import FieldSet, GaussianMixtureModel


@pytest.fixture
def equal_pair():
    """N(0,1) and N(2,1) under the VP schedule."""
    return FieldSet(GaussianMixtureModel.gaussian(0.0), GaussianMixtureModel.gaussian(2.0), vp_schedule())


@pytest.fixture
def unequal_pair():
    """N(0,1) and N(2,0.25): the geometric potential varies in x."""
    return FieldSet(GaussianMixtureModel.gaussian(0.0), GaussianMixtureModel.gaussian(2.0, 0.25), vp_schedule())


class FrozenFields:
    """Two fixed densities with no noising drift and unit noise level.

    Scores do not change with time, which isolates the potential algebra
    from the schedule.
    """

    def __init__(self, m1, m2, sigma=1.0):
        self.m1, self.m2, self._sigma = m1, m2, sigma

    @property
    def dim(self):
        return self.m1.dim

    def sigma(self, t):
        return self._sigma

    def f(self, t, x):
        return np.zeros_like(x)

    def evaluate(self, t, pts):
        s1, d1, l1 = self.m1.evaluate(pts)
        s2, d2, l2 = self.m2.evaluate(pts)
        return s1, s2, d1, d2, l1, l2


@pytest.fixture
def frozen_equal_pair():
    return FrozenFields(GaussianMixtureModel.gaussian(0.0), GaussianMixtureModel.gaussian(2.0))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Record one ``(criterion, passed, detail)`` line for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
