import numpy as np
import pytest

from helpers import ACCEPTANCE
from oscone import membership


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def _min_cone_failures():
    bad = []
    for u, eps in membership.logged_members():
        if u.left.is_dual or u.right.is_dual:
            continue
        shifted = u + eps * type(u).unit(u.left, u.right, u.level)
        if not membership.min_cone_membership(shifted, tol=1e-6).is_member:
            bad.append(u)
    return bad


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


def pytest_sessionfinish(session, exitstatus):
    # no element may be both certified in and separated from the maximal cone,
    # and every certified member must be concretely positive
    conflicts = membership.verdict_conflicts()
    bad = _min_cone_failures()
    if conflicts or bad:
        session.exitstatus = 1
        print(f"\nverdict conflicts: {len(conflicts)}; max members outside the min cone: {len(bad)}")
