"""Shared fixtures.  The wave families are expensive, so they are built once per session."""

import time

import numpy as np
import pytest

from unidecay.applications import (bidomain_family, bidomain_problem, nagumo_problem, rd_family)
from unidecay.envelope import build_ingredients, simple_zero_envelope, uniform_envelope

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}
# fixture name -> seconds spent building it (the runtime criteria include these)
TIMINGS = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line("criterion %2d: %s  %s" % (k, "PASS" if ok else "FAIL", detail))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


def _timed(name, build, *args):
    t0 = time.perf_counter()
    out = build(*args)
    TIMINGS[name] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def rd_problem():
    return nagumo_problem()


@pytest.fixture(scope="session")
def rd_fam(rd_problem):
    return _timed("rd_fam", rd_family, rd_problem)


@pytest.fixture(scope="session")
def rd_ingredients(rd_fam):
    return _timed("rd_ingredients", build_ingredients, rd_fam, rd_fam.metadata["nu"])


@pytest.fixture(scope="session")
def rd_envelope(rd_ingredients):
    return _timed("rd_envelope", uniform_envelope, rd_ingredients, 0.5)


@pytest.fixture(scope="session")
def bd_problem():
    return bidomain_problem()


@pytest.fixture(scope="session")
def bd_fam(bd_problem):
    return _timed("bd_fam", bidomain_family, bd_problem, "+")


@pytest.fixture(scope="session")
def bd_ingredients(bd_fam):
    return _timed("bd_ingredients", build_ingredients, bd_fam, bd_fam.metadata["nu"])


@pytest.fixture(scope="session")
def bd_envelope(bd_ingredients):
    return _timed("bd_envelope", simple_zero_envelope, bd_ingredients, 0.5)
