"""Seeded test problems: random sectorial matrices and families with a semisimple zero."""

from dataclasses import replace
import math

import numpy as np

from .operator_core import GeneratorModel, polynomial_family

__all__ = ["random_sectorial", "random_semisimple_zero", "diagonal_family", "nonnormal_family",
           "double_zero_family", "fixture_families"]


def _similarity(rng, n, spread=0.3):
    return np.eye(n) + spread * rng.standard_normal((n, n)) / math.sqrt(n)


def random_sectorial(count=20, seed=7, n_max=8):
    """Matrices S diag(lam) S^{-1} with spectrum in a left sector, n in [2, n_max]."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(2, n_max + 1))
        re = -rng.uniform(0.2, 4.0, n)
        im = rng.uniform(-1.0, 1.0, n) * np.abs(re)
        s = _similarity(rng, n)
        a = s @ np.diag(re + 1j * im) @ np.linalg.inv(s)
        out.append(GeneratorModel(a, "sectorial-%d" % i, "random"))
    return out


def random_semisimple_zero(count=20, seed=11, n_max=8):
    """Matrices with a semisimple zero eigenvalue of multiplicity 1 to 3 and gap >= 0.5."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(3, n_max + 1))
        m = int(rng.integers(1, min(3, n - 1) + 1))
        re = -rng.uniform(0.5, 3.0, n - m)
        im = rng.uniform(-0.5, 0.5, n - m)
        lam = np.concatenate([np.zeros(m), re + 1j * im])
        s = _similarity(rng, n)
        a = s @ np.diag(lam) @ np.linalg.inv(s)
        out.append(GeneratorModel(a, "semisimple-%d-m%d" % (i, m), "random", {"multiplicity": m}))
    return out


def diagonal_family():
    """A = diag(0, -1, -2), E(alpha) = -alpha I: q1 = 1, M1 = 1 exactly, simple zero."""
    base = GeneratorModel(np.diag([0.0, -1.0, -2.0]), "diag(0,-1,-2)", "fixture")
    fam = polynomial_family(base, [-np.eye(3)], q1=1.0, label="diagonal")
    return replace(fam, M1=1.0, ell=1.0, metadata={"nu": 0.9})


def nonnormal_family(seed=3, n=6):
    """A mildly non-normal 6x6 family with a simple zero and E(alpha) = alpha W1 + alpha^2 W2.

    W1 = -I + K with K skew (so W1 does not commute with A), W2 negative
    semidefinite; q1 = 1/2, M1 sampled (resolvent_family_bound_check), nu = 0.45.
    """
    rng = np.random.default_rng(seed)
    lam = np.concatenate([[0.0], -np.linspace(0.5, 2.5, n - 1)])
    s = _similarity(rng, n, 0.2)
    a = s @ np.diag(lam) @ np.linalg.inv(s)
    g = rng.standard_normal((n, n))
    w1 = -np.eye(n) + 0.5 * (g - g.T) / math.sqrt(n)
    w = rng.standard_normal((n, n))
    w2 = -0.1 * (w @ w.T) / n
    fam = polynomial_family(GeneratorModel(a, "nonnormal-6", "fixture"), [w1, w2],
                            q1=0.5, q2=1.0, label="nonnormal")
    return _sampled_m1(fam, 0.45)


def _sampled_m1(fam, nu):
    from .validator import resolvent_family_bound_check

    chk = resolvent_family_bound_check(fam, np.geomspace(1e-4, 1.0, 8))
    return replace(fam, M1=chk.M1, metadata={"nu": nu, "M1_witness": [chk.witness[0], str(chk.witness[1])]})


def double_zero_family(seed=5, n=5):
    """Double semisimple zero, E(alpha) = -alpha I; M1 sampled, nu = 0.9."""
    rng = np.random.default_rng(seed)
    lam = np.array([0.0, 0.0] + list(-np.linspace(1.0, 2.0, n - 2)))
    s = _similarity(rng, n, 0.2)
    a = s @ np.diag(lam) @ np.linalg.inv(s)
    w0 = -np.eye(n)
    fam = polynomial_family(GeneratorModel(a, "double-zero-5", "fixture"), [w0], q1=1.0,
                            label="double-zero")
    return _sampled_m1(fam, 0.9)


def fixture_families():
    """The families used by the decomposition sweeps, each with its nu."""
    return [diagonal_family(), nonnormal_family(), double_zero_family()]
