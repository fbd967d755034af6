"""Empirical checks of envelopes against the matrix-exponential oracle.

Measured norms come from SciPy's ``expm``.  To avoid under/overflow the
weighted norm e^{rate t} ||e^{t A_alpha}|| is computed directly as
||e^{t (A_alpha + rate I)}|| and compared with the envelope in the log domain.

The module also reproduces two small destabilization examples: a 3 x 3
generator with a simple zero eigenvalue that a symmetric negative definite
perturbation pushes into the right half-plane, and the finite s-sections of
the block-multiplication version of the same construction.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .contour import semigroup_via_contour
from .errors import OutOfRange, SpectrumRightOfThreshold
from .operator_core import (SAFETY, TAU_SPEC, family_member, operator_norm,
                            resolvent_norms, semigroup_direct, spectrum, verify_zero_gap)

log = logging.getLogger(__name__)

PASS_TOL = 1e-9
CSV_HEADER = "alpha,t,measured_norm,envelope,ratio"


def default_grids(points=64):
    """alpha in {0} + log-spaced [1e-4, 1e2]; t in {0} + log-spaced [1e-3, 1e2]."""
    alphas = np.concatenate([[0.0], np.geomspace(1e-4, 1e2, points - 1)])
    ts = np.concatenate([[0.0], np.geomspace(1e-3, 1e2, points - 1)])
    return alphas, ts


@dataclass(frozen=True, eq=False)
class ValidationReport:
    rows: np.ndarray          # columns alpha, t, measured, envelope, ratio
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.summary["passed"]

    @property
    def max_ratio(self):
        return self.summary["max_ratio"]

    def violations(self):
        return self.rows[self.rows[:, 4] > 1 + PASS_TOL]

    def csv_text(self):
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(",".join(repr(float(x)) for x in r))
        return "\n".join(lines) + "\n"

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.csv_text())


def _alpha_rows(fam, env, alpha, ts):
    m = family_member(fam, alpha).entries
    n = m.shape[0]
    shift = env.rate(alpha)
    shifted = m + shift * np.eye(n)
    out = np.empty((ts.size, 5))
    for i, t in enumerate(ts):
        w = 1.0 if t == 0 else operator_norm(sla.expm(t * shifted))
        # an underflowed norm is below any positive envelope
        log_meas = math.log(w) - shift * t if w > 0 else -math.inf
        log_env = env.log_value(alpha, t)
        ratio = 0.0 if log_env == math.inf or log_meas == -math.inf else \
            math.exp(min(log_meas - log_env, 700.0))
        out[i] = (alpha, t, math.exp(min(log_meas, 700.0)),
                  math.inf if log_env > 709.78 else math.exp(log_env), ratio)
    return out


def validate_envelope(fam, env, alpha_grid=None, t_grid=None, threads=None):
    """Rows (alpha, t, ||T_alpha(t)||, envelope, ratio); pass iff every ratio <= 1 + 1e-9."""
    da, dt = default_grids()
    alphas = da if alpha_grid is None else np.asarray(alpha_grid, float)
    ts = dt if t_grid is None else np.asarray(t_grid, float)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            blocks = list(ex.map(lambda a: _alpha_rows(fam, env, float(a), ts), alphas))
    else:
        blocks = [_alpha_rows(fam, env, float(a), ts) for a in alphas]
    rows = np.vstack(blocks)
    j = int(np.argmax(rows[:, 4]))
    summary = {"max_ratio": float(rows[j, 4]), "argmax": {"alpha": float(rows[j, 0]),
                                                           "t": float(rows[j, 1])},
               "passed": bool(rows[j, 4] <= 1 + PASS_TOL), "witness": rows[j].tolist(),
               "rows": int(rows.shape[0]), "kappa": env.kappa, "tag": env.tag,
               "grids": {"alpha": [float(alphas.min()), float(alphas.max()), int(alphas.size)],
                         "t": [float(ts.min()), float(ts.max()), int(ts.size)]}}
    return ValidationReport(rows, summary)


def crosscheck_semigroup(gen, cert, t_grid, tol=1e-10, variant="vertex", mu=None):
    """Max over t of ||contour - expm|| / ||expm||."""
    worst = 0.0
    for t in t_grid:
        if t == 0:
            continue
        direct = semigroup_direct(gen, t).value
        res = semigroup_via_contour(gen, cert, float(t), variant=variant, mu=mu, tol=tol)
        dev = operator_norm(res.value.value - direct) / max(operator_norm(direct), 1e-300)
        worst = max(worst, dev)
    return worst


# ---------------------------------------------------------------------------
# Resolvent bound along the family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolventFamilyBound:
    M1: float
    sampled: float
    witness: tuple
    samples: int

    def __float__(self):
        return self.M1


def resolvent_family_bound_check(fam, alpha_grid=None, lam_spec=None):
    """M1 = 1.05 max (Re lam + q(alpha)) ||R(lam, A_alpha)|| over Re lam > -q(alpha)."""
    spec = lam_spec or {}
    grid = np.geomspace(1e-4, 1e2, 12) if alpha_grid is None else np.asarray(alpha_grid, float)
    grid = grid[grid > 0]
    nx, ns = spec.get("x_points", 17), spec.get("s_points", 30)
    best, witness, count = 0.0, None, 0
    for alpha in grid:
        m = family_member(fam, float(alpha)).entries
        qa = fam.q(alpha)
        vals = spectrum(m).values
        tol = TAU_SPEC * max(np.linalg.norm(m, 2), 1.0)
        if np.max(vals.real) > -qa + tol:
            raise SpectrumRightOfThreshold("spectrum of A_alpha lies right of -q(alpha)",
                                           alpha=float(alpha), q=qa,
                                           eigenvalue=complex(vals[np.argmax(vals.real)]))
        scale = max(np.linalg.norm(m, 2), 1.0)
        xs = np.geomspace(1e-3 * max(qa, 1e-3), 10 * scale, nx)
        s = np.geomspace(1e-3, 1e1, ns) * scale
        s = np.unique(np.concatenate([-s, [0.0], s, vals.imag]))
        lam = (-qa + xs[:, None] + 1j * s[None, :]).ravel()
        w = (lam.real + qa) * resolvent_norms(m, lam)
        count += lam.size
        j = int(np.argmax(w))
        if w[j] > best:
            best, witness = float(w[j]), (float(alpha), complex(lam[j]))
    return ResolventFamilyBound(SAFETY * best, best, witness, count)


# ---------------------------------------------------------------------------
# Destabilization examples
# ---------------------------------------------------------------------------

B0_LO, B0_HI = -0.5, (1 - math.sqrt(2)) / 2


def _check_b0(b0):
    if not (B0_LO < b0 < B0_HI):
        raise OutOfRange("b0 must lie in (-1/2, (1 - sqrt 2)/2)", b0=b0, interval=[B0_LO, B0_HI])


def example_matrices(b0):
    """J0, Z0, b1, A0, W0 and the eigen-data of J0 - Z0."""
    _check_b0(b0)
    j0 = np.array([[0.0, 1.0], [0.0, 0.0]])
    z0 = np.array([[1.0, b0], [b0, 0.25]])
    m0 = float(np.linalg.eigvalsh(z0)[0])       # min of |Z0^{1/2} x|^2 over unit x
    ev = np.sort(np.linalg.eigvals(j0 - z0).real)
    mu_s, lam_s = float(ev[0]), float(ev[1])
    b1 = 0.25 * min(lam_s, m0)
    a0 = np.array([[-b1, 1.0, 0.0], [0.0, -b1, 0.0], [0.0, 0.0, 0.0]])
    w0 = np.array([[b1 - 1.0, -b0, 0.0], [-b0, b1 - 0.25, 0.0], [0.0, 0.0, -1.0]])
    return {"J0": j0, "Z0": z0, "m0": m0, "mu_star": mu_s, "lambda_star": lam_s, "b1": b1,
            "A0": a0, "W0": w0}


@dataclass(frozen=True)
class DestabilizationReport:
    b0: float
    Z0_posdef: bool
    m0: float
    lambda_star: float
    mu_star: float
    b1: float
    spectrum_A0: tuple
    zero_simple: bool
    gap: float
    AP0_norm: float
    W0_symmetric: bool
    W0_max_eig: float
    W0_negdef: bool
    max_re_perturbed: float
    printed_roots: tuple
    corrected_roots: tuple

    def to_dict(self):
        d = dict(self.__dict__)
        d["spectrum_A0"] = [[z.real, z.imag] for z in self.spectrum_A0]
        return d


def destabilization_example(b0):
    """A0 has a simple zero and gap b1; the negative definite W0 still destabilizes A0 + W0."""
    m = example_matrices(b0)
    z0, a0, w0 = m["Z0"], m["A0"], m["W0"]
    zpos = bool(np.linalg.eigvalsh(z0)[0] > 0)
    rep = verify_zero_gap(a0, m["b1"])
    w_sym = bool(np.array_equal(w0, w0.T))
    w_max = float(np.linalg.eigvalsh(0.5 * (w0 + w0.T))[-1])
    pert = spectrum(a0 + w0).abscissa
    disc = 1 + 4 * b0 - 4 * b0 ** 2
    printed = tuple(-5 / 8 + sg * math.sqrt(25 / 64 - disc) if 25 / 64 - disc >= 0 else math.nan
                    for sg in (-1, 1))
    corrected = tuple(-5 / 8 + sg * math.sqrt(25 / 64 - disc / 4) for sg in (-1, 1))
    return DestabilizationReport(float(b0), zpos, m["m0"], m["lambda_star"], m["mu_star"],
                                 m["b1"], tuple(complex(v) for v in spectrum(a0).values),
                                 bool(rep.semisimple and rep.kernel_dim == 1), -rep.max_nonzero_real,
                                 rep.AP0_norm, w_sym, w_max, bool(w_max < -1e-6), float(pert),
                                 printed, corrected)


@dataclass(frozen=True)
class SweepReport:
    b0: float
    s_samples: int
    unperturbed_hull: tuple        # real parts of sigma(s (J0 - b1 I)), s in [1, 2]
    positive_hull: tuple           # positive eigenvalues of s (J0 - Z0)
    negative_hull: tuple           # negative eigenvalues of s (J0 - Z0)
    expected_positive: tuple
    expected_negative: tuple
    printed_negative: tuple
    section_abscissa: float        # spectral abscissa of the perturbed s-section operator
    zero_simple: bool

    def to_dict(self):
        return dict(self.__dict__)


def multiplication_sweep(b0, s_samples=33):
    """Hulls of the spectra of s (J0 - b1 I) and s (J0 - Z0) over sampled s in [1, 2]."""
    if s_samples < 2:
        raise ValueError("need at least two s samples")
    m = example_matrices(b0)
    j0, z0, b1 = m["J0"], m["Z0"], m["b1"]
    ss = np.linspace(1.0, 2.0, s_samples)
    unpert = np.concatenate([np.linalg.eigvals(s * (j0 - b1 * np.eye(2))).real for s in ss])
    pert = np.concatenate([np.linalg.eigvals(s * (j0 - z0)).real for s in ss])
    pos, neg = pert[pert > 0], pert[pert < 0]
    # finite s-section of the block-multiplication operator plus the scalar summand
    n = 2 * s_samples + 1
    a_sec = np.zeros((n, n))
    w_sec = np.zeros((n, n))
    y0 = b1 * np.eye(2) - z0
    for i, s in enumerate(ss):
        a_sec[2 * i:2 * i + 2, 2 * i:2 * i + 2] = s * (j0 - b1 * np.eye(2))
        w_sec[2 * i:2 * i + 2, 2 * i:2 * i + 2] = s * y0
    w_sec[-1, -1] = -1.0
    sec_vals = spectrum(a_sec).values
    zero_simple = int(np.sum(np.abs(sec_vals) < 1e-9)) == 1
    mu_s, lam_s = m["mu_star"], m["lambda_star"]
    return SweepReport(float(b0), int(s_samples), (float(unpert.min()), float(unpert.max())),
                       (float(pos.min()), float(pos.max())), (float(neg.min()), float(neg.max())),
                       (lam_s, 2 * lam_s), (2 * mu_s, mu_s), (-2 * mu_s, -mu_s),
                       float(spectrum(a_sec + w_sec).abscissa), bool(zero_simple))


def destabilizing_family(b0, q1=None):
    """A0 + alpha W0 as a family; it violates the resolvent hypothesis past a crossing."""
    from .operator_core import linear_family

    m = example_matrices(b0)
    q1 = m["b1"] if q1 is None else q1
    return linear_family(m["A0"], m["W0"], q1=q1, label="destabilizing b0=%g" % b0, M1=1.0,
                         ell=1.0)


__all__ = ["default_grids", "ValidationReport", "validate_envelope", "crosscheck_semigroup",
           "ResolventFamilyBound", "resolvent_family_bound_check", "example_matrices",
           "DestabilizationReport", "destabilization_example", "SweepReport",
           "multiplication_sweep", "destabilizing_family", "CSV_HEADER"]
