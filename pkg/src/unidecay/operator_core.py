"""Dense finite-dimensional generators, perturbation families and oracles.

Everything here works on dense complex matrices.  The trusted
matrix-exponential oracle is SciPy's Pade scaling-and-squaring ``expm`` and
the spectrum comes from LAPACK (Hessenberg reduction plus shifted QR); the
contour side of every cross-check is implemented in :mod:`unidecay.contour`.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import NoIsolatedZero, NonConvergence, Overflow, SingularResolvent

log = logging.getLogger(__name__)

TAU_SING = 1e14        # condition-number cutoff for resolvent solves
TAU_SPEC = 1e-8        # relative tolerance for spectral assertions
RANK_TOL = 1e-7        # singular-value threshold for projection ranks
CLUSTER_TOL = 1e-7     # eigenvalue clustering radius, relative to ||A||
SAFETY = 1.05          # factor applied to every sampled supremum
EXPM_CAP = 1e8         # refuse expm when ||tA||_1 exceeds this


def _as_matrix(entries):
    a = np.array(entries, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("generator entries must form a square matrix, got shape %s" % (a.shape,))
    if a.shape[0] < 1:
        raise ValueError("generator dimension must be at least 1")
    if not np.all(np.isfinite(a)):
        raise ValueError("generator entries must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GeneratorModel:
    """An n x n complex matrix designated as a semigroup generator."""

    entries: np.ndarray
    label: str = ""
    provenance: str = "matrix"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_matrix(self.entries))

    @property
    def n(self):
        return self.entries.shape[0]

    @cached_property
    def norm(self):
        return float(np.linalg.norm(self.entries, 2))

    def shifted(self, w, label=None):
        """Return A + w I."""
        return GeneratorModel(self.entries + w * np.eye(self.n), label or self.label,
                              self.provenance, dict(self.metadata))


@dataclass(frozen=True, eq=False)
class OperatorValue:
    """A matrix together with the parameter (lambda or t) that produced it."""

    value: np.ndarray
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.value, dtype=complex)
        if not np.all(np.isfinite(v)):
            raise Overflow("operator value has non-finite entries", context=self.context)
        v.setflags(write=False)
        object.__setattr__(self, "value", v)

    def norm(self):
        return operator_norm(self.value)


def _mat(x):
    if isinstance(x, GeneratorModel):
        return x.entries
    if isinstance(x, OperatorValue):
        return x.value
    return np.asarray(x, dtype=complex)


def operator_norm(op):
    """Spectral norm (largest singular value)."""
    m = _mat(op)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(np.atleast_2d(m), 2))


def resolvent(gen, lam, check=True):
    """(lam I - A)^{-1} by pivoted LU, refusing near-singular shifts."""
    a = _mat(gen)
    n = a.shape[0]
    m = lam * np.eye(n) - a
    anorm = np.linalg.norm(m, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv, info = sla.lapack.zgetrf(m)
        if info > 0:
            raise SingularResolvent("exact zero pivot in lam I - A", lam=lam)
        rcond, _ = sla.lapack.zgecon(lu, anorm, norm="1")
    if rcond == 0.0 or 1.0 / rcond > TAU_SING:
        raise SingularResolvent("lam is numerically in the spectrum",
                                lam=lam, condition=math.inf if rcond == 0 else 1.0 / rcond)
    x = sla.lu_solve((lu, piv), np.eye(n, dtype=complex))
    if check:
        res = np.linalg.norm(m @ x - np.eye(n), 2)
        bound = 1e-10 * np.linalg.norm(x, 2) * np.linalg.norm(m, 2)
        if res > max(bound, 1e-13):
            raise SingularResolvent("resolvent residual above tolerance", lam=lam, residual=res)
    return OperatorValue(x, {"lambda": complex(lam)})


def resolvent_stack(a, lams, chunk=64):
    """Resolvents at many points, batched; yields (slice, stack)."""
    a = _mat(a)
    n = a.shape[0]
    eye = np.eye(n, dtype=complex)
    lams = np.asarray(lams, dtype=complex)
    for start in range(0, lams.size, chunk):
        lz = lams[start:start + chunk]
        mats = lz[:, None, None] * eye - a
        yield slice(start, start + lz.size), np.linalg.solve(mats, np.broadcast_to(eye, mats.shape))


def resolvent_norms(a, lams, chunk=64):
    """||R(lam, A)|| = 1 / sigma_min(lam I - A) for an array of lam."""
    a = _mat(a)
    n = a.shape[0]
    eye = np.eye(n, dtype=complex)
    lams = np.asarray(lams, dtype=complex).ravel()
    out = np.empty(lams.size)
    scale = max(np.linalg.norm(a, 2), 1.0)
    for start in range(0, lams.size, chunk):
        lz = lams[start:start + chunk]
        sv = np.linalg.svd(lz[:, None, None] * eye - a, compute_uv=False)
        smin = sv[:, -1]
        bad = smin <= sv[:, 0] / TAU_SING
        if np.any(bad):
            j = int(np.argmax(bad))
            raise SingularResolvent("sample point is numerically in the spectrum",
                                    lam=complex(lz[j]), sigma_min=float(smin[j]), scale=scale)
        out[start:start + lz.size] = 1.0 / smin
    return out


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with algebraic multiplicities."""

    values: np.ndarray          # every eigenvalue, repeated by multiplicity
    clusters: tuple             # ((representative, multiplicity), ...)
    residual: float             # max ||A v - lam v|| over computed pairs

    @property
    def abscissa(self):
        return float(np.max(self.values.real))

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


def cluster_eigenvalues(values, radius):
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, -values.real))
    used = np.zeros(values.size, bool)
    clusters = []
    for i in order:
        if used[i]:
            continue
        members = np.flatnonzero((~used) & (np.abs(values - values[i]) <= radius))
        used[members] = True
        clusters.append((complex(np.mean(values[members])), int(members.size)))
    return tuple(clusters)


def spectrum(gen):
    """Eigenvalues of the dense matrix via LAPACK's Hessenberg/QR driver."""
    a = _mat(gen)
    try:
        w, v = sla.eig(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NonConvergence("eigen-reduction failed: %s" % exc)
    if not np.all(np.isfinite(w)):
        raise NonConvergence("eigen-reduction produced non-finite eigenvalues")
    anorm = max(np.linalg.norm(a, 2), 1e-300)
    resid = float(np.max(np.linalg.norm(a @ v - v * w, axis=0))) if w.size else 0.0
    if resid > 1e-10 * max(anorm, 1.0):
        raise NonConvergence("eigenpair residual above backward-error tolerance", residual=resid)
    order = np.lexsort((w.imag, -w.real))
    w = w[order]
    w.setflags(write=False)
    return Spectrum(w, cluster_eigenvalues(w, CLUSTER_TOL * max(anorm, 1.0)), resid)


def spectral_abscissa(gen):
    return spectrum(gen).abscissa


def semigroup_direct(gen, t):
    """e^{tA} by scaling and squaring with the [13/13] Pade approximant."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    a = _mat(gen)
    n = a.shape[0]
    if t == 0:
        return OperatorValue(np.eye(n, dtype=complex), {"t": 0.0})
    size = t * np.linalg.norm(a, 1)
    if size > EXPM_CAP:
        raise Overflow("||tA||_1 exceeds the expm safety cap", t=t, norm=size, cap=EXPM_CAP)
    val = sla.expm(t * a)
    if not np.all(np.isfinite(val)):
        raise Overflow("matrix exponential overflowed", t=t)
    return OperatorValue(val, {"t": float(t)})


def weighted_semigroup_norm(a, t, rate):
    """e^{rate t} ||e^{tA}|| computed as ||e^{t(A + rate I)}|| (no under/overflow)."""
    a = _mat(a)
    if t == 0:
        return 1.0
    return operator_norm(sla.expm(t * (a + rate * np.eye(a.shape[0]))))


# ---------------------------------------------------------------------------
# Certified suprema of e^{rho t} ||e^{tC}|| via the Schur-form envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchurEnvelope:
    """||e^{tC}|| <= e^{s t} sum_{k<=d} (||N|| t)^k / k!  (C = Q (D + N) Q^*)."""

    s: float        # spectral abscissa of C
    nnorm: float    # norm of the strictly upper triangular part
    degree: int     # d = n - 1 (0 when N vanishes)

    @classmethod
    def of(cls, c):
        c = _mat(c)
        t, _ = sla.schur(c, output="complex")
        nil = np.triu(t, 1)
        nn = operator_norm(nil)
        s = float(np.max(np.diag(t).real))
        deg = c.shape[0] - 1 if nn > 0 else 0
        return cls(s, nn, deg)

    def _coeffs(self):
        return np.array([self.nnorm ** k / math.factorial(k) for k in range(self.degree + 1)])

    def log_value(self, t, rate=0.0):
        beta = self.s + rate
        if t == 0:
            return 0.0
        c = self._coeffs()
        terms = np.log(c[c > 0]) + np.arange(self.degree + 1)[c > 0] * math.log(t)
        return beta * t + float(np.logaddexp.reduce(terms))

    def value(self, t, rate=0.0):
        return math.exp(min(self.log_value(t, rate), 700.0))

    def decreasing_from(self, rate=0.0):
        """Smallest t_r with the envelope strictly decreasing on (t_r, inf)."""
        beta = self.s + rate
        if beta >= 0:
            raise ValueError("envelope does not decay: s + rate = %g >= 0" % beta)
        if self.degree == 0 or beta + self.nnorm <= 0:
            return 0.0
        c = self._coeffs()
        d = self.degree

        def excess(lt):
            # log of (beta+||N||) sum_{k<d} c_k t^k  minus log of |beta| c_d t^d
            k = np.arange(d)
            lhs = math.log(beta + self.nnorm) + float(np.logaddexp.reduce(np.log(c[:d]) + k * lt))
            rhs = math.log(-beta) + math.log(c[d]) + d * lt
            return lhs - rhs

        lo, hi = -50.0, 0.0
        while excess(hi) > 0:
            hi += 5.0
            if hi > 700:
                raise NonConvergence("could not bracket envelope turning point")
        if excess(lo) <= 0:
            return 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if excess(mid) > 0:
                lo = mid
            else:
                hi = mid
        return math.exp(hi)


@dataclass(frozen=True)
class WeightedSup:
    """Certified value of sup_{t>=0} e^{rate t} ||e^{tC}||."""

    value: float          # SAFETY x max(sampled sup, tail bound)
    sampled: float
    argmax: float
    t_max: float
    tail_bound: float
    grid_points: int

    def __float__(self):
        return self.value

    def to_dict(self):
        return {"value": self.value, "sampled": self.sampled, "argmax": self.argmax,
                "t_max": self.t_max, "tail_bound": self.tail_bound, "grid_points": self.grid_points}


def certified_weighted_sup(c, rate, t_floor=1.0, points=400):
    """sup_{t >= 0} e^{rate t} ||e^{tC}|| with a Schur-envelope tail certificate.

    The grid covers [0, T] with T >= max(2 t_r, t_floor), where the envelope
    is decreasing beyond t_r; T is doubled until the envelope at T is below
    the sampled supremum, so the tail cannot exceed the reported bound.
    """
    c = _mat(c)
    env = SchurEnvelope.of(c)
    t_r = env.decreasing_from(rate)
    t_max = max(2.0 * t_r, t_floor)
    shifted = c + rate * np.eye(c.shape[0])

    def f(t):
        return operator_norm(sla.expm(t * shifted)) if t > 0 else 1.0

    for _ in range(60):
        grid = np.concatenate([[0.0], np.geomspace(t_max * 1e-6, t_max, points)])
        vals = np.array([f(t) for t in grid])
        j = int(np.argmax(vals))
        tail = env.value(t_max, rate)
        if tail <= vals[j]:
            break
        t_max *= 2.0
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid.size - 1)]
    best, arg = vals[j], grid[j]
    if hi > lo:
        res = minimize_scalar(lambda t: -f(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10 * max(hi, 1.0)})
        if -res.fun > best:
            best, arg = -res.fun, float(res.x)
    return WeightedSup(SAFETY * float(max(best, tail)), float(best), float(arg), float(t_max),
                       float(tail), int(grid.size))


# ---------------------------------------------------------------------------
# Perturbation families
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PerturbationFamily:
    """A_alpha = A + E(alpha) with the decay-rate data of the family.

    ``perturb`` is the map alpha -> E(alpha).  The normalized map is
    E0(alpha) = E(alpha)/alpha; at alpha = 0 the supplied ``E0_limit`` is used
    when present, otherwise E0 at ``alpha_min`` (with a warning).
    """

    base: GeneratorModel
    perturb: Callable
    q1: float
    q2: float = math.inf
    q_func: Optional[Callable] = None
    M1: Optional[float] = None
    ell: Optional[float] = None
    r: Optional[Callable] = None
    r_inverse: Optional[Callable] = None
    E0_limit: Optional[np.ndarray] = None
    sup_E0_bound: Optional[float] = None
    alpha_min: float = 1e-8
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def E(self, alpha):
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if alpha == 0:
            return np.zeros((self.base.n, self.base.n), dtype=complex)
        return np.asarray(self.perturb(alpha), dtype=complex)

    def E0(self, alpha):
        if alpha > 0:
            return self.E(alpha) / alpha
        return self.E0_zero

    @cached_property
    def E0_zero(self):
        if self.E0_limit is not None:
            return np.asarray(self.E0_limit, dtype=complex)
        log.warning("no E0(0) limit supplied for %r; using E0(%g)", self.label, self.alpha_min)
        return self.E(self.alpha_min) / self.alpha_min

    def q(self, alpha):
        if self.q_func is not None:
            return float(self.q_func(alpha))
        return self.q1 * float(alpha)

    def rate(self, alpha, kappa):
        return kappa * self.q(alpha)

    def sup_E0(self, grid=None):
        """sup over (0,1] of ||E0(alpha)||: the supplied bound or a sampled value x 1.05."""
        if self.sup_E0_bound is not None:
            return float(self.sup_E0_bound)
        grid = np.geomspace(1e-6, 1.0, 64) if grid is None else grid
        vals = [operator_norm(self.E0(a)) for a in grid]
        vals.append(operator_norm(self.E0_zero))
        return SAFETY * float(max(vals))

    def check_invariants(self, alpha_grid=None):
        """Sampled checks of E(0)=0, bounded E0, monotone q and the modulus r."""
        grid = np.geomspace(1e-6, 1e2, 48) if alpha_grid is None else np.asarray(alpha_grid, float)
        grid = np.unique(grid[grid > 0])
        e_zero = operator_norm(self.E(0.0))
        qs = np.array([self.q(a) for a in grid])
        q_incr = bool(np.all(np.diff(qs) > 0))
        knee = grid[grid <= self.q2]
        q_lin = bool(np.allclose([self.q(a) for a in knee], self.q1 * knee, rtol=1e-12, atol=0))
        small = grid[grid <= 1.0]
        sup_e0 = max([operator_norm(self.E0(a)) for a in small], default=0.0)
        r_ok = None
        if self.r is not None:
            e00 = self.E0_zero
            r_ok = bool(all(operator_norm(self.E0(a) - e00) <= self.r(a) * (1 + 1e-9) + 1e-13
                            for a in grid))
        return {"E_zero_norm": e_zero, "E_zero_ok": e_zero == 0.0, "q_increasing": q_incr,
                "q_linear_below_knee": q_lin, "sup_E0_sampled": sup_e0, "r_ok": r_ok}


def family_member(fam, alpha):
    """A_alpha = A + E(alpha) as a generator (the base itself at alpha = 0)."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return fam.base
    return GeneratorModel(fam.base.entries + fam.E(alpha), "%s[alpha=%g]" % (fam.base.label, alpha),
                          fam.base.provenance, {"alpha": float(alpha)})


def polynomial_family(base, coefficients, q1, q2=math.inf, label="", **kw):
    """E(alpha) = sum_k alpha^k W_k (k >= 1).

    E0(0) = W_1 exactly, sup_{(0,1]} ||E0|| <= sum ||W_k||, and the modulus
    r(alpha) = sum_{k>=2} ||W_k|| alpha^{k-1} is supplied (r = 0 when linear).
    """
    base = base if isinstance(base, GeneratorModel) else GeneratorModel(base)
    ws = [np.array(w, dtype=complex) for w in coefficients]
    norms = [operator_norm(w) for w in ws]

    def perturb(alpha):
        out = np.zeros((base.n, base.n), dtype=complex)
        for k, w in enumerate(ws, start=1):
            out = out + alpha ** k * w
        return out

    higher = norms[1:]
    if any(h > 0 for h in higher):
        def r(alpha):
            return float(sum(h * alpha ** (k + 1) for k, h in enumerate(higher)))
        r_inverse = None
    else:
        def r(alpha):
            return 0.0
        r_inverse = None
    kw.setdefault("sup_E0_bound", float(sum(norms)))
    return PerturbationFamily(base, perturb, q1, q2, r=r, r_inverse=r_inverse,
                              E0_limit=ws[0] if ws else np.zeros((base.n, base.n)),
                              label=label, metadata={"type": "polynomial", "coefficients": ws}, **kw)


def linear_family(base, w, q1, q2=math.inf, label="", **kw):
    """E(alpha) = alpha W."""
    return polynomial_family(base, [w], q1, q2, label=label, **kw)


# ---------------------------------------------------------------------------
# Isolated semisimple zero eigenvalue
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroGapReport:
    semisimple: bool
    gap_ok: bool
    kernel_dim: int
    multiplicity: int
    zero_eigenvalues: tuple
    max_nonzero_real: float
    AP0_norm: float
    P0: np.ndarray

    def to_dict(self):
        return {"semisimple": self.semisimple, "gap_ok": self.gap_ok, "kernel_dim": self.kernel_dim,
                "multiplicity": self.multiplicity, "max_nonzero_real": self.max_nonzero_real,
                "AP0_norm": self.AP0_norm}


def projection_rank(p):
    sv = np.linalg.svd(_mat(p), compute_uv=False)
    if sv.size == 0:
        return 0
    return int(np.sum(sv > RANK_TOL * max(sv[0], 1.0)))


def verify_zero_gap(gen, nu):
    """Check that 0 is an isolated semisimple eigenvalue with gap nu."""
    from .contour import circle_path, riesz_projection

    a = _mat(gen)
    spec = spectrum(a)
    vals = spec.values
    near = np.abs(vals) < nu / 4
    if not np.any(near):
        raise NoIsolatedZero("no eigenvalue within nu/4 of the origin", nu=nu,
                             closest=complex(vals[np.argmin(np.abs(vals))]))
    anorm = max(np.linalg.norm(a, 2), 1.0)
    others = vals[~near]
    max_re = float(np.max(others.real)) if others.size else -math.inf
    gap_ok = bool(max_re <= -nu + TAU_SPEC * anorm)
    p0 = riesz_projection(a, circle_path(0.0, nu / 2), tol=1e-12).value
    k = projection_rank(p0)
    ap0 = operator_norm(a @ p0)
    mult = int(np.sum(near))
    semisimple = bool(k == mult and ap0 <= TAU_SPEC * anorm)
    return ZeroGapReport(semisimple, gap_ok, k, mult, tuple(complex(v) for v in vals[near]),
                    max_re, ap0, p0)
