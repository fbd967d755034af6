"""Decay envelopes: prefactor and rate formulas for the perturbed semigroups.

An envelope certifies ||T_alpha(t)|| <= P e^{-(kappa q(alpha) - g) t}.  The
prefactors of the uniform bounds contain factors like e^{a~/q(eps)} with
eps of order 1e-10, so every prefactor is carried as its logarithm; the
plain value overflows to +inf, which is still a valid (if vacuous) bound.

Envelopes may carry extra pieces: bounds valid on a sub-range of alpha
(possibly with a faster rate or an alpha-dependent prefactor).  The
envelope value is the minimum over every piece that applies.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .contour import _check_angle, vertical_segment_sup
from .decomposition import leading_block, m2_constant, thresholds
from .errors import (BadAngle, BadOrdering, LeadingSpectrumUnstable, MissingIngredient,
                     NotSimpleEigenvalue)
from .operator_core import certified_weighted_sup, spectral_abscissa, spectrum
from .sectorial import (auto_sector, estimate_ell, locate_alpha0, uniform_family_sector)

LOG_MAX = 709.78   # log of the largest double


def _exp(x):
    return math.inf if x > LOG_MAX else math.exp(x)


def _phi(theta):
    # path angle used throughout the family estimates
    return theta / 2.0 + math.pi / 4.0


@dataclass(frozen=True)
class BoundValue:
    """A prefactor with its logarithm and the branch of the max that is active."""

    log_value: float
    branch: int
    log_branches: tuple

    @property
    def value(self):
        return _exp(self.log_value)

    def __float__(self):
        return self.value

    def to_dict(self):
        return {"log_value": self.log_value, "value": _finite(self.value), "branch": self.branch,
                "log_branches": list(self.log_branches)}


def _finite(x):
    return x if math.isfinite(x) else None


def _max_branch(logs):
    j = int(np.argmax(logs))
    return BoundValue(float(logs[j]), j + 1, tuple(float(v) for v in logs))


# ---------------------------------------------------------------------------
# Envelope containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnvelopePiece:
    """A bound P e^{-c q(alpha) t} valid for alpha in [alpha_lo, alpha_hi]."""

    tag: str
    rate_factor: float
    alpha_lo: float = 0.0
    alpha_hi: float = math.inf
    log_prefactor: Optional[float] = None
    log_prefactor_fn: Optional[Callable] = None   # alpha -> log prefactor

    def applies(self, alpha):
        return self.alpha_lo <= alpha <= self.alpha_hi

    def log_prefactor_at(self, alpha):
        if self.log_prefactor_fn is not None:
            return float(self.log_prefactor_fn(alpha))
        return self.log_prefactor

    def to_dict(self):
        return {"tag": self.tag, "rate_factor": self.rate_factor,
                "alpha_range": [self.alpha_lo, _finite(self.alpha_hi)],
                "log_prefactor": self.log_prefactor,
                "alpha_dependent": self.log_prefactor_fn is not None}


@dataclass(frozen=True, eq=False)
class DecayEnvelope:
    """||T_alpha(t)|| <= exp(log_prefactor) e^{-(kappa q(alpha) - growth) t}, plus pieces."""

    kappa: float
    log_prefactor: float
    tag: str
    q1: float = 0.0
    q2: float = math.inf
    q_func: Optional[Callable] = None
    growth: float = 0.0
    pieces: tuple = ()
    ledger: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def prefactor(self):
        return _exp(self.log_prefactor)

    def q(self, alpha):
        if self.q_func is not None:
            return float(self.q_func(alpha))
        return self.q1 * float(alpha)

    def rate(self, alpha):
        """Reference exponent kappa q(alpha) - growth of the main piece."""
        return self.kappa * self.q(alpha) - self.growth

    def log_value(self, alpha, t):
        qa = self.q(alpha)
        best = self.log_prefactor - (self.kappa * qa - self.growth) * t
        for p in self.pieces:
            if p.applies(alpha):
                best = min(best, p.log_prefactor_at(alpha) - (p.rate_factor * qa - self.growth) * t)
        return best

    def value(self, alpha, t):
        return _exp(self.log_value(alpha, t))

    def scaled(self, factor):
        """Every prefactor multiplied by factor (used for negative controls)."""
        lf = math.log(factor)
        pieces = tuple(replace(p, log_prefactor=None if p.log_prefactor is None else p.log_prefactor + lf,
                               log_prefactor_fn=None if p.log_prefactor_fn is None else
                               (lambda a, f=p.log_prefactor_fn: f(a) + lf)) for p in self.pieces)
        return replace(self, log_prefactor=self.log_prefactor + lf, pieces=pieces,
                       flags=self.flags + ("scaled x %g" % factor,))

    def to_dict(self):
        return {"tag": self.tag, "kappa": self.kappa,
                "prefactor": {"log": self.log_prefactor, "value": _finite(self.prefactor)},
                "q1": self.q1, "q2": _finite(self.q2), "growth": self.growth,
                "pieces": [p.to_dict() for p in self.pieces], "ledger": self.ledger,
                "flags": list(self.flags)}

    @classmethod
    def from_dict(cls, d, q_func=None):
        """Rebuild from a serialized record; only constant-prefactor pieces are restored."""
        pieces = tuple(EnvelopePiece(p["tag"], p["rate_factor"], p["alpha_range"][0],
                                     math.inf if p["alpha_range"][1] is None else p["alpha_range"][1],
                                     p["log_prefactor"])
                       for p in d.get("pieces", []) if not p.get("alpha_dependent"))
        q2 = d.get("q2")
        return cls(d["kappa"], d["prefactor"]["log"], d["tag"], d.get("q1", 0.0),
                   math.inf if q2 is None else q2, q_func, d.get("growth", 0.0), pieces,
                   d.get("ledger", {}), tuple(d.get("flags", [])))


# ---------------------------------------------------------------------------
# Single-operator bounds
# ---------------------------------------------------------------------------

def vertex_bound(cert, phi):
    """||T(t)|| <= M0 (e phi - sec phi)/pi e^{a t}."""
    if not (math.pi / 2 < phi < cert.theta):
        raise BadAngle("need pi/2 < phi < theta", phi=phi, theta=cert.theta)
    pref = cert.M0 * (math.e * phi - 1.0 / math.cos(phi)) / math.pi
    return DecayEnvelope(0.0, math.log(pref), "vertex", growth=cert.a,
                         ledger={"M0": cert.M0, "a": cert.a, "phi": phi})


@dataclass(frozen=True)
class ShiftedBound:
    """t -> M0 e^{mu t}/(pi (a - mu) t) + e^{mu t} supV/(2 pi)."""

    M0: float
    a: float
    mu: float
    supV: float

    def __call__(self, t):
        if t <= 0:
            raise ValueError("the shifted bound needs t > 0")
        return math.exp(self.mu * t) * (self.M0 / (math.pi * (self.a - self.mu) * t)
                                        + self.supV / (2 * math.pi))

    def envelope(self, t0):
        """Packaged for t >= t0: prefactor evaluated at t0, growth mu."""
        pref = self.M0 / (math.pi * (self.a - self.mu) * t0) + self.supV / (2 * math.pi)
        return DecayEnvelope(0.0, math.log(pref), "shifted", growth=self.mu,
                             ledger={"M0": self.M0, "a": self.a, "mu": self.mu,
                                     "supV": self.supV, "t0": t0})


def shifted_bound(cert, mu, phi, supV, gen=None):
    _check_angle(phi)
    if mu >= cert.a:
        raise BadOrdering("need mu < a", mu=mu, a=cert.a)
    if gen is not None:
        s = spectral_abscissa(gen)
        if mu <= s:
            raise BadOrdering("need mu above the spectral abscissa", mu=mu, abscissa=s)
    return ShiftedBound(cert.M0, cert.a, mu, supV)


def v_sup_bound(gen, cert, mu, phi, samples=401):
    """sup_t ||V(t, mu, phi)|| <= 2 (a - mu)|tan phi| max_{|s|<=b} ||R(mu + i s, A)||."""
    b = (cert.a - mu) * abs(math.tan(phi))
    return 2.0 * b * vertical_segment_sup(gen, mu, b, samples).value


# ---------------------------------------------------------------------------
# Family bounds away from alpha = 0
# ---------------------------------------------------------------------------

def _vertex_log(M, theta, m=1):
    # log of M (e m (2 theta + pi) - 4 m sec(phi)) / (4 pi): the vertex bound of the sector
    phi = _phi(theta)
    return math.log(M * (math.e * m * (2 * theta + math.pi) - 4 * m / math.cos(phi)) / (4 * math.pi))


def family_bound_away(fcert, kappa, q_alpha, M1=None):
    """M-bar(kappa, alpha) as a two-branch max, evaluated at q = q(alpha) > 0."""
    M1 = fcert.M1 if M1 is None else M1
    mt, at, th = fcert.M_tilde, fcert.a_tilde, fcert.theta_tilde
    tphi = abs(math.tan(_phi(th)))
    b1 = (mt * q_alpha / (at + kappa * q_alpha)
          + M1 * (at + kappa * q_alpha) * tphi / ((1 - kappa) * q_alpha)) / math.pi
    b2 = _vertex_log(mt, th) + at / q_alpha + 1.0
    return _max_branch([math.log(b1), b2])


def majorant(fcert, kappa, q_alpha, M1=None):
    """The monotone (in q) upper bound for M-bar(kappa, alpha') over all alpha' >= alpha."""
    M1 = fcert.M1 if M1 is None else M1
    mt, at, th = fcert.M_tilde, fcert.a_tilde, fcert.theta_tilde
    tphi = abs(math.tan(_phi(th)))
    b1 = (mt / kappa + M1 * tphi * (at / q_alpha + kappa) / (1 - kappa)) / math.pi
    b2 = _vertex_log(mt, th) + at / q_alpha + 1.0
    return _max_branch([math.log(b1), b2])


def hilbert_family_bound(fcert, kappa, q_alpha, M1=None):
    """N-bar(kappa, alpha) = C (1 + 2C (1 + M1 (a~ + kappa q)/((1 - kappa) q)))."""
    M1 = fcert.M1 if M1 is None else M1
    c = math.exp(_vertex_log(fcert.M_tilde, fcert.theta_tilde))
    val = c * (1 + 2 * c * (1 + M1 * (fcert.a_tilde + kappa * q_alpha) / ((1 - kappa) * q_alpha)))
    return _max_branch([math.log(val)])


# ---------------------------------------------------------------------------
# Constants near alpha = 0
# ---------------------------------------------------------------------------

def m3_constant(fcert, nu, M2):
    """M3: bound for the conjugated semigroup on Ker P0 with rate nu/2."""
    mt, at, th = fcert.M_tilde, fcert.a_tilde, fcert.theta_tilde
    tphi = abs(math.tan(_phi(th)))
    b1 = 3 * mt / (math.pi * at) + 96 * M2 / (math.pi * nu) * (at + nu / 2) * tphi
    b2 = _vertex_log(mt, th, 3) + at + nu / 2
    return _max_branch([math.log(b1), b2])


def m4_of_kappa(g00, q1, kappa, points=400):
    """M4(kappa) = sup_t e^{(1+kappa) q1 t/2} ||e^{t G0(0)}||, certified tail, x 1.05."""
    g00 = np.atleast_2d(np.asarray(g00, dtype=complex))
    lead = spectrum(g00).abscissa
    if lead > -q1 + 1e-9 * max(1.0, q1):
        raise LeadingSpectrumUnstable("leading block has spectrum right of -q1", abscissa=lead,
                                      q1=q1)
    rate = (1 + kappa) * q1 / 2
    return certified_weighted_sup(g00, rate, t_floor=4.0 / ((1 - kappa) * q1), points=points)


def r_inverse(r, y, hi=1.0):
    """Numerical inverse of an increasing modulus r (inf when r never reaches y)."""
    if y <= 0:
        return 0.0
    while r(hi) < y:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    return brentq(lambda a: r(a) - y, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                  maxiter=2000)


@dataclass(frozen=True)
class Eps23:
    eps2: float
    eps3: float
    terms: dict

    def to_dict(self):
        return {"eps2": self.eps2, "eps3": self.eps3,
                "terms": {k: _finite(v) for k, v in self.terms.items()}}


def eps23(kappa, eps1, q1, q2, nu, M2, r, r_inv=None):
    """eps2 and eps3 as minima of their printed terms."""
    y = (1 - kappa) * q1 / (3072 * M2 ** 2)
    inv = r_inv(y) if r_inv is not None else r_inverse(r, y)
    terms = {"eps1": eps1, "q2": q2, "quadratic": (1 - kappa) * q1 * eps1 ** 2 / (32 * M2 * nu),
             "r_inverse": inv}
    e2 = min(terms.values())
    return Eps23(e2, min(e2, nu / (2 * q1)), terms)


def eps4(eps1, q2, nu, q1):
    return min(eps1, q2, nu / (2 * q1))


# ---------------------------------------------------------------------------
# Ingredients and the uniform envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnvelopeIngredients:
    fcert: object
    M1: float
    nu: float
    M2: float
    M3: float
    q1: float
    q2: float
    sup_E0: float
    eps0: float
    eps1: float
    G00: Optional[np.ndarray] = None
    r: Optional[Callable] = None
    r_inv: Optional[Callable] = None
    rank: Optional[int] = None
    q_func: Optional[Callable] = None
    evidence: dict = field(default_factory=dict)

    def q(self, alpha):
        return float(self.q_func(alpha)) if self.q_func is not None else self.q1 * alpha

    def to_dict(self):
        return {"family_cert": self.fcert.to_dict(), "M1": self.M1, "nu": self.nu, "M2": self.M2,
                "M3": self.M3, "q1": self.q1, "q2": _finite(self.q2), "sup_E0": self.sup_E0,
                "eps0": self.eps0, "eps1": self.eps1, "rank_P0": self.rank,
                "G00": None if self.G00 is None else np.asarray(self.G00).tolist(),
                "evidence": self.evidence}


def _require(ing, *names):
    missing = [n for n in names if getattr(ing, n) is None]
    if missing:
        raise MissingIngredient("missing ingredient(s): %s" % ", ".join(missing), missing=missing)
    if not (ing.q1 and ing.q1 > 0):
        raise MissingIngredient("q1 must be positive (q identically zero is not allowed)",
                                missing=["q1"])


def uniform_prefactor(fcert, M1, M2, M3, M4, q_eps3, kappa):
    """log of max{majorant(kappa, eps3), 3 (8 M2 + 1)(M3 + M4)}."""
    maj = majorant(fcert, kappa, q_eps3, M1)
    near = 3 * (8 * M2 + 1) * (M3 + M4)
    return max(maj.log_value, math.log(near)), maj, near


def simple_zero_prefactor(fcert, M1, M2, M3, q_eps4, kappa):
    """log of max{majorant(kappa, eps4), 3 (M3 + 1)(8 M2 + 1)}."""
    maj = majorant(fcert, kappa, q_eps4, M1)
    strong = 3 * (M3 + 1) * (8 * M2 + 1)
    return max(maj.log_value, math.log(strong)), maj, strong


def uniform_envelope(ing, kappa):
    """Uniform envelope for a family with a semisimple zero eigenvalue of any multiplicity."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    _require(ing, "M1", "M2", "M3", "G00", "r")
    m4 = m4_of_kappa(ing.G00, ing.q1, kappa)
    e = eps23(kappa, ing.eps1, ing.q1, ing.q2, ing.nu, ing.M2, ing.r, ing.r_inv)
    log_pref, maj, near = uniform_prefactor(ing.fcert, ing.M1, ing.M2, ing.M3, m4.value,
                                            ing.q(e.eps3), kappa)
    pieces = (EnvelopePiece("near-zero", kappa, 0.0, e.eps3, math.log(near)),)
    ledger = {"M4": m4.to_dict(), "eps": e.to_dict(), "majorant": maj.to_dict(),
              "near_zero_prefactor": near, "majorant_at": e.eps3}
    return DecayEnvelope(kappa, log_pref, "uniform", ing.q1, ing.q2, ing.q_func, 0.0, pieces,
                         ledger, ("majorant-at-threshold",))


def simple_zero_envelope(ing, kappa):
    """Uniform envelope when zero is a simple eigenvalue; no modulus r needed."""
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    if ing.rank is not None and ing.rank != 1:
        raise NotSimpleEigenvalue("rank P0 must be 1", rank=ing.rank)
    _require(ing, "M1", "M2", "M3")
    e4 = eps4(ing.eps1, ing.q2, ing.nu, ing.q1)
    log_pref, maj, strong = simple_zero_prefactor(ing.fcert, ing.M1, ing.M2, ing.M3,
                                                  ing.q(e4), kappa)
    pieces = (EnvelopePiece("strong", 1.0, 0.0, e4, math.log(strong)),)
    ledger = {"eps4": e4, "majorant": maj.to_dict(), "strong_prefactor": strong,
              "majorant_at": e4}
    return DecayEnvelope(kappa, log_pref, "uniform-simple", ing.q1, ing.q2, ing.q_func, 0.0,
                         pieces, ledger, ("majorant-at-threshold",))


def refined_envelope(env, ing):
    """Add the alpha-dependent bounds M-bar(kappa, alpha) and N-bar(kappa, alpha) for alpha > 0."""
    k = env.kappa
    fc, m1 = ing.fcert, ing.M1

    def mb(alpha):
        return family_bound_away(fc, k, ing.q(alpha), m1).log_value

    def nb(alpha):
        return hilbert_family_bound(fc, k, ing.q(alpha), m1).log_value

    tiny = np.nextafter(0.0, 1.0)
    extra = (EnvelopePiece("away", k, tiny, math.inf, log_prefactor_fn=mb),
             EnvelopePiece("hilbert", k, tiny, math.inf, log_prefactor_fn=nb))
    return replace(env, pieces=env.pieces + extra, tag=env.tag + "+refined")


def build_ingredients(fam, nu, sector=None, M2=None, alpha_grid=None, check=True):
    """Certify every constant the uniform envelopes need, starting from a family."""
    base = fam.base
    evidence = {}
    if sector is None:
        s = spectral_abscissa(base)
        sector = auto_sector(base, a=max(1.0, s + 1.0))
    if fam.M1 is None:
        raise MissingIngredient("the family must supply M1", missing=["M1"])
    if fam.ell is None:
        fam = replace(fam, ell=estimate_ell(fam))
        evidence["ell"] = "sampled"
    alpha0, sup_small = locate_alpha0(fam)
    fcert = uniform_family_sector(fam, sector, alpha0, sup_small, alpha_grid, check=check)
    m2 = m2_constant(base.entries, nu) if M2 is None else None
    M2 = float(m2.value) if m2 is not None else float(M2)
    if m2 is not None:
        evidence["M2"] = m2.to_dict()
    sup_E0 = fam.sup_E0()
    th = thresholds(nu, M2, sup_E0)
    m3 = m3_constant(fcert, nu, M2)
    evidence["M3"] = m3.to_dict()
    g00 = leading_block(fam, nu)
    return EnvelopeIngredients(fcert, float(fam.M1), float(nu), M2, m3.value, float(fam.q1),
                               float(fam.q2), float(sup_E0), th["eps0"], th["eps1"], g00, fam.r,
                               fam.r_inverse, int(g00.shape[0]), fam.q_func, evidence)


__all__ = ["BoundValue", "EnvelopePiece", "DecayEnvelope", "vertex_bound", "ShiftedBound",
           "shifted_bound", "v_sup_bound", "family_bound_away", "majorant",
           "hilbert_family_bound", "m3_constant", "m4_of_kappa", "r_inverse", "Eps23", "eps23",
           "eps4", "EnvelopeIngredients", "uniform_prefactor", "simple_zero_prefactor",
           "uniform_envelope", "simple_zero_envelope", "refined_envelope", "build_ingredients"]
