"""Spectral decomposition around the semisimple zero eigenvalue.

For a family A_alpha = A + E(alpha) whose base has an isolated semisimple
eigenvalue 0 with spectral gap nu, this module builds the Riesz projections
P_0 and P_alpha on the circle |lam| = nu/2, the transformation operator
U = P_alpha P_0 + (I - P_alpha)(I - P_0) and the conjugated operator
B_alpha = U^{-1} A_alpha U, which is block diagonal with respect to
Im P_0 (+) Ker P_0.  The blocks are stored in orthonormal bases taken from
the singular value decomposition of P_0.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .contour import circle_path, riesz_projection, _trapezoid_circle
from .errors import (BoundViolated, ContourHitsSpectrum, EigenvalueOnContour, GapViolated,
                     IdentityViolated, NormBoundViolated)
from .operator_core import (RANK_TOL, SAFETY, TAU_SPEC, SchurEnvelope, OperatorValue, WeightedSup, _mat,
                            certified_weighted_sup,
                            family_member, operator_norm, resolvent_norms, resolvent_stack,
                            spectrum, verify_zero_gap)


# ---------------------------------------------------------------------------
# Bases and the gap constant
# ---------------------------------------------------------------------------

def projection_bases(p0):
    """Orthonormal bases (Q_im, Q_ker) of Im P and Ker P from the SVD of P."""
    p0 = _mat(p0)
    u, sv, vh = np.linalg.svd(p0)
    k = int(np.sum(sv > RANK_TOL * max(sv[0], 1.0))) if sv.size else 0
    return u[:, :k], vh[k:].conj().T


def m2_constant(gen, nu, t_floor=None, points=400):
    """M2 = sup_t e^{7 nu t/8} ||T(t) restricted to Ker P0||, certified tail, x 1.05."""
    a = _mat(gen)
    rep = verify_zero_gap(a, nu)
    _, q_ker = projection_bases(rep.P0)
    if q_ker.shape[1] == 0:
        raise GapViolated("Ker P0 is trivial: nothing to restrict to", nu=nu)
    c = q_ker.conj().T @ a @ q_ker
    vals = spectrum(c).values
    tol = TAU_SPEC * max(np.linalg.norm(a, 2), 1.0)
    if np.max(vals.real) > -nu + tol:
        raise GapViolated("restriction to Ker P0 has spectrum right of -nu", nu=nu,
                          eigenvalue=complex(vals[np.argmax(vals.real)]))
    t_floor = 16.0 / nu if t_floor is None else t_floor
    return certified_weighted_sup(c, 7.0 * nu / 8.0, t_floor=t_floor, points=points)


def bounded_semigroup_sup(gen, nu, points=400):
    """sup_t ||e^{tA}|| for A with a semisimple zero and gap nu, certified tail, x 1.05.

    For t >= T, ||e^{tA}|| <= ||P0|| + ||e^{tC}|| ||I - P0|| with C the
    restriction to Ker P0; T is pushed out until the second term is below
    1e-3 ||P0|| and its Schur envelope is decreasing.
    """
    a = _mat(gen)
    n = a.shape[0]
    rep = verify_zero_gap(a, nu)
    p0 = rep.P0
    _, q_ker = projection_bases(p0)
    c = q_ker.conj().T @ a @ q_ker
    env = SchurEnvelope.of(c)
    p_norm = operator_norm(p0)
    comp = operator_norm(np.eye(n) - p0)
    t_max = max(2.0 * env.decreasing_from(0.0), 8.0 / nu)
    while env.value(t_max) * comp > 1e-3 * p_norm:
        t_max *= 1.5
    grid = np.concatenate([[0.0], np.geomspace(t_max * 1e-6, t_max, points)])
    vals = [1.0] + [operator_norm(sla.expm(t * a)) for t in grid[1:]]
    j = int(np.argmax(vals))
    tail = p_norm + env.value(t_max) * comp
    return WeightedSup(SAFETY * float(max(vals[j], tail)), float(vals[j]), float(grid[j]),
                       float(t_max), float(tail), int(grid.size))


def thresholds(nu, M2, sup_E0):
    """eps0 = min{nu/(16 M2 S + 1), 1} and eps1 = min{nu/(256 M2^2 (16 M2 + 1) S + 1), 1}."""
    eps0 = min(nu / (16.0 * M2 * sup_E0 + 1.0), 1.0)
    eps1 = min(nu / (256.0 * M2 ** 2 * (16.0 * M2 + 1.0) * sup_E0 + 1.0), 1.0)
    return {"eps0": eps0, "eps1": eps1}


# ---------------------------------------------------------------------------
# The decomposition itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    nu: float
    alpha: float
    P0: np.ndarray
    P_alpha: np.ndarray
    U: np.ndarray
    U_inv: np.ndarray
    B: np.ndarray
    K: np.ndarray           # k x k block of B on Im P0 (basis Q_im)
    B_tilde: np.ndarray     # (n-k) x (n-k) block of B on Ker P0 (basis Q_ker)
    M2: float
    eps0: float
    eps1: float
    Q_im: np.ndarray
    Q_ker: np.ndarray
    checks: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.Q_im.shape[1]

    def to_dict(self):
        return {"nu": self.nu, "alpha": self.alpha, "k": self.k, "M2": self.M2,
                "eps0": self.eps0, "eps1": self.eps1, "checks": self.checks}


def _projection(a, nu, which):
    try:
        return riesz_projection(a, circle_path(0.0, nu / 2), tol=1e-12).value
    except EigenvalueOnContour as exc:
        raise ContourHitsSpectrum("spectrum of %s meets |lam| = nu/2" % which, nu=nu,
                                  **exc.details)


def _inner_boundary(nu, points=64):
    """|lam| = nu/4 together with the line Re lam = -3 nu/4."""
    circle = 0.25 * nu * np.exp(2j * np.pi * np.arange(points) / points)
    s = np.geomspace(1e-3, 1e3, points) * nu
    line = -0.75 * nu + 1j * np.concatenate([-s[::-1], [0.0], s])
    return np.concatenate([circle, line])


def inner_boundary_check(a_alpha, nu, M2, points=64):
    """||R(lam, A_alpha)|| <= 16 M2 / nu on the inner boundary of the annular region."""
    lam = _inner_boundary(nu, points)
    vals = resolvent_norms(a_alpha, lam)
    j = int(np.argmax(vals))
    bound = 16.0 * M2 / nu
    if vals[j] > bound:
        raise NormBoundViolated("resolvent exceeds 16 M2/nu on the inner boundary",
                                lam=complex(lam[j]), value=float(vals[j]), bound=bound)
    return {"max": float(vals[j]), "argmax": complex(lam[j]), "bound": bound,
            "samples": int(lam.size)}


def build_decomposition(fam, nu, alpha, M2=None, sup_E0=None, check=True):
    """Projections, transformation operator and the conjugated blocks at alpha."""
    a = fam.base.entries
    M2 = float(m2_constant(a, nu)) if M2 is None else float(M2)
    sup_E0 = fam.sup_E0() if sup_E0 is None else sup_E0
    th = thresholds(nu, M2, sup_E0)
    if alpha < 0 or alpha > th["eps1"] * (1 + 1e-12):
        raise ValueError("alpha = %g outside [0, eps1 = %g]" % (alpha, th["eps1"]))
    a_alpha = family_member(fam, alpha).entries
    n = a.shape[0]
    eye = np.eye(n)
    p0 = _projection(a, nu, "A")
    p_a = p0 if alpha == 0 else _projection(a_alpha, nu, "A_alpha")
    u = p_a @ p0 + (eye - p_a) @ (eye - p0)
    u_inv = np.linalg.inv(u)
    b = u_inv @ a_alpha @ u
    q_im, q_ker = projection_bases(p0)
    k_blk = q_im.conj().T @ b @ q_im
    bt = q_ker.conj().T @ b @ q_ker
    checks = {}
    if check:
        bn = max(operator_norm(b), 1.0)
        checks = {
            "P0_idempotent": operator_norm(p0 @ p0 - p0),
            "Palpha_idempotent": operator_norm(p_a @ p_a - p_a),
            "intertwining": operator_norm(u @ p0 - p_a @ u),
            "U_norm": operator_norm(u),
            "U_inv_norm": operator_norm(u_inv),
            "similarity_residual": operator_norm(u @ b - a_alpha @ u) / max(operator_norm(a_alpha), 1.0),
            "offdiag_ker_im": operator_norm((eye - p0) @ b @ p0) / bn,
            "offdiag_im_ker": operator_norm(p0 @ b @ (eye - p0)) / bn,
            "commutator": operator_norm(p_a @ a_alpha - a_alpha @ p_a),
            "AP0": operator_norm(a @ p0),
            "inner_boundary": inner_boundary_check(a_alpha, nu, M2),
        }
    return SpectralDecomposition(float(nu), float(alpha), p0, p_a, u, u_inv, b, k_blk, bt, M2,
                                 th["eps0"], th["eps1"], q_im, q_ker, checks)


def projection_lipschitz_check(fam, nu, alpha1, alpha2, M2):
    """Both sides of ||P_a1 - P_a2|| <= (128 M2^2 / nu) ||E(a1) - E(a2)||."""
    def proj(al):
        m = family_member(fam, al).entries
        return _projection(m, nu, "A_alpha")
    lhs = 0.0 if alpha1 == alpha2 else operator_norm(proj(alpha1) - proj(alpha2))
    rhs = 128.0 * M2 ** 2 / nu * operator_norm(fam.E(alpha1) - fam.E(alpha2))
    ratio = 0.0 if lhs == 0 else (math.inf if rhs == 0 else lhs / rhs)
    # lhs below quadrature noise counts as zero
    ok = lhs <= rhs or lhs <= 1e-10
    return {"alpha1": alpha1, "alpha2": alpha2, "lhs": lhs, "rhs": rhs, "ratio": ratio, "ok": ok}


# ---------------------------------------------------------------------------
# G(alpha) and the leading block
# ---------------------------------------------------------------------------

def _g_integral(a_alpha, a, e0, nu, tol):
    def batch(lams):
        out = np.empty((lams.size,) + a.shape, dtype=complex)
        left = list(resolvent_stack(a_alpha, lams))
        right = list(resolvent_stack(a, lams))
        for (sl, ra), (_, rb) in zip(left, right):
            out[sl] = lams[sl, None, None] * (ra @ e0 @ rb)
        return out
    circ = circle_path(0.0, nu / 2).segments[0]
    return _trapezoid_circle(circ, batch, tol)


def g_operator(fam, nu, alpha, decomp=None, tol=1e-12):
    """G(alpha) = (1/2 pi i) closed integral of lam R(lam, A_alpha) E0(alpha) R(lam, A)."""
    if alpha <= 0:
        raise ValueError("g_operator needs alpha > 0")
    decomp = build_decomposition(fam, nu, alpha, check=False) if decomp is None else decomp
    a = fam.base.entries
    a_alpha = family_member(fam, alpha).entries
    e0 = fam.E0(alpha)
    g, err, nodes = _g_integral(a_alpha, a, e0, nu, tol)
    sup_E0 = fam.sup_E0()
    bound = 64.0 * decomp.M2 ** 2 * sup_E0
    gnorm = operator_norm(g)
    if gnorm > bound:
        raise BoundViolated("||G(alpha)|| exceeds 64 M2^2 sup||E0||", alpha=alpha,
                            value=gnorm, bound=bound)
    q = decomp.Q_im
    k_from_g = alpha * (q.conj().T @ decomp.P0 @ decomp.U_inv @ g @ decomp.U @ q)
    resid = operator_norm(decomp.K - k_from_g)
    scale = max(1.0, alpha * gnorm * operator_norm(decomp.U) * operator_norm(decomp.U_inv))
    if resid > 10.0 * tol * scale:
        raise IdentityViolated("K_alpha differs from alpha P0 U^-1 G U on Im P0", alpha=alpha,
                               residual=resid, tol=10.0 * tol * scale)
    return OperatorValue(g, {"alpha": alpha, "norm": gnorm, "bound": bound,
                             "identity_residual": resid, "error": err, "nodes": nodes})


def g_zero_check(fam, nu, alpha, tol=1e-12):
    """P0 G(0) P0 = P0 E0(0) P0 on Im P0, directly and by Richardson extrapolation."""
    a = fam.base.entries
    e00 = fam.E0_zero
    g0, _, _ = _g_integral(a, a, e00, nu, tol)
    p0 = _projection(a, nu, "A")
    q, _ = projection_bases(p0)
    lhs = q.conj().T @ p0 @ g0 @ q
    rhs = q.conj().T @ p0 @ e00 @ q
    ga = _g_integral(family_member(fam, alpha).entries, a, fam.E0(alpha), nu, tol)[0]
    gh = _g_integral(family_member(fam, alpha / 2).entries, a, fam.E0(alpha / 2), nu, tol)[0]
    extrap = 2.0 * gh - ga
    return {"direct_residual": operator_norm(lhs - rhs),
            "richardson_residual": operator_norm(q.conj().T @ p0 @ extrap @ q - rhs),
            "richardson_vs_direct": operator_norm(extrap - g0), "alpha": alpha}


def leading_block(fam, nu):
    """G0(0) = P0 E0(0) restricted to Im P0, in the basis Q_im."""
    a = fam.base.entries
    p0 = _projection(a, nu, "A")
    q, _ = projection_bases(p0)
    return q.conj().T @ p0 @ fam.E0_zero @ q


def leading_block_expansion_check(fam, nu, alphas, M2=None, sup_E0=None):
    """||K_alpha - alpha G0(0)|| against 8 M2 nu alpha^2/eps1^2 + 768 M2^2 alpha r(alpha)."""
    if fam.r is None:
        raise ValueError("the family must supply the modulus r")
    a = fam.base.entries
    M2 = float(m2_constant(a, nu)) if M2 is None else float(M2)
    sup_E0 = fam.sup_E0() if sup_E0 is None else sup_E0
    eps1 = thresholds(nu, M2, sup_E0)["eps1"]
    g00 = leading_block(fam, nu)
    rows = []
    for al in alphas:
        d = build_decomposition(fam, nu, float(al), M2=M2, sup_E0=sup_E0, check=False)
        lhs = operator_norm(d.K - al * g00)
        rhs = 8.0 * M2 * nu * al ** 2 / eps1 ** 2 + 768.0 * M2 ** 2 * al * fam.r(al)
        rows.append({"alpha": float(al), "lhs": lhs, "rhs": rhs,
                     "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs <= 1e-13 else math.inf)})
    lead = spectrum(g00).abscissa if g00.size else -math.inf
    return {"rows": rows, "max_ratio": max((r["ratio"] for r in rows), default=0.0),
            "leading_abscissa": lead, "leading_ok": bool(lead <= -fam.q1 + 1e-9 * max(1, fam.q1)),
            "eps1": eps1, "M2": M2}


def b_tilde_resolvent_bound(decomp, points=64):
    """||R(lam, B~)|| <= 96 M2 / nu on Re lam = -nu/2 and |lam| = nu/4; sigma(B~) left of -nu/2."""
    nu = decomp.nu
    bt = decomp.B_tilde
    vals = spectrum(bt).values
    if np.max(vals.real) > -nu / 2 + TAU_SPEC * max(operator_norm(bt), 1.0):
        raise BoundViolated("spectrum of B~ crosses Re lam = -nu/2",
                            eigenvalue=complex(vals[np.argmax(vals.real)]), nu=nu)
    s = np.geomspace(1e-3, 1e3, points) * nu
    line = -0.5 * nu + 1j * np.unique(np.concatenate([-s, [0.0], s, vals.imag]))
    circle = 0.25 * nu * np.exp(2j * np.pi * np.arange(points) / points)
    lam = np.concatenate([line, circle])
    norms = resolvent_norms(bt, lam)
    j = int(np.argmax(norms))
    bound = 96.0 * decomp.M2 / nu
    if norms[j] > bound:
        raise BoundViolated("||R(lam, B~)|| exceeds 96 M2/nu", lam=complex(lam[j]),
                            value=float(norms[j]), bound=bound)
    return {"max": float(norms[j]), "argmax": complex(lam[j]), "bound": bound,
            "samples": int(lam.size), "abscissa": float(np.max(vals.real))}


def conjugated_sector_check(decomp, fcert, points=120):
    """||R(lam, B_alpha)|| <= 3 M~ / |lam - a~| on the boundary rays of the uniform sector."""
    a_t, th, mt = fcert.a_tilde, fcert.theta_tilde, fcert.M_tilde
    scale = max(operator_norm(decomp.B), a_t, 1.0)
    r = np.geomspace(1e-3, 1e3, points) * scale
    lam = np.concatenate([a_t + r * np.exp(1j * th), a_t + r * np.exp(-1j * th)])
    w = np.abs(lam - a_t) * resolvent_norms(decomp.B, lam)
    j = int(np.argmax(w))
    bound = 3.0 * mt
    if w[j] > bound:
        raise BoundViolated("conjugated resolvent exceeds 3 M~/|lam - a~|", lam=complex(lam[j]),
                            value=float(w[j]), bound=bound)
    return {"max": float(w[j]), "bound": bound, "samples": int(lam.size)}


__all__ = ["SpectralDecomposition", "projection_bases", "m2_constant", "bounded_semigroup_sup",
           "thresholds",
           "build_decomposition", "inner_boundary_check", "projection_lipschitz_check",
           "g_operator", "g_zero_check", "leading_block", "leading_block_expansion_check",
           "b_tilde_resolvent_bound", "conjugated_sector_check"]
