"""Sectoriality certificates.

A certificate records a vertex a, an angle theta in (pi/2, pi) and a bound
M0 with ||R(lam, A)|| <= M0 / |lam - a| on the open sector
{lam != a : |arg(lam - a)| < theta}.  Certificates obtained by sampling are
empirical: they carry their grids and a 1.05 safety factor.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadAngle, FamilyBoundViolated, MissingIngredient, NumericalRangeViolation,
                     SpectrumInHalfplane, SpectrumInSector, VertexNotPositive)
from .operator_core import (SAFETY, TAU_SPEC, _mat, family_member, operator_norm,
                            resolvent_norms, spectrum)

DELTA_ANG = 1e-3


@dataclass(frozen=True)
class SectorCert:
    a: float
    theta: float
    M0: float
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.pi / 2 < self.theta < math.pi):
            raise BadAngle("sector angle must lie in (pi/2, pi)", theta=self.theta)

    def to_dict(self):
        return {"a": self.a, "theta": self.theta, "M0": self.M0, "evidence": self.evidence}


@dataclass(frozen=True)
class FamilyCert:
    a_tilde: float
    theta_tilde: float
    M_tilde: float
    a1: float
    N_tilde: float
    M1: float
    ell: float
    alpha0: float
    sup_E_small: float
    base: SectorCert
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {"a_tilde": self.a_tilde, "theta_tilde": self.theta_tilde, "M_tilde": self.M_tilde,
                "a1": self.a1, "N_tilde": self.N_tilde, "M1": self.M1, "ell": self.ell,
                "alpha0": self.alpha0, "sup_E_small": self.sup_E_small,
                "base": self.base.to_dict(), "evidence": self.evidence}


def _in_sector(vals, a, theta, tol):
    z = np.asarray(vals) - a
    return (np.abs(z) <= tol) | (np.abs(np.angle(z)) < theta)


def certify_sector(gen, a, theta, grid_spec=None):
    """Empirical M0 = 1.05 x max of ||(lam - a) R(lam, A)|| over boundary rays and arcs."""
    if not (math.pi / 2 < theta < math.pi):
        raise BadAngle("sector angle must lie in (pi/2, pi)", theta=theta)
    am = _mat(gen)
    spec = grid_spec or {}
    vals = spectrum(am).values
    scale = max(np.linalg.norm(am, 2), 1.0)
    inside = _in_sector(vals, a, theta, TAU_SPEC * scale)
    if np.any(inside):
        raise SpectrumInSector("eigenvalue inside the sector", eigenvalue=complex(vals[inside][0]),
                               a=a, theta=theta)
    delta = spec.get("delta", DELTA_ANG)
    rmin, rmax = spec.get("rmin", 1e-3) * scale, spec.get("rmax", 1e3) * scale
    n_rad = spec.get("radii", 240)
    n_arc = spec.get("arc_points", 64)
    radii = np.geomspace(rmin, rmax, n_rad)
    ang = theta - delta
    rays = np.concatenate([a + radii * np.exp(1j * ang), a + radii * np.exp(-1j * ang)])
    arc_r = np.geomspace(rmin, rmax, spec.get("arcs", 7))
    zs = np.linspace(-ang, ang, n_arc)
    arcs = (a + arc_r[:, None] * np.exp(1j * zs[None, :])).ravel()
    pts = np.concatenate([rays, arcs])
    w = np.abs(pts - a) * resolvent_norms(am, pts)
    j = int(np.argmax(w))
    evidence = {"method": "sampling", "ray_angle": ang, "radii": [rmin, rmax, n_rad],
                "arc_radii": arc_r.tolist(), "arc_points": n_arc, "max_observed": float(w[j]),
                "argmax": complex(pts[j]), "safety": SAFETY, "samples": int(pts.size)}
    return SectorCert(float(a), float(theta), SAFETY * float(w[j]), evidence)


def auto_sector(gen, a=None, margin=1.0, grid_spec=None):
    """Pick a vertex right of the spectrum and an angle inside its opening, then certify."""
    am = _mat(gen)
    vals = spectrum(am).values
    if a is None:
        a = float(np.max(vals.real)) + margin
    opening = float(np.min(np.abs(np.angle(vals - a))))
    if opening <= math.pi / 2:
        raise SpectrumInSector("vertex must lie right of the spectrum", a=a)
    theta = 0.5 * (math.pi / 2 + min(opening, math.pi - 1e-6))
    return certify_sector(am, a, theta, grid_spec)


def numerical_range_sector(gen, a, theta, phi, psi_points=33):
    """M0 = csc(theta - phi) from W(A) lying outside the sector of angle theta.

    The complement of the sector is the convex cone bounded by the rays at
    angles +-theta, whose outward normals point at +-(theta - pi/2).  W(A) lies
    in it iff the top eigenvalue of the Hermitian part of
    e^{-i psi}(A - aI) is <= 0 for both normals.
    """
    if not (math.pi / 2 < theta < math.pi):
        raise BadAngle("sector angle must lie in (pi/2, pi)", theta=theta)
    if not (math.pi / 2 < phi < theta):
        raise BadAngle("need pi/2 < phi < theta", phi=phi, theta=theta)
    am = _mat(gen)
    n = am.shape[0]
    shifted = am - a * np.eye(n)
    tol = TAU_SPEC * max(np.linalg.norm(am, 2), 1.0)
    edge = theta - math.pi / 2

    def support(psi):
        h = np.exp(-1j * psi) * shifted
        ev, vec = np.linalg.eigh(0.5 * (h + h.conj().T))
        return float(ev[-1]), vec[:, -1]

    for psi in (-edge, edge):
        top, vec = support(psi)
        if top > tol:
            raise NumericalRangeViolation("numerical range enters the sector", psi=float(psi),
                                          support=top, vector=vec)
    psis = np.linspace(-edge, edge, psi_points)
    values = [support(p)[0] for p in psis]
    ev_info = {"method": "numerical-range", "theta_range": theta, "psi": psis.tolist(),
               "support": values}
    return SectorCert(float(a), float(phi), 1.0 / math.sin(theta - phi), ev_info)


def halfplane_to_sector(omega, N0):
    """Sector produced by a half-plane bound ||lam R(lam, A)|| <= N0 on Re lam >= omega."""
    return SectorCert(float(omega), math.pi - math.atan(2.0 * N0), math.sqrt(4.0 * N0 ** 2 + 1.0),
                      {"method": "halfplane", "N0": N0})


def _line_grid(scale, points):
    s = np.geomspace(1e-4, 1e4, points) * scale
    return np.concatenate([-s[::-1], [0.0], s])


def estimate_halfplane_bound(gen, omega, grid_spec=None, seed=0):
    """N0 = 1.05 x sup of ||lam R(lam, A)|| on Re lam = omega (maximum principle)."""
    from scipy.optimize import minimize_scalar

    am = _mat(gen)
    spec = grid_spec or {}
    vals = spectrum(am).values
    if np.any(vals.real >= omega):
        raise SpectrumInHalfplane("eigenvalue in Re lam >= omega", omega=omega,
                                  eigenvalue=complex(vals[np.argmax(vals.real)]))
    scale = max(np.linalg.norm(am, 2), 1.0)
    s = np.unique(np.concatenate([_line_grid(scale, spec.get("points", 200)), vals.imag]))
    lam = omega + 1j * s
    w = np.abs(lam) * resolvent_norms(am, lam)
    j = int(np.argmax(w))
    best, arg = float(w[j]), float(s[j])
    lo, hi = s[max(j - 1, 0)], s[min(j + 1, s.size - 1)]
    if hi > lo:
        def neg(x):
            z = omega + 1j * x
            return -abs(z) * float(resolvent_norms(am, [z])[0])
        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded")
        if -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    # interior guard: the boundary maximum must dominate random interior points
    rng = np.random.default_rng(seed)
    inner = omega + rng.exponential(scale, 10) + 1j * rng.normal(0, scale, 10)
    wi = np.abs(inner) * resolvent_norms(am, inner)
    if np.max(wi) > best * (1 + 1e-9):
        best = float(np.max(wi))
    return HalfplaneBound(SAFETY * best, best, omega + 1j * arg, int(s.size))


@dataclass(frozen=True)
class HalfplaneBound:
    N0: float
    sampled: float
    argmax: complex
    samples: int

    def __float__(self):
        return self.N0


def perturbed_sector(cert, w_norm):
    """Vertex a + 2 M0 ||W|| csc(theta), same angle, bound 2 M0 (1 + csc(theta))."""
    if w_norm < 0:
        raise ValueError("w_norm must be nonnegative")
    csc = 1.0 / math.sin(cert.theta)
    return SectorCert(cert.a + 2.0 * cert.M0 * w_norm * csc, cert.theta, 2.0 * cert.M0 * (1.0 + csc),
                      {"method": "bounded-perturbation", "w_norm": w_norm, "from": cert.to_dict()})


def locate_alpha0(fam, grid=None, ell=None):
    """Smallest sampled alpha0 with ||E(alpha)|| <= (ell+1) q(alpha) for all sampled alpha >= alpha0.

    Returns (alpha0, sup_E_small) with sup_E_small = 1.05 x max ||E|| on [0, alpha0].
    """
    ell = fam.ell if ell is None else ell
    if ell is None:
        raise MissingIngredient("ell is required to locate alpha0", missing="ell")
    grid = np.geomspace(1e-6, 1e3, 91) if grid is None else np.asarray(grid, float)
    grid = np.unique(grid[grid > 0])
    norms = np.array([operator_norm(fam.E(a)) for a in grid])
    ok = norms <= (ell + 1.0) * np.array([fam.q(a) for a in grid]) * (1 + 1e-12)
    idx = grid.size - 1
    while idx > 0 and ok[idx - 1]:
        idx -= 1
    if not ok[idx]:
        raise FamilyBoundViolated("asymptotic ratio bound fails at the largest sampled alpha",
                                  alpha=float(grid[-1]))
    alpha0 = float(grid[idx])
    return alpha0, SAFETY * float(np.max(norms[: idx + 1]))


def estimate_ell(fam, grid=None):
    """Sampled limsup of ||E(alpha)|| / q(alpha) (the largest ratio on the upper grid decade)."""
    grid = np.geomspace(1e1, 1e3, 12) if grid is None else np.asarray(grid, float)
    return float(max(operator_norm(fam.E(a)) / fam.q(a) for a in grid))


def n_tilde(M0, a1, theta, M1, ell):
    return M0 * (1.0 + a1) * (1.0 + max(1.0 / math.sin(theta), M1 * (ell + 1.0)))


def uniform_family_sector(fam, cert, alpha0, sup_E_small, alpha_grid=None, check=True,
                          line_points=60):
    """Uniform sector (a~, theta~, M~) valid for every member of the family."""
    if cert.a <= 0:
        raise VertexNotPositive("the base vertex must be positive (shift first)", a=cert.a)
    if fam.M1 is None or fam.ell is None:
        raise MissingIngredient("family needs M1 and ell", missing=[k for k in ("M1", "ell")
                                                                    if getattr(fam, k) is None])
    csc = 1.0 / math.sin(cert.theta)
    a1 = cert.a + 2.0 * cert.M0 * sup_E_small * csc
    N = n_tilde(cert.M0, a1, cert.theta, fam.M1, fam.ell)
    a_t = a1 + 1.0
    M_t = math.sqrt(4.0 * N * N + 1.0)
    th_t = math.pi - math.atan(2.0 * N)
    evidence = {"recipe": "a1 = a + 2 M0 supE csc(theta); N = M0 (1+a1)(1+max(csc, M1(ell+1)))"}
    if check:
        grid = np.concatenate([[0.0], np.geomspace(1e-4, 1e2, 15)]) if alpha_grid is None \
            else np.asarray(alpha_grid, float)
        scale = max(fam.base.norm, a_t, 1.0)
        s = _line_grid(scale, line_points)
        worst, witness = 0.0, None
        for alpha in grid:
            m = family_member(fam, float(alpha)).entries
            lam = a_t + 1j * s
            w = np.abs(lam) * resolvent_norms(m, lam)
            j = int(np.argmax(w))
            if w[j] > worst:
                worst, witness = float(w[j]), (float(alpha), complex(lam[j]))
            if w[j] > N:
                raise FamilyBoundViolated("||lam R(lam, A_alpha)|| exceeds N~ on Re lam = a~",
                                          alpha=float(alpha), lam=complex(lam[j]),
                                          value=float(w[j]), N_tilde=N)
        evidence.update({"alpha_grid": grid.tolist(), "line_points": int(s.size),
                         "max_observed": worst, "witness": witness})
    return FamilyCert(a_t, th_t, M_t, a1, N, float(fam.M1), float(fam.ell), float(alpha0),
                      float(sup_E_small), cert, evidence)
