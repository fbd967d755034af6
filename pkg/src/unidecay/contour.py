"""Contour paths and operator-valued contour quadrature.

Line pieces (rays, arcs, vertical segments) are integrated with SciPy's
adaptive vector-valued Gauss-Kronrod driver (``quad_vec`` with the 15-point
rule).  Closed circles use the periodic trapezoid rule with node doubling,
which converges geometrically for integrands analytic near the circle.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad_vec

from .errors import (BadAngle, BadOrdering, EigenvalueOnContour, LambdaOnContour,
                     ToleranceNotMet)
from .operator_core import (TAU_SPEC, OperatorValue, SchurEnvelope, _mat,
                            operator_norm, resolvent_norms, resolvent_stack, semigroup_direct,
                            spectrum)

NODE_CAP = 20000          # function evaluations per line segment
GK_NODES = 15
CIRCLE_START = 64
CIRCLE_CAP = 2 ** 16


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ray:
    """{vertex + s e^{i angle}: start <= s <= stop}, traversed inward or outward."""

    vertex: complex
    angle: float
    start: float
    stop: float = math.inf
    inward: bool = False

    def point(self, s):
        return self.vertex + s * np.exp(1j * self.angle)

    @property
    def endpoints(self):
        near, far = self.point(self.start), self.point(self.stop)
        return (far, near) if self.inward else (near, far)

    def parametrization(self):
        d = np.exp(1j * self.angle)
        sign = -1.0 if self.inward else 1.0
        # u runs over [start, stop]; inward rays are traversed with reversed sign
        return (lambda u: self.vertex + u * d), (lambda u: sign * d), (self.start, self.stop)

    def breakpoints(self):
        if not math.isfinite(self.stop):
            return []
        pts, s = [], max(self.start, 1e-12) * 2.0
        while s < self.stop:
            pts.append(s)
            s *= 2.0
        return pts


@dataclass(frozen=True)
class Arc:
    """{center + radius e^{i z}: z from start_angle to end_angle}."""

    center: complex
    radius: float
    start_angle: float
    end_angle: float

    def point(self, z):
        return self.center + self.radius * np.exp(1j * z)

    @property
    def endpoints(self):
        return self.point(self.start_angle), self.point(self.end_angle)

    def parametrization(self):
        r, c = self.radius, self.center
        return ((lambda z: c + r * np.exp(1j * z)), (lambda z: 1j * r * np.exp(1j * z)),
                (self.start_angle, self.end_angle))

    def breakpoints(self):
        return list(np.linspace(self.start_angle, self.end_angle, 9)[1:-1])


@dataclass(frozen=True)
class VerticalSegment:
    """{mu + i s: -b <= s <= b}, traversed upward."""

    abscissa: float
    half_height: float

    def point(self, s):
        return self.abscissa + 1j * s

    @property
    def endpoints(self):
        return self.point(-self.half_height), self.point(self.half_height)

    def parametrization(self):
        mu = self.abscissa
        return (lambda s: mu + 1j * s), (lambda s: 1j), (-self.half_height, self.half_height)

    def breakpoints(self):
        return [0.0] if self.half_height > 0 else []


@dataclass(frozen=True)
class Circle:
    """Counterclockwise circle."""

    center: complex
    radius: float

    def point(self, z):
        return self.center + self.radius * np.exp(1j * z)


@dataclass(frozen=True)
class ContourPath:
    segments: tuple
    counterclockwise: bool = True
    info: dict = field(default_factory=dict)

    @property
    def closed(self):
        return len(self.segments) == 1 and isinstance(self.segments[0], Circle)

    def connected(self, tol=1e-12):
        if self.closed:
            return True
        for s1, s2 in zip(self.segments, self.segments[1:]):
            end, start = s1.endpoints[1], s2.endpoints[0]
            if abs(end - start) > tol * max(1.0, abs(end)):
                return False
        return True

    def truncated(self, r_max):
        """Copy with every ray stopped at radius r_max from its vertex."""
        segs = tuple(replace(s, stop=max(r_max, 2.0 * s.start)) if isinstance(s, Ray) else s
                     for s in self.segments)
        info = dict(self.info)
        info["r_max"] = r_max
        return ContourPath(segs, self.counterclockwise, info)


def _check_angle(phi):
    if not (math.pi / 2 < phi < math.pi):
        raise BadAngle("angle must lie in (pi/2, pi)", phi=phi)


def sector_path(a, phi, eps, r_max=math.inf):
    """Vertex path: inward ray at -phi, arc of radius eps, outward ray at +phi."""
    _check_angle(phi)
    if eps <= 0:
        raise ValueError("eps must be positive")
    segs = (Ray(a, -phi, eps, r_max, inward=True), Arc(a, eps, -phi, phi), Ray(a, phi, eps, r_max))
    return ContourPath(segs, True, {"kind": "vertex", "a": a, "phi": phi, "eps": eps, "r_max": r_max})


def truncated_sector_path(a, mu, phi, r_max=math.inf):
    """Shifted path: rays from radius c = (a-mu)|sec phi| joined by the segment Re = mu."""
    _check_angle(phi)
    if mu >= a:
        raise BadOrdering("need mu < a", a=a, mu=mu)
    b = (a - mu) * abs(math.tan(phi))
    c = (a - mu) * abs(1.0 / math.cos(phi))
    segs = (Ray(a, -phi, c, r_max, inward=True), VerticalSegment(mu, b), Ray(a, phi, c, r_max))
    return ContourPath(segs, True, {"kind": "shifted", "a": a, "mu": mu, "phi": phi, "b": b,
                                    "c": c, "r_max": r_max})


def circle_path(center, radius):
    if radius <= 0:
        raise ValueError("radius must be positive")
    return ContourPath((Circle(complex(center), float(radius)),), True,
                       {"kind": "circle", "center": complex(center), "radius": float(radius)})


def ray_truncation(t, tol, M0, phi, excess=0.0):
    """Radius beyond which |e^{lam t}| M0 / |lam - a| is below tol relative to the value.

    ``excess`` is (a - s(A)) t, the log-gap between the integrand scale on the
    path and the size of the result.
    """
    return max(10.0, (math.log(1.0 / tol) + math.log(1.0 + M0) + max(excess, 0.0))
               / (t * abs(math.cos(phi))))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    value: OperatorValue
    error: float
    nodes: int


def _segment_integral(seg, integrand, epsabs, epsrel):
    z, dz, (lo, hi) = seg.parametrization()
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("ray must be truncated before integration")

    def f(u):
        return integrand(z(u)) * dz(u)

    pts = [p for p in seg.breakpoints() if lo < p < hi]
    limit = max(NODE_CAP // GK_NODES, 1)
    val, err, info = quad_vec(f, lo, hi, epsabs=epsabs, epsrel=epsrel, norm="2",
                              quadrature="gk15", limit=limit, points=pts or None, full_output=True)
    if info.status == 1:
        raise ToleranceNotMet("node cap reached on %s" % type(seg).__name__,
                              achieved_error=float(err), nodes=int(info.neval))
    # inward rays carry the reversed orientation in dz
    return np.asarray(val, dtype=complex), float(err), int(info.neval)


def _trapezoid_circle(circ, batch, tol, atol=0.0, start=CIRCLE_START, cap=CIRCLE_CAP):
    """(1/2 pi i) closed-circle integral of batch(lam) by node doubling."""
    def total(theta):
        lam = circ.center + circ.radius * np.exp(1j * theta)
        w = circ.radius * np.exp(1j * theta)       # dlam / (i dtheta)
        return np.tensordot(w, batch(lam), axes=(0, 0))

    n = start
    acc = total(2 * np.pi * np.arange(n) / n)
    prev = acc / n
    while True:
        new = total(2 * np.pi * (np.arange(n) + 0.5) / n)
        acc = acc + new
        n *= 2
        cur = acc / n
        err = float(np.linalg.norm(cur - prev))
        if err <= max(atol, tol * max(np.linalg.norm(cur), 1.0 if atol == 0 else 0.0)):
            return cur, err, n
        if n >= cap:
            raise ToleranceNotMet("trapezoid node cap reached", achieved_error=err, nodes=n)
        prev = cur


def contour_integral(path, integrand, tol=1e-10, atol=None, batch=None):
    """(1/2 pi i) integral of an operator-valued integrand along the path.

    ``integrand`` maps a scalar lambda to an n x n array.  ``batch``, if
    given, maps an array of lambda to a stacked array and is used on circles.
    Success means the estimated error is at most max(atol, tol * ||value||);
    when atol is None it defaults to tol (absolute floor of tol).
    """
    atol = tol if atol is None else atol
    if path.closed:
        circ = path.segments[0]
        if batch is None:
            def batch(lams):
                return np.stack([np.asarray(integrand(l), dtype=complex) for l in lams])
        val, err, nodes = _trapezoid_circle(circ, batch, tol, atol)
        return QuadratureResult(OperatorValue(val, {"path": path.info}), err, nodes)
    segs = path.segments
    scale = None
    for _ in range(3):
        eabs = atol / len(segs) if scale is None else max(atol, tol * scale) / len(segs)
        erel = tol if scale is None else 1e-15
        total, err, nodes = 0.0, 0.0, 0
        for s in segs:
            v, e, k = _segment_integral(s, integrand, eabs, erel)
            total, err, nodes = total + v, err + e, nodes + k
        total = total / (2j * math.pi)
        err = err / (2 * math.pi)
        vnorm = float(np.linalg.norm(total))
        if err <= max(atol, tol * vnorm):
            return QuadratureResult(OperatorValue(total, {"path": path.info}), err, nodes)
        if scale is not None and vnorm >= scale:
            break
        scale = vnorm
    raise ToleranceNotMet("contour quadrature did not reach tolerance", achieved_error=err,
                          nodes=nodes, requested=max(atol, tol * vnorm))


# ---------------------------------------------------------------------------
# Semigroups, projections and auxiliary operators
# ---------------------------------------------------------------------------

def default_phi(theta):
    """Path angle halfway between pi/2 and the certified sector angle."""
    return 0.5 * (math.pi / 2 + theta)


def _roundoff_floor(cert, a, phi, t, path):
    """256 eps times a bound on (1/2 pi) int |e^{lam t}| ||R(lam, A)|| |dlam| on the vertex path.

    Uses ||R(lam, A)|| <= M0/|lam - a| on the sector boundary: the arc of
    radius 1/t gives at most 2 phi M0 e^{a t + 1}, the two rays
    2 M0 e^{a t} E1(|cos phi|).  The shifted path gets no floor (its vertical
    segment leaves the sector, where this resolvent bound does not apply).
    """
    from scipy.special import exp1

    if path.info.get("kind") != "vertex":
        return 0.0
    mass = cert.M0 * math.exp(a * t) * (2 * phi * math.e + 2 * exp1(abs(math.cos(phi))))
    return 256 * np.finfo(float).eps * mass / (2 * math.pi)


def semigroup_via_contour(gen, cert, t, variant="vertex", mu=None, tol=1e-10, phi=None):
    """e^{tA} as (1/2 pi i) int e^{lam t} R(lam, A) dlam on a sector path.

    variant "vertex" uses the arc of radius 1/t around the vertex a;
    variant "shifted" uses the vertical segment at abscissa mu.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    a_mat = _mat(gen)
    n = a_mat.shape[0]
    a = cert.a
    phi = default_phi(cert.theta) if phi is None else phi
    s_abs = spectrum(a_mat).abscissa
    if variant == "vertex":
        path = sector_path(a, phi, 1.0 / t)
    elif variant == "shifted":
        if mu is None:
            mu = 0.5 * (a + s_abs)
        if mu <= s_abs:
            raise BadOrdering("shifted path needs mu above the spectral abscissa", mu=mu,
                              abscissa=s_abs)
        path = truncated_sector_path(a, mu, phi)
    else:
        raise ValueError("variant must be 'vertex' or 'shifted'")
    r_max = ray_truncation(t, tol, cert.M0, phi, (a - s_abs) * t)
    path = path.truncated(r_max)
    eye = np.eye(n, dtype=complex)

    def integrand(lam):
        return np.exp(lam * t) * np.linalg.solve(lam * eye - a_mat, eye)

    # relative tol cannot beat round-off on the integrand mass; floor the error there
    res = contour_integral(path, integrand, tol=tol, atol=_roundoff_floor(cert, a, phi, t, path))
    return QuadratureResult(OperatorValue(res.value.value, {"t": t, "variant": variant,
                                                            "path": path.info}),
                            res.error, res.nodes)


def _distance_to_circle(vals, center, radius):
    return np.abs(np.abs(np.asarray(vals) - center) - radius)


def riesz_projection(gen, circle, tol=1e-12):
    """P = (1/2 pi i) closed integral of R(lam, A) over the circle."""
    a = _mat(gen)
    circ = circle.segments[0] if isinstance(circle, ContourPath) else circle
    vals = spectrum(a).values
    dist = _distance_to_circle(vals, circ.center, circ.radius)
    thr = TAU_SPEC * max(np.linalg.norm(a, 2), 1.0)
    if np.any(dist <= thr):
        j = int(np.argmin(dist))
        raise EigenvalueOnContour("eigenvalue on the projection circle", eigenvalue=complex(vals[j]),
                                  distance=float(dist[j]))

    def batch(lams):
        out = np.empty((lams.size,) + a.shape, dtype=complex)
        for sl, stack in resolvent_stack(a, lams):
            out[sl] = stack
        return out

    val, err, nodes = _trapezoid_circle(circ, batch, tol)
    inside = int(np.sum(np.abs(vals - circ.center) < circ.radius))
    return OperatorValue(val, {"circle": (circ.center, circ.radius), "error": err, "nodes": nodes,
                               "enclosed": inside})


def vertical_segment_sup(gen, mu, b, samples=401):
    """max over |s| <= b of ||R(mu + i s, A)||, with one local refinement."""
    from scipy.optimize import minimize_scalar

    a = _mat(gen)
    grid = np.linspace(-b, b, samples)
    extra = spectrum(a).values.imag
    grid = np.unique(np.concatenate([grid, extra[np.abs(extra) <= b], [0.0]]))
    vals = resolvent_norms(a, mu + 1j * grid)
    j = int(np.argmax(vals))
    best, arg = float(vals[j]), float(grid[j])
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    if hi > lo:
        def neg(s):
            return -float(resolvent_norms(a, [mu + 1j * s])[0])
        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(b, 1.0)})
        if -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    return SegmentSup(best, arg, int(grid.size))


@dataclass(frozen=True)
class SegmentSup:
    value: float
    argmax: float
    samples: int

    def __float__(self):
        return self.value


def v_operator(gen, t, mu, phi, a, via="quadrature", tol=1e-10):
    """V(t, mu, phi) = int_{-b}^{b} e^{i s t} R(mu + i s, A) ds, b = (a - mu)|tan phi|.

    The convolution route evaluates the same operator as
    int_0^inf 2 sin(b (t - xi)) / (t - xi) e^{-mu xi} e^{xi A} dxi.
    """
    _check_angle(phi)
    if mu >= a:
        raise BadOrdering("need mu < a", a=a, mu=mu)
    am = _mat(gen)
    n = am.shape[0]
    eye = np.eye(n, dtype=complex)
    b = (a - mu) * abs(math.tan(phi))
    if via == "quadrature":
        def f(s):
            return np.exp(1j * s * t) * np.linalg.solve((mu + 1j * s) * eye - am, eye)
        pts = [0.0] if b > 0 else None
        val, err, info = quad_vec(f, -b, b, epsabs=tol, epsrel=tol, norm="2", quadrature="gk15",
                                  limit=NODE_CAP // GK_NODES, points=pts, full_output=True)
        if info.status == 1:
            raise ToleranceNotMet("node cap reached on vertical segment", achieved_error=err)
        return OperatorValue(val, {"t": t, "mu": mu, "phi": phi, "b": b, "via": via})
    if via != "convolution":
        raise ValueError("via must be 'quadrature' or 'convolution'")
    env = SchurEnvelope.of(am)
    if env.s >= mu:
        raise BadOrdering("convolution route needs mu above the spectral abscissa",
                          mu=mu, abscissa=env.s)
    # truncate where the certified envelope of e^{-mu xi}||T(xi)|| drops below tol
    xi_r = env.decreasing_from(-mu)
    xi_max = max(2.0 * xi_r, t + 1.0, 1.0)
    while env.log_value(xi_max, -mu) + math.log(2.0 * b + 1.0) > math.log(tol * 1e-2):
        xi_max *= 1.5
    shifted = am - mu * eye

    def g(xi):
        return 2.0 * b * np.sinc(b * (t - xi) / math.pi) * semigroup_direct(shifted, xi).value

    step = math.pi / max(b, 1e-300)
    pts = sorted({p for p in [t] + list(np.arange(step, xi_max, step)[:400]) if 0 < p < xi_max})
    val, err, info = quad_vec(g, 0.0, xi_max, epsabs=tol, epsrel=tol, norm="2", quadrature="gk15",
                              limit=max(NODE_CAP // GK_NODES, len(pts) + 10), points=pts or None,
                              full_output=True)
    if info.status == 1:
        raise ToleranceNotMet("node cap reached on convolution integral", achieved_error=err)
    return OperatorValue(val, {"t": t, "mu": mu, "phi": phi, "b": b, "via": via,
                               "xi_max": xi_max})


def f_tilde(gen_alpha, lam, nu, tol=1e-12):
    """(1/2 pi i) closed integral over |zeta| = nu/2 of (lam - zeta)^{-1} R(zeta, A_alpha)."""
    a = _mat(gen_alpha)
    r = nu / 2
    if abs(abs(lam) - r) <= 1e-12 * max(r, 1.0):
        raise LambdaOnContour("lambda lies on the circle |zeta| = nu/2", lam=lam, nu=nu)
    vals = spectrum(a).values
    dist = _distance_to_circle(vals, 0.0, r)
    if np.any(dist <= TAU_SPEC * max(np.linalg.norm(a, 2), 1.0)):
        raise EigenvalueOnContour("eigenvalue on |zeta| = nu/2",
                                  eigenvalue=complex(vals[int(np.argmin(dist))]))

    def batch(zs):
        out = np.empty((zs.size,) + a.shape, dtype=complex)
        for sl, stack in resolvent_stack(a, zs):
            out[sl] = stack / (lam - zs[sl])[:, None, None]
        return out

    # the integrand has a pole at lam: convergence rate set by its distance to the circle
    val, err, nodes = _trapezoid_circle(Circle(0j, r), batch, tol)
    return OperatorValue(val, {"lambda": complex(lam), "nu": nu, "error": err, "nodes": nodes})


__all__ = ["Ray", "Arc", "VerticalSegment", "Circle", "ContourPath", "QuadratureResult",
           "sector_path", "truncated_sector_path", "circle_path", "ray_truncation",
           "contour_integral", "semigroup_via_contour", "riesz_projection",
           "vertical_segment_sup", "v_operator", "f_tilde", "default_phi", "operator_norm"]
