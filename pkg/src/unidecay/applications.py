"""Model problems: a reaction-diffusion front and an anisotropic bidomain front.

Both reduce to a perturbation family A(alpha) = A(0) + E(alpha) of the
one-dimensional operator along the front, indexed by alpha = |xi|^2 for the
transverse wave number xi.  The families plug straight into the envelope
pipeline (build_ingredients, simple_zero_envelope, validate_envelope).
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla

from .decomposition import bounded_semigroup_sup
from .errors import (DConditionViolated, DegenerateParameters, SpectrumInClosedRightHalfPlane,
                     StabilityConditionFails)
from .operator_core import (SAFETY, GeneratorModel, PerturbationFamily, _mat, operator_norm, resolvent_norms,
                            spectrum, verify_zero_gap)
from .validator import CSV_HEADER, PASS_TOL, ValidationReport

__all__ = ["RDProblem", "nagumo_problem", "rd_operator", "delta0_rule", "rd_delta0", "rd_family",
           "choose_nu", "conductivity_tensors", "bidomain_symbol_constants", "g_extrema", "BidomainProblem",
           "bidomain_problem", "bidomain_operator", "h_operator", "modulation_residual", "bidomain_mb", "bidomain_family",
           "uniform_wave_report"]


def _pin(a, zero_tol=1e-2):
    """Shift the eigenvalue of a closest to 0 onto 0 with its rank-one spectral projection.

    Returns (a - lam0 Pi, lam0 Pi).  The discretised front has a translation
    eigenvalue of size ~h^2 instead of an exact zero; the shift restores it.
    zero_tol only has to sit well below the spectral gap of the front.
    """
    w, vr = sla.eig(a)
    j = int(np.argmin(np.abs(w)))
    lam0 = w[j]
    if abs(lam0) > zero_tol:
        raise DegenerateParameters("no eigenvalue near zero to pin", lambda0=complex(lam0))
    vl = sla.null_space((a - lam0 * np.eye(a.shape[0])).conj().T, rcond=1e-10)
    if vl.shape[1] != 1:
        # fall back on the left eigenvector from the transposed problem
        wl, vls = sla.eig(a.conj().T)
        vl = vls[:, [int(np.argmin(np.abs(wl - np.conj(lam0))))]]
    r = vr[:, [j]]
    l = vl[:, [0]]
    pi = r @ l.conj().T / (l.conj().T @ r)[0, 0]
    shift = lam0 * pi
    if np.isrealobj(a):
        shift = shift.real
    return a - shift, shift


def choose_nu(gen, fraction=0.9, zero_tol=1e-6):
    """nu = fraction x (distance from the imaginary axis of the nonzero spectrum)."""
    w = spectrum(gen).values
    rest = w[np.abs(w) > zero_tol]
    if rest.size == 0:
        raise DegenerateParameters("operator has no nonzero spectrum")
    gap = -float(np.max(rest.real))
    if gap <= 0:
        raise SpectrumInClosedRightHalfPlane("nonzero spectrum touches the closed right half-plane",
                                             abscissa=-gap)
    return fraction * gap


# ---------------------------------------------------------------- reaction-diffusion

@dataclass
class RDProblem:
    """u_t = D Delta u + c u_y + V(y) u on a strip, Dirichlet finite differences in y."""

    D: np.ndarray          # k x k diffusion matrix
    y: np.ndarray          # interior grid
    V: np.ndarray          # (n, k, k) linearised reaction along the front
    c: float = 0.0         # front speed (drift coefficient)
    d: float = None        # scalar reference diffusion, D = d I + J
    pin_zero_mode: bool = False
    label: str = "rd"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        self.V = np.asarray(self.V, dtype=float).reshape(len(self.y), self.k, self.k)
        if self.d is None:
            self.d = float(np.min(np.linalg.eigvalsh(0.5 * (self.D + self.D.T))))

    @property
    def k(self):
        return self.D.shape[0]

    @property
    def n(self):
        return len(self.y)

    @property
    def h(self):
        return float(self.y[1] - self.y[0])

    @property
    def J(self):
        return self.D - self.d * np.eye(self.k)


def nagumo_problem(a=0.3, d=1.1, n=128, tail=1e-8, pin_zero_mode=True, D=None):
    """Scalar Nagumo front f(u) = u(1-u)(u-a) with diffusion D (default d).

    The profile 1/(1+exp(-kappa s)) with kappa = 1/sqrt(2D) travels at speed
    c = (a - 1/2) sqrt(2D); the half-length L is set so the profile is within
    `tail` of its limits at the boundary.  d is the reference constant of the
    splitting D = d + J.
    """
    D = d if D is None else float(D)
    kap = 1.0 / math.sqrt(2.0 * D)
    c = (a - 0.5) * math.sqrt(2.0 * D)
    L = -math.log(tail) / kap
    y = np.linspace(-L, L, n + 2)[1:-1]
    h = 1.0 / (1.0 + np.exp(-kap * y))
    fp = -3.0 * h ** 2 + 2.0 * (1.0 + a) * h - a
    return RDProblem(D=[[D]], y=y, V=fp, c=c, d=d, pin_zero_mode=pin_zero_mode,
                     label="nagumo(a=%g, D=%g, d=%g, n=%d)" % (a, D, d, n))


def _rd_base(prob):
    if "base" in prob._cache:
        return prob._cache["base"]
    n, k, h = prob.n, prob.k, prob.h
    lap = (np.diag(np.full(n - 1, 1.0), -1) - 2.0 * np.eye(n) + np.diag(np.full(n - 1, 1.0), 1)) / h ** 2
    der = (np.diag(np.full(n - 1, 1.0), 1) - np.diag(np.full(n - 1, 1.0), -1)) / (2.0 * h)
    a = np.kron(lap, prob.D) + prob.c * np.kron(der, np.eye(k))
    for j in range(n):
        a[j * k:(j + 1) * k, j * k:(j + 1) * k] += prob.V[j]
    shift = np.zeros_like(a)
    if prob.pin_zero_mode:
        a, shift = _pin(a)
    prob._cache["base"] = (a, shift)
    return a, shift


def rd_operator(prob, xi_sq):
    """Discretised L(xi) = D d_y^2 + c d_y + V - |xi|^2 D (pinned if requested)."""
    a, _ = _rd_base(prob)
    return GeneratorModel(a - float(xi_sq) * np.kron(np.eye(prob.n), prob.D),
                          "%s[xi^2=%g]" % (prob.label, xi_sq), "rd-discretization")


def delta0_rule(J_norm, M0, d):
    """delta0 = 0.99 (1 - sqrt(rho)) with rho = ||J|| M0 / d; needs rho < 1."""
    rho = float(J_norm) * float(M0) / float(d)
    if not rho < 1.0:
        raise DConditionViolated("||D - dI|| >= d / M0", rho=rho, J_norm=float(J_norm), M0=float(M0), d=float(d))
    return 0.99 * (1.0 - math.sqrt(rho))


def rd_delta0(prob, M0=None, nu=None):
    """{delta0, q_slope, rho, M0} with M0 = sup_t ||e^{t L(0)}|| certified when not given."""
    if M0 is None:
        a = rd_operator(prob, 0.0).entries
        nu = choose_nu(a) if nu is None else nu
        M0 = bounded_semigroup_sup(a, nu).value
    j_norm = operator_norm(prob.J)
    delta0 = delta0_rule(j_norm, M0, prob.d)
    return {"delta0": delta0, "q_slope": delta0 * prob.d, "rho": j_norm * float(M0) / prob.d,
            "M0": float(M0)}


def rd_family(prob, nu=None):
    """A(alpha) = L(0) - alpha D, q(alpha) = delta0 d alpha, M1 = M0 / delta0, r = 0."""
    base = rd_operator(prob, 0.0).entries
    nu = choose_nu(base) if nu is None else nu
    sup = bounded_semigroup_sup(base, nu)
    rule = rd_delta0(prob, M0=sup.value)
    delta0, M0 = rule["delta0"], rule["M0"]
    big_d = np.kron(np.eye(prob.n), prob.D)
    q1 = delta0 * prob.d
    d_norm = operator_norm(prob.D)
    return PerturbationFamily(
        base=GeneratorModel(base, prob.label, "rd-discretization"),
        perturb=lambda al: -al * big_d,
        q1=q1,
        M1=M0 / delta0,
        ell=d_norm / q1,
        r=lambda al: 0.0,
        r_inverse=lambda y: math.inf,
        E0_limit=-big_d,
        sup_E0_bound=d_norm,
        label=prob.label,
        metadata={"delta0": delta0, "M0": M0, "M0_evidence": sup.to_dict(), "nu": nu,
                  "d": prob.d, "c": prob.c, "J_norm": operator_norm(prob.J)},
    )


# ---------------------------------------------------------------- bidomain

def _rot(g):
    return np.array([[math.cos(g), -math.sin(g)], [math.sin(g), math.cos(g)]])


def conductivity_tensors(nu1, nu2, gamma):
    """Rotated intra- and extracellular tensors (A_i, A_e)."""
    return _tensors(nu1, nu2, gamma)


def _tensors(nu1, nu2, gamma):
    if not (abs(nu1 + nu2) < 1 and abs(nu1 - nu2) < 1):
        raise DegenerateParameters("conductivities must satisfy |nu1 +- nu2| < 1", nu1=nu1, nu2=nu2)
    ai = np.diag([1.0 + nu1 + nu2, 1.0 + nu2 - nu1])
    r = _rot(gamma)
    ai = r @ ai @ r.T
    ai = 0.5 * (ai + ai.T)
    # A_e = diag(1 - nu1 - nu2, 1 - nu2 + nu1) rotated, formed as 2I - A_i so the sum is exact
    return ai, 2.0 * np.eye(2) - ai


def _quad_poly(a):
    """Coefficients (highest first) of s -> (s, 1) A (s, 1)^T."""
    return np.array([a[0, 0], a[0, 1] + a[1, 0], a[1, 1]])


def bidomain_symbol_constants(nu1, nu2, gamma):
    """Split Q_gamma(s, 1) = p(s) + g(s) by polynomial division.

    p(s) = N0^2 (s - eta1)^2 + eta0 and g(s) = (beta1 s + beta0)/(s^2 + 1).
    Returns a dict with N0_sq, eta1, eta0, beta1, beta0.
    """
    ai, ae = _tensors(nu1, nu2, gamma)
    num = np.polymul(_quad_poly(ai), _quad_poly(ae))
    quot, rem = np.polydiv(num, np.array([2.0, 0.0, 2.0]))
    quot = np.concatenate([np.zeros(3 - quot.size), quot])
    rem = np.concatenate([np.zeros(2 - rem.size), rem])
    A, B, C = quot
    if A <= 0:
        raise DegenerateParameters("leading coefficient of the symbol is not positive", N0_sq=float(A))
    # rem is the remainder over 2(s^2+1), so g = rem / (2(s^2+1))
    return {"N0_sq": float(A), "eta1": float(-B / (2 * A)), "eta0": float(C - B * B / (4 * A)),
            "beta1": float(rem[0] / 2.0), "beta0": float(rem[1] / 2.0)}


def g_extrema(beta1, beta0):
    """(inf g, sup g, g_Delta = (sup - inf)/2, g_bar = (sup + inf)/2) over the real line."""
    crit = [0.0] if beta1 == 0 else list(np.roots([beta1, 2.0 * beta0, -beta1]).real)
    vals = [0.0] + [float((beta1 * s + beta0) / (s * s + 1.0)) for s in crit]
    lo, hi = min(vals), max(vals)
    return {"inf": lo, "sup": hi, "g_delta": 0.5 * (hi - lo), "g_bar": 0.5 * (hi + lo),
            "sup_abs": max(abs(lo), abs(hi))}


@dataclass
class BidomainProblem:
    """Linearisation of the bidomain Allen-Cahn system about a planar front."""

    nu1: float
    nu2: float
    gamma: float
    a: float = 0.3         # bistable threshold in f(u) = u(1-u)(u-a)
    n: int = 128
    tail: float = 1e-8
    seam: float = 0.1      # fraction of the period used to blend V across the seam
    pin_zero_mode: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.const = bidomain_symbol_constants(self.nu1, self.nu2, self.gamma)
        self.gx = g_extrema(self.const["beta1"], self.const["beta0"])
        n0 = self.const["N0_sq"]
        self.kappa_front = 1.0 / math.sqrt(2.0 * n0)
        self.c = (0.5 - self.a) * math.sqrt(2.0 * n0)
        half = -math.log(self.tail) / self.kappa_front
        self.L = half / (1.0 - self.seam)     # the front region covers [-half, half]
        self.period = 2.0 * self.L
        self.y = -self.L + self.period * np.arange(self.n) / self.n
        self.k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.period / self.n)
        self.dk = 2.0 * np.pi / self.period
        self.V = self._potential(half)

    def _potential(self, half):
        a = self.a
        w = 1.0 / (1.0 + np.exp(self.kappa_front * self.y))
        v = -3.0 * w ** 2 + 2.0 * (1.0 + a) * w - a
        # linear blend from f'(0) = -a at y = half to f'(1) = a - 1 at y = -half (through the seam)
        out = np.abs(self.y) > half
        s = np.where(self.y > half, self.y - half, self.y + 2 * self.L - half)
        v[out] = -a + (a - 1.0 + a) * (s[out] / (2.0 * (self.L - half)))
        return v

    @property
    def label(self):
        return "bidomain(nu1=%g, nu2=%g, gamma=%g, a=%g, n=%d)" % (self.nu1, self.nu2, self.gamma, self.a, self.n)

    @property
    def F(self):
        if "F" not in self._cache:
            self._cache["F"] = np.fft.fft(np.eye(self.n), norm="ortho")
        return self._cache["F"]

    def fourier_multiplier(self, m):
        """F^H diag(m) F."""
        f = self.F
        return f.conj().T @ (np.asarray(m)[:, None] * f)

    def q_gamma(self, k1, k2):
        """Q_gamma(k1, k2) evaluated elementwise (0 at the origin)."""
        ai, ae = _tensors(self.nu1, self.nu2, self.gamma)
        k1 = np.asarray(k1, dtype=float)

        def quad(a):
            return a[0, 0] * k1 ** 2 + (a[0, 1] + a[1, 0]) * k1 * k2 + a[1, 1] * k2 ** 2

        qi, qe = quad(ai), quad(ae)
        tot = qi + qe
        safe = np.where(tot > 0, tot, 1.0)
        return np.where(tot > 0, qi * qe / safe, 0.0)

    def g(self, s):
        b1, b0 = self.const["beta1"], self.const["beta0"]
        return (b1 * s + b0) / (s * s + 1.0)

    def window_shift(self, xi2):
        """Grid mode closest to eta1 xi2."""
        return round(self.const["eta1"] * xi2 / self.dk) * self.dk

    def aligned_xi(self, m):
        """xi2 = m dk / eta1, for which the modulation identity is exact."""
        eta1 = self.const["eta1"]
        if eta1 == 0:
            return m * self.dk
        return m * self.dk / eta1


def bidomain_problem(nu1=0.05, nu2=0.02, gamma=math.pi / 6, a=0.3, n=128, **kw):
    """Default mildly anisotropic fixture."""
    return BidomainProblem(nu1=nu1, nu2=nu2, gamma=gamma, a=a, n=n, **kw)


def _bidomain_pin(prob):
    if "pin" not in prob._cache:
        a0 = prob.fourier_multiplier(-prob.q_gamma(prob.k, 0.0) + 1j * prob.c * prob.k) + np.diag(prob.V)
        shift = np.zeros_like(a0)
        if prob.pin_zero_mode:
            a0, shift = _pin(a0)
        prob._cache["pin"] = (a0, shift)
    return prob._cache["pin"]


def bidomain_operator(prob, xi2):
    """Discretised A(xi2) = -Q_gamma(d_y, xi2) + c d_y + V on a frequency window centred at eta1 xi2.

    A(xi2) = M_w (F^H diag(-Q_gamma(k + w, xi2) + i c (k + w)) F + diag V - pin) M_w^{-1}
    with M_w = diag(exp(i w y)) and w the grid mode nearest to eta1 xi2.
    """
    _, shift = _bidomain_pin(prob)
    w = prob.window_shift(xi2)
    kk = prob.k + w
    core = prob.fourier_multiplier(-prob.q_gamma(kk, xi2) + 1j * prob.c * kk) + np.diag(prob.V) - shift
    m = np.exp(1j * w * prob.y)
    return GeneratorModel((m[:, None] * core) * m.conj()[None, :], "%s[xi2=%g]" % (prob.label, xi2),
                          "bidomain-discretization", {"window_shift": w})


def h_operator(prob, xi2):
    """H(xi2) = -xi2^2 F^H diag(g(k/xi2 + eta1)) F - (eta0 xi2^2 - i c eta1 xi2) I."""
    c0 = prob.const
    n = prob.n
    if xi2 == 0:
        return np.zeros((n, n), dtype=complex)
    gk = prob.g(prob.k / xi2 + c0["eta1"])
    return (-xi2 ** 2 * prob.fourier_multiplier(gk)
            - (c0["eta0"] * xi2 ** 2 - 1j * prob.c * c0["eta1"] * xi2) * np.eye(n))


def modulation_residual(prob, xi2):
    """||A(xi2) - M (A(0) + H(xi2)) M^{-1}|| / ||A(xi2)|| with M = exp(i eta1 xi2 y)."""
    a0, _ = _bidomain_pin(prob)
    m = np.exp(1j * prob.const["eta1"] * xi2 * prob.y)
    rhs = (m[:, None] * (a0 + h_operator(prob, xi2))) * m.conj()[None, :]
    lhs = bidomain_operator(prob, xi2).entries
    return operator_norm(lhs - rhs) / operator_norm(lhs)


def bidomain_mb(prob, nu=None, samples=200):
    """M_b = 1.05 sup_{Re lam >= 0} |lam| ||R(lam, A(0))||, sampled on the boundary.

    lam R(lam) extends analytically across the semisimple zero and tends to
    I at infinity, so its sup over the half-plane is attained on the
    imaginary axis; small half-circles around 0 are added as a guard.
    """
    a0, _ = _bidomain_pin(prob)
    nu = choose_nu(a0) if nu is None else nu
    w = spectrum(a0).values
    bad = w[(np.abs(w) > 1e-8) & (w.real > -1e-10)]
    if bad.size:
        raise SpectrumInClosedRightHalfPlane("nonzero spectrum in the closed right half-plane",
                                             eigenvalues=[complex(x) for x in bad])
    verify_zero_gap(a0, nu)
    scale = operator_norm(a0)
    s = np.geomspace(1e-4 * nu, 1e3 * scale, samples)
    lams = np.concatenate([1j * s, -1j * s])
    th = np.linspace(-np.pi / 2, np.pi / 2, 17)
    for rad in (1e-3 * nu, 1e-2 * nu, 0.1 * nu, 0.5 * nu):
        lams = np.concatenate([lams, rad * np.exp(1j * th)])
    vals = np.abs(lams) * resolvent_norms(a0, lams)
    j = int(np.argmax(vals))
    return SAFETY * float(vals[j]), {"argmax": complex(lams[j]), "sampled": float(vals[j]),
                                     "points": int(lams.size), "nu": nu}


def bidomain_family(prob, branch="+", M_b=None, nu=None):
    """A_pm(alpha) = A(0) + E_pm(alpha) with E_pm(alpha) = H(pm sqrt alpha) -+ i c eta1 sqrt(alpha) I.

    q(alpha) = (eta0 - M_b g_Delta + g_bar) alpha must have positive slope.
    """
    if branch not in ("+", "-"):
        raise ValueError("branch must be '+' or '-'")
    a0, _ = _bidomain_pin(prob)
    nu = choose_nu(a0) if nu is None else nu
    if M_b is None:
        M_b, mb_ev = bidomain_mb(prob, nu)
    else:
        mb_ev = {"given": True}
    c0, gx = prob.const, prob.gx
    slope = c0["eta0"] - M_b * gx["g_delta"] + gx["g_bar"]
    if not slope > 0:
        raise StabilityConditionFails("eta0 <= M_b g_Delta - g_bar", eta0=c0["eta0"], M_b=M_b,
                                      g_delta=gx["g_delta"], g_bar=gx["g_bar"])
    sg = 1.0 if branch == "+" else -1.0
    n = prob.n
    zero_mode = np.zeros(n)
    zero_mode[prob.k == 0] = 1.0

    def perturb(al):
        if al == 0:
            return np.zeros((n, n), dtype=complex)
        rt = math.sqrt(al)
        gk = prob.g(sg * prob.k / rt + c0["eta1"])
        return -al * prob.fourier_multiplier(gk) - c0["eta0"] * al * np.eye(n)

    e0 = -prob.g(c0["eta1"]) * prob.fourier_multiplier(zero_mode) - c0["eta0"] * np.eye(n)
    sup_e = gx["sup_abs"] + c0["eta0"]
    return PerturbationFamily(
        base=GeneratorModel(a0, prob.label, "bidomain-discretization"),
        perturb=perturb,
        q1=slope,
        M1=M_b,
        ell=sup_e / slope,
        E0_limit=e0,
        sup_E0_bound=sup_e,
        label="%s[%s]" % (prob.label, branch),
        metadata={"M_b": M_b, "M_b_evidence": mb_ev, "nu": nu, "branch": branch, **c0, **gx,
                  "c": prob.c},
    )


# ---------------------------------------------------------------- wave-number sweep

def uniform_wave_report(operator, envelope, xi_grid, t_grid, tol=PASS_TOL):
    """Compare ||e^{t A(xi)}|| with the envelope at alpha = xi^2 over a wave-number grid.

    operator(xi) returns the matrix; envelope is a DecayEnvelope or a
    callable xi -> DecayEnvelope (for the two branches of the bidomain).
    """
    rows = []
    sup_measured = 0.0
    for xi in np.asarray(xi_grid, dtype=float):
        env = envelope(xi) if callable(envelope) and not hasattr(envelope, "log_value") else envelope
        a = _mat(operator(xi))
        al = xi * xi
        for t in np.asarray(t_grid, dtype=float):
            meas = operator_norm(sla.expm(t * a))
            sup_measured = max(sup_measured, meas)
            lv = env.log_value(al, t)
            ratio = math.exp(math.log(meas) - lv) if meas > 0 else 0.0
            rows.append((al, t, meas, math.exp(lv) if lv < 709 else math.inf, ratio))
    rows = np.array(rows, dtype=float)
    j = int(np.argmax(rows[:, 4]))
    summary = {"max_ratio": float(rows[j, 4]), "argmax": {"alpha": float(rows[j, 0]), "t": float(rows[j, 1])},
               "passed": bool(rows[j, 4] <= 1.0 + tol), "sup_measured": float(sup_measured),
               "xi_grid": [float(x) for x in xi_grid], "t_grid": [float(t) for t in t_grid],
               "header": CSV_HEADER}
    return ValidationReport(rows, summary)
