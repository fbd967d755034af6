"""Travelling fronts: reaction-diffusion and anisotropic bidomain.

The Nagumo front linearization has a translation eigenvalue at zero; adding
transverse Fourier modes xi gives the family A + xi^2 D.  The bidomain
front has the same structure with an anisotropic symbol.  For each we build
the family, certify an envelope, and sample the weighted sup over xi.
The whole script takes a minute or two.
"""

from unidecay.applications import (bidomain_family, bidomain_operator, bidomain_problem,
                                   nagumo_problem, rd_family, rd_operator, uniform_wave_report)
from unidecay.envelope import build_ingredients, simple_zero_envelope, uniform_envelope

rd = nagumo_problem(n=128)
fam = rd_family(rd)
env = uniform_envelope(build_ingredients(fam, fam.metadata["nu"]), 0.5)
rep = uniform_wave_report(lambda xi: rd_operator(rd, xi * xi), env, [0.0, 0.1, 0.5, 2.0], [0.0, 1.0, 10.0, 50.0])
print("reaction-diffusion: log prefactor %.4g, sup measured %.4f, passed %s"
      % (env.log_prefactor, rep.summary["sup_measured"], rep.summary["passed"]))

bd = bidomain_problem()
print("bidomain symbol constants:", {k: round(v, 6) for k, v in bd.const.items()})
bfam = bidomain_family(bd, "+")
benv = simple_zero_envelope(build_ingredients(bfam, bfam.metadata["nu"]), 0.5)
rep = uniform_wave_report(lambda xi: bidomain_operator(bd, xi), benv, [0.0, 0.05, 0.3], [0.0, 1.0, 20.0])
print("bidomain: log prefactor %.4g, sup measured %.4f, passed %s"
      % (benv.log_prefactor, rep.summary["sup_measured"], rep.summary["passed"]))
