"""An envelope for the simplest family, and what validation measures.

A = diag(0, -1, -2) with E(alpha) = -alpha I decays like e^{-alpha t}.  The
certified envelope has the rate kappa alpha; its prefactor is carried as a
logarithm because it is astronomically large.  Validation samples
||T_alpha(t)|| on a grid and reports the worst ratio to the envelope.
"""

import numpy as np

from unidecay.envelope import build_ingredients, refined_envelope, simple_zero_envelope
from unidecay.fixtures import diagonal_family
from unidecay.validator import validate_envelope

fam = diagonal_family()
ing = build_ingredients(fam, fam.metadata["nu"])
print("M2 = %.4f  M3 = %.4f  eps1 = %.3e" % (ing.M2, ing.M3, ing.eps1))

env = simple_zero_envelope(ing, 0.5)
print("uniform prefactor: log = %.4g (tag %s)" % (env.log_prefactor, env.tag))

alphas = np.geomspace(1e-6, 1.0, 12)
ts = np.linspace(0.0, 50.0, 26)
rep = validate_envelope(fam, env, alphas, ts)
print("certified envelope: passed %s, max ratio %.3e" % (rep.passed, rep.max_ratio))

fine = refined_envelope(env, ing)
rep = validate_envelope(fam, fine, alphas, ts)
print("refined with alpha-dependent pieces: passed %s, max ratio %.3e" % (rep.passed, rep.max_ratio))

bad = validate_envelope(fam, fine.scaled(0.5 * rep.max_ratio), alphas, ts)
print("prefactor cut below the measured sup: passed %s, witness %s" % (bad.passed, bad.summary["witness"]))
