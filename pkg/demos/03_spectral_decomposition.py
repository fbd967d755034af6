"""Splitting a family at its zero eigenvalue.

The Riesz projection onto the zero eigenvalue of the base operator, moved to
the perturbed operator by a similarity U(alpha), block-diagonalizes the
family: a small leading block K on the zero eigenspace and a stable block
on the rest.
"""

import numpy as np

from unidecay.decomposition import build_decomposition, leading_block
from unidecay.fixtures import nonnormal_family

fam = nonnormal_family()
nu = fam.metadata["nu"]
print("family %s, gap nu = %.3f" % (fam.label, nu))

for alpha in (0.0, 1e-6, 1e-5):
    dec = build_decomposition(fam, nu, alpha)
    p = dec.P_alpha
    print("alpha = %.0e  ||P^2 - P|| = %.1e  ||U|| = %.4f  K = %s  max Re sigma(B~) = %.4f"
          % (alpha, np.linalg.norm(p @ p - p, 2), np.linalg.norm(dec.U, 2),
             np.array2string(dec.K.ravel().real, precision=3),
             np.linalg.eigvals(dec.B_tilde).real.max()))

print("leading block at alpha = 0 (K'(0)):", np.array2string(np.asarray(leading_block(fam, nu)).real.ravel(), precision=4))
print("eps0 = %.3e, eps1 = %.3e" % (dec.eps0, dec.eps1))
