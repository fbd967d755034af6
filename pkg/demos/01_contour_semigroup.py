"""Semigroups from resolvent contour integrals.

For a sectorial matrix the semigroup e^{tA} is the contour integral of
e^{lam t} R(lam, A) around the spectrum.  We certify a sector for a
non-normal Jordan block, integrate along the vertex-angled contour and the
shifted contour, and compare both with the matrix exponential.
"""

import numpy as np

from unidecay.contour import semigroup_via_contour
from unidecay.operator_core import operator_norm, semigroup_direct
from unidecay.sectorial import auto_sector

A = np.array([[-1.0, 1.0], [0.0, -1.0]])
cert = auto_sector(A, a=1.0)
print("sector: vertex a = %g, half-angle theta = %.4f, M0 = %.4f" % (cert.a, cert.theta, cert.M0))

for t in (0.1, 1.0, 5.0):
    direct = semigroup_direct(A, t).value
    vertex = semigroup_via_contour(A, cert, t, "vertex").value.value
    shifted = semigroup_via_contour(A, cert, t, "shifted", mu=-0.5).value.value
    print("t = %4.1f  ||T(t)|| = %.6f  vertex err %.1e  shifted err %.1e"
          % (t, operator_norm(direct), operator_norm(vertex - direct), operator_norm(shifted - direct)))
