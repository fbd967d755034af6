"""Sector certificates and their conversions.

A resolvent bound on a half-plane turns into a sector certificate, and a
bounded perturbation moves the vertex.  Each certificate is re-checked by
sampling the resolvent on the sector boundary.
"""

import numpy as np

from unidecay.sectorial import (certify_sector, estimate_halfplane_bound, halfplane_to_sector,
                                perturbed_sector)

A = np.array([[-1.0, 2.0], [0.0, -2.0]])

hb = estimate_halfplane_bound(A, 0.5)
print("half-plane Re lam > 0.5: sampled sup ||lam R|| = %.4f, certified N0 = %.4f" % (hb.sampled, hb.N0))

cert = halfplane_to_sector(0.5, hb.N0)
print("converted sector: a = %g, theta = %.4f, M0 = %.4f" % (cert.a, cert.theta, cert.M0))

check = certify_sector(A, cert.a, cert.theta)
print("boundary re-check M0 = %.4f (<= %.4f)" % (check.M0, cert.M0))

W = np.array([[0.0, 0.3], [0.3, 0.0]])
moved = perturbed_sector(cert, np.linalg.norm(W, 2))
print("after a perturbation of norm 0.3: a = %.4f, M0 = %.4f" % (moved.a, moved.M0))
