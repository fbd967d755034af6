"""A negative definite perturbation that destabilizes.

A0 has a simple zero eigenvalue and every other eigenvalue well inside the
left half-plane.  Adding the symmetric negative definite W0 still pushes an
eigenvalue to the right: negative definiteness alone does not give decay.
The sweep over s in [1, 2] shows the unstable eigenvalue persisting.
"""

from unidecay.validator import destabilization_example, multiplication_sweep

for b0 in (-0.4, -0.3, -0.25):
    rep = destabilization_example(b0)
    print("b0 = %+.2f  zero simple %s  W0 max eigenvalue %.4f  max Re sigma(A0 + W0) = %.5f"
          % (b0, rep.zero_simple, rep.W0_max_eig, rep.max_re_perturbed))

sw = multiplication_sweep(-0.3)
print("s-sweep positive hull %s, negative hull %s" % (sw.positive_hull, sw.negative_hull))
