"""From parameters to a local embedding and back.

Parameters fix a second fundamental form h.  Its Gauss curvature defines a
metric g in normal coordinates, and a cubic correction makes the induced
metric of the embedding agree with g to second order.  Linearizing at that
embedding gives a first-order system whose coefficients at the origin are
the parameters again.
"""

import numpy as np

from charvar import embed as E
from charvar import params as prm
from charvar import reduce as R

n = 4
c = prm.sample(n, 5)
h, curv, g, jet = E.pipeline(c)
A, B, C, D = E.counts(n)
print(f"n={n}: {A} equations, {B} unknowns, {C} ordered, surplus {D}")
print("selected system condition number: %.2f" % jet.selection_cond)

rep = E.verify_order2(jet, g)
print(f"metric mismatch near 0: max 2-jet {rep.max_jet:.1e}, decays like |x|^{rep.exponent:.2f}")

closure = R.closure_at_origin(c, jet)
print(f"\nA^k(0) against the parameters: {closure.a_error:.1e}; |B(0)| = {closure.b_max:.1e}")

x = np.array([3e-3, -2e-3, 1e-3, 4e-3])
rt = R.manufactured_roundtrip(jet, x, seed=1)
print(f"round trip at |x| = {np.linalg.norm(x):.1e}: normal part {rt.normal_error:.1e}, "
      f"tangential system {rt.tangential_residual:.1e}")
