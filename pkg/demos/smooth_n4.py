"""In four dimensions the scaled characteristic variety is smooth.

We sample points of det P = 0 on random great circles of the unit sphere
and look at the gradient of the determinant there.  A singular point would
show up as a vanishing gradient.  The zero parameter set is shown for
contrast: its variety contains coordinate lines where the rank drops.
"""

from charvar import params as prm
from charvar import singular as S

for seed in range(3):
    rep = S.smooth_scan_n4(prm.sample(4, seed), 1e-3, samples=5000, seed=seed)
    print(f"seed {seed}: {rep.samples} points on {rep.circles} circles, "
          f"min |grad det| / t = {rep.min_grad_over_t:.3e}, singular: {rep.singular_found}")

zero = S.smooth_scan_n4(prm.sample(4, 0, dist="point"), 1e-3, samples=200, check=False)
print(f"\nc = 0: singular found = {zero.singular_found}, worst point {zero.worst_point}")
