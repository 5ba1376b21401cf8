"""Singular points of the characteristic variety in five dimensions.

Draw a parameter set, list the limit points on projective space, and
follow each one to an actual rank-3 covector of the scaled symbol.
Run with ``python3 demos/count_n5.py [seed]``.
"""

import sys

import numpy as np

from charvar import limits as L
from charvar import params as prm
from charvar import singular as S

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
c = prm.sample(5, seed)
print(f"parameters: n=5, seed={seed}, {prm.n_free(5)} free entries")
print("generic pair conditions:", "ok" if prm.check_all_pairs(c).passed else "violated")

pred = L.predict_count(c)
print(f"\nlimit set: alpha={pred.alpha} beta={pred.beta} gamma={pred.gamma}")
print(f"predicted number of singular points: {pred.total}")

# Shrinking t moves every detected point toward its limit.  Far from the
# limit a pair of points may merge and vanish, so the count can be short
# at the largest t.
print("\n      t   detected   max drift")
for t in (1e-2, 1e-3, 1e-4, 1e-5):
    res = S.count_detected(c, t)
    drift = max(p.seed_distance for p in res.points)
    print(f"{t:7.0e}   {res.count:8d}   {drift:.2e}")

res = S.count_detected(c, 1e-4)
p = res.points[0]
np.set_printoptions(precision=4, suppress=True)
print("\none point at t=1e-4:", p.xi)
print("  limit point:      ", L.unit(p.seed.coords))
print("  rank of the symbol:", p.rank_cert.rank)
