"""A curve of singular covectors in six dimensions.

For n = 6 the limit set of a coordinate pair is a projective line rather
than a point.  We sample it, refine every node at t = 1e-3 and check
that the refined points still form a connected curve.
"""

import numpy as np

from charvar import limits as L
from charvar import params as prm
from charvar import singular as S

c = prm.sample(6, 0)
family = L.case1_family(c, 1, 2)
tr = S.surface_trace(c, 1e-3, family, grid=50)
pts = np.array([p.xi for p in tr.converged])
print(f"{len(pts)} of {len(tr.nodes)} nodes converged, node spacing {tr.spacing:.4f}")

steps = np.minimum(np.linalg.norm(pts[1:] - pts[:-1], axis=1),
                   np.linalg.norm(pts[1:] + pts[:-1], axis=1))
print(f"consecutive distances: min {steps.min():.4f}, max {steps.max():.4f}")
print("largest rank along the curve:", max(p.rank_cert.rank for p in tr.converged))
print("first coordinates stay O(t):", np.abs(pts[:, :2]).max())
