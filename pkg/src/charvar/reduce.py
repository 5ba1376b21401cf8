"""Reduction of the linearized embedding equations to an n x n first order system.

For an embedding ``u`` and a perturbation ``v`` the linearized equations read

    d_i u . d_j v + d_j u . d_i v = f_ij.

Write ``v_i = d_i u . v`` for the tangential part and ``v^{n+mu} = v . N_mu``
for the normal part.  The off-diagonal equations are algebraic in the normal
part and are solved with the inverse of ``H`` (rows ``H_ij`` for ``i < j``).
The diagonal equations then become

    sum_k A^k d_k V + B V = F,     V = (v_1, ..., v_n).

Everything is evaluated pointwise from the polynomial jet with exact
derivatives.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .embed import pipeline
from .errors import HNotInvertible, IllConditionedFrame, UsageError
from .poly import Poly
from .symbol import coefficient_matrices

MAX_RADIUS = 0.1
FRAME_COND_MAX = 1e8
H_COND_MAX = 1e10


class JetCalculus:
    """Cached first and second derivatives of a jet's components."""

    def __init__(self, jet):
        self.jet = jet
        self.n = jet.n
        self.u = jet.polys()
        self.D = len(self.u)
        self.du = [[p.deriv(i) for p in self.u] for i in range(self.n)]
        self.ddu = [[[p.deriv(j) for p in self.du[i]] for j in range(self.n)]
                    for i in range(self.n)]

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        du = np.array([[p(x) for p in row] for row in self.du])
        ddu = np.array([[[p(x) for p in col] for col in row] for row in self.ddu])
        return du, ddu


@dataclass
class FrameData:
    x: np.ndarray
    tangent: np.ndarray  # (n, D): row i is d_i u
    normal: np.ndarray   # (N, D): orthonormal normal frame
    p: np.ndarray        # induced metric
    Gamma: np.ndarray    # Gamma[i, j, k] = Gamma_ij^k
    Hmat: np.ndarray     # (N, N): row tau_ij - 1 holds H_ij^mu
    Hdiag: np.ndarray    # (n, N): row i holds H_ii^mu
    tangent_cond: float
    h_cond: float

    @property
    def n(self):
        return self.tangent.shape[0]

    def orthogonality_residual(self):
        """Largest deviation from ``N.du = 0`` and ``N.N = I``, relative to ``|du|``."""
        scale = max(1.0, float(np.max(np.linalg.norm(self.tangent, axis=1))))
        a = float(np.max(np.abs(self.normal @ self.tangent.T))) / scale
        b = float(np.max(np.abs(self.normal @ self.normal.T - np.eye(len(self.normal)))))
        return max(a, b)

    def h_inverse(self):
        if not np.isfinite(self.h_cond) or self.h_cond > H_COND_MAX:
            raise HNotInvertible(f"H(x) has condition number {self.h_cond:.3e}",
                                 detail={"cond": self.h_cond})
        return np.linalg.inv(self.Hmat)

    def coupling(self):
        """``K[i, tau] = sum_mu H_ii^mu H^{mu tau}``."""
        return self.Hdiag @ self.h_inverse()


def _calculus(jet):
    return jet if isinstance(jet, JetCalculus) else JetCalculus(jet)


def frame_at(jet, x):
    """Tangent vectors, normal frame, metric, Christoffel symbols and ``H`` at ``x``.

    ``jet`` may be an :class:`~charvar.embed.EmbeddingJet` or a prebuilt
    :class:`JetCalculus` (cheaper when many points are evaluated).
    """
    calc = _calculus(jet)
    n, D = calc.n, calc.D
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != n:
        raise UsageError(f"point has {x.size} coordinates, jet has n={n}")
    if np.linalg.norm(x) > MAX_RADIUS:
        raise UsageError(f"|x| = {np.linalg.norm(x):.3g} exceeds the local domain {MAX_RADIUS}")
    du, ddu = calc.evaluate(x)
    s = np.linalg.svd(du, compute_uv=False)
    tcond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    if tcond > FRAME_COND_MAX:
        raise IllConditionedFrame(f"tangent vectors nearly dependent (cond {tcond:.3e})",
                                  detail={"cond": tcond})

    # project e_{n+1}, ..., e_D off the tangent space, then Gram-Schmidt
    Q, _ = np.linalg.qr(du.T)
    normal = []
    for mu in range(n, D):
        w = np.zeros(D)
        w[mu] = 1.0
        for _ in range(2):
            w = w - Q @ (Q.T @ w)
            for e in normal:
                w = w - (e @ w) * e
        nrm = np.linalg.norm(w)
        if nrm < 1e-8:
            raise IllConditionedFrame("normal frame construction lost rank",
                                      detail={"mu": mu - n + 1})
        normal.append(w / nrm)
    normal = np.array(normal)

    p = du @ du.T
    pinv = np.linalg.inv(p)
    # Gamma_ij^k = p^{kl} d_ij u . d_l u
    Gamma = np.einsum("kl,ijl->ijk", pinv, ddu @ du.T)
    second = ddu - np.einsum("ijk,kd->ijd", Gamma, du)
    Hfull = second @ normal.T  # (n, n, N)
    pairs = list(itertools.combinations(range(n), 2))
    Hmat = np.array([Hfull[i, j] for i, j in pairs])
    Hdiag = np.array([Hfull[i, i] for i in range(n)])
    hs = np.linalg.svd(Hmat, compute_uv=False)
    hcond = float(hs[0] / hs[-1]) if hs[-1] > 0 else float("inf")
    return FrameData(x, du, normal, p, Gamma, Hmat, Hdiag, tcond, hcond)


@dataclass
class ReducedSystem:
    x: np.ndarray
    A: np.ndarray  # A[k] is the matrix multiplying d_k V
    B: np.ndarray
    F: np.ndarray
    h_cond: float

    def residual(self, V, dV):
        """``sum_k A^k d_k V + B V - F`` with ``dV[i, k] = d_k v_i``."""
        return np.einsum("kij,jk->i", self.A, dV) + self.B @ V - self.F

    def to_json(self):
        return {"x": self.x.tolist(), "A": self.A.tolist(), "B": self.B.tolist(),
                "F": None if self.F is None else self.F.tolist(), "h_cond": self.h_cond}


def _pair_index(n):
    idx = -np.ones((n, n), dtype=int)
    for t, (k, l) in enumerate(itertools.combinations(range(n), 2)):
        idx[k, l] = idx[l, k] = t
    return idx


def reduced_system(frame, f=None):
    """Coefficients ``A^k, B, F`` of the reduced system at the frame's point.

    ``f`` is the symmetric ``n x n`` array of data values at that point; when
    omitted ``F`` is returned as ``None``.
    """
    n = frame.n
    K = frame.coupling()
    idx = _pair_index(n)
    A = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                A[k, i, j] = float(i == k) if j == k else -0.5 * K[i, idx[j, k]]
    pairs = list(itertools.combinations(range(n), 2))
    Gpairs = np.array([frame.Gamma[k, l] for k, l in pairs])  # (N, n)
    B = -np.array([frame.Gamma[i, i] for i in range(n)]) + K @ Gpairs
    F = None
    if f is not None:
        f = np.asarray(f, dtype=float)
        fpairs = np.array([f[k, l] for k, l in pairs])
        F = 0.5 * (np.diag(f) - K @ fpairs)
    return ReducedSystem(frame.x, A, B, F, frame.h_cond)


def normal_components(frame, v, dv, f):
    """Normal part of ``v`` from its tangential part and the data.

    Parameters
    ----------
    frame : FrameData
    v : array (n,)
        The values ``v_i``.
    dv : array (n, n)
        ``dv[i, j] = d_j v_i``.
    f : array (n, n)
        Symmetric data ``f_ij``.

    Returns
    -------
    array of length n(n-1)/2 with the components ``v^{n+mu}``.
    """
    n = frame.n
    v = np.asarray(v, dtype=float)
    dv = np.asarray(dv, dtype=float)
    f = np.asarray(f, dtype=float)
    phi = np.array([0.5 * dv[i, j] + 0.5 * dv[j, i] - frame.Gamma[i, j] @ v - 0.5 * f[i, j]
                    for i, j in itertools.combinations(range(n), 2)])
    return frame.h_inverse() @ phi


def random_field(n, D, seed=0, degree=2, scale=1.0):
    """A polynomial ambient vector field with ``D`` components and random coefficients."""
    rng = np.random.default_rng(seed)
    X = [Poly.var(n, k) for k in range(n)]
    monomials = [Poly.const(n, 1.0)]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            m = Poly.const(n, 1.0)
            for k in combo:
                m = m * X[k]
            monomials.append(m)
    field = []
    for _ in range(D):
        p = Poly(n)
        for m in monomials:
            p = p + m * (scale * rng.uniform(-1, 1))
        field.append(p)
    return field


@dataclass
class RoundTrip:
    x: np.ndarray
    normal_error: float
    tangential_residual: float
    scale: float

    @property
    def residual(self):
        return max(self.normal_error, self.tangential_residual)


def manufactured_roundtrip(jet, x, field=None, seed=0):
    """Push a known field through the linearized equations and back.

    The field ``v`` (ambient polynomial) defines ``f_ij`` exactly.  From
    ``v_i = d_i u . v`` and ``f`` we recover the normal components and
    evaluate the residual of the reduced system; both are compared against
    the field itself.
    """
    calc = _calculus(jet)
    n, D = calc.n, calc.D
    if field is None:
        field = random_field(n, D, seed)
    frame = frame_at(calc, x)
    x = frame.x
    vx = np.array([p(x) for p in field])
    dvx = np.array([[p.deriv(j)(x) for p in field] for j in range(n)])  # (n, D)
    du = frame.tangent
    _, ddu = calc.evaluate(x)
    f = du @ dvx.T
    f = f + f.T
    V = du @ vx
    # d_j v_i = d_ij u . v + d_i u . d_j v
    dV = ddu @ vx + du @ dvx.T
    rec = normal_components(frame, V, dV, f)
    truth = frame.normal @ vx
    rs = reduced_system(frame, f)
    tang = rs.residual(V, dV)
    scale = max(1.0, float(np.max(np.abs(vx))))
    return RoundTrip(x, float(np.max(np.abs(rec - truth))),
                     float(np.max(np.abs(tang))), scale)


@dataclass
class ClosureReport:
    a_error: float
    b_max: float
    A: np.ndarray
    B: np.ndarray

    def to_json(self):
        return {"A0_vs_params_max_abs": self.a_error, "A0_tol": 1e-12,
                "B0_max_abs": self.b_max, "B0_tol": 1e-10,
                "A0": self.A.tolist(), "B0": self.B.tolist()}


def closure_at_origin(c, jet=None):
    """Compare ``A^k(0)`` built from the embedding jet with the parameters."""
    if jet is None:
        jet = pipeline(c)[3]
    rs = reduced_system(frame_at(jet, np.zeros(c.n)))
    ref = coefficient_matrices(c)
    return ClosureReport(float(np.max(np.abs(rs.A - ref))), float(np.max(np.abs(rs.B))),
                         rs.A, rs.B)


def closure_csv(c, A):
    """CSV text listing each ``A^k(0)_ij`` next to the parameter it should equal."""
    ref = coefficient_matrices(c)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "i", "j", "A0", "param", "diff"])
    n = c.n
    for k, i, j in itertools.product(range(n), repeat=3):
        w.writerow([k + 1, i + 1, j + 1, repr(float(A[k, i, j])), repr(float(ref[k, i, j])),
                    repr(float(A[k, i, j] - ref[k, i, j]))])
    return buf.getvalue()
