"""Order-two approximate embeddings built from the parameters.

The map ``u : R^n -> R^{n(n+1)/2}`` is

    u^l     = x^l + (1/6) sum alpha_ijk^l x^i x^j x^k      (l <= n)
    u^{n+mu} = (1/2) sum h_ij^mu x^i x^j.

Given a metric ``g`` in normal coordinates whose curvature at 0 matches
the Gauss form of ``h``, the cubic coefficients ``alpha`` are found from a
square selection of the linear equations

    d_kl g_ij(0) = h_ik.h_lj + h_il.h_jk + alpha_ikl^j + alpha_ljk^i,

indexed by unordered pairs ``{i, j}`` and ``{k, l}``.  The solve uses all
equations that fail ``i < j, k < l, tau_ij <= tau_kl`` plus one
representative (the lexicographically smallest) of each class of
all-distinct 4-tuples.  Afterwards every equation is checked.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConsistencyFailure, GaussMismatch, InvalidCurvature,
                     InvalidPair, SelectionDegenerate)
from .poly import Poly

FORMAT_VERSION = 1


def tau(i, j, n):
    """Position of the pair ``i < j`` (1-based) in lexicographic order."""
    if not 1 <= i < j <= n:
        raise InvalidPair(f"tau needs 1 <= i < j <= n, got ({i}, {j}, n={n})")
    return (i - 1) * n - i * (i + 1) // 2 + j


def counts(n):
    """Equation and unknown counts ``(A, B, C, D)`` of the alpha system.

    ``A`` equations, ``B`` unknowns, ``C`` equations satisfying the ordered
    condition, and ``D = B - (A - C)`` classes of all-distinct 4-tuples.
    """
    N = n * (n - 1) // 2
    A = (n * (n + 1) // 2) ** 2
    B = n * n * (n + 1) * (n + 2) // 6
    C = N * (N + 1) // 2
    return A, B, C, B - (A - C)


@dataclass
class SecondFundamentalForm:
    n: int
    h: np.ndarray  # (n, n, N), symmetric in the first two axes

    def H0(self):
        """Rows ``h_ij`` for ``i < j`` in tau order."""
        n = self.n
        return np.array([self.h[i, j] for i, j in itertools.combinations(range(n), 2)])

    def basis_ok(self, rtol=1e-12):
        M = self.H0()
        s = np.linalg.svd(M, compute_uv=False)
        return bool(s[0] > 0 and s[-1] > rtol * s[0])

    def to_json(self):
        return {"format_version": FORMAT_VERSION, "n": self.n, "h": self.h.tolist()}


@dataclass
class CurvatureTensor:
    n: int
    R: np.ndarray

    def invariant_residuals(self):
        R = self.R
        return {
            "antisym_12": float(np.max(np.abs(R + R.transpose(1, 0, 2, 3)))),
            "antisym_34": float(np.max(np.abs(R + R.transpose(0, 1, 3, 2)))),
            "pair_sym": float(np.max(np.abs(R - R.transpose(2, 3, 0, 1)))),
            "bianchi": float(np.max(np.abs(R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)))),
        }

    def to_json(self):
        return {"format_version": FORMAT_VERSION, "n": self.n, "R": self.R.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["n"]), np.array(obj["R"], dtype=float))


def h_from_params(c):
    """``h_ij = e_{tau_ij}`` for ``i < j`` and ``h_kk = -2 sum_{i<j} c_k^{ij} e_{tau_ij}``."""
    n = c.n
    N = n * (n - 1) // 2
    h = np.zeros((n, n, N))
    for i, j in itertools.combinations(range(1, n + 1), 2):
        e = tau(i, j, n) - 1
        h[i - 1, j - 1, e] = h[j - 1, i - 1, e] = 1.0
    for k in range(1, n + 1):
        for i, j in itertools.combinations(range(1, n + 1), 2):
            h[k - 1, k - 1, tau(i, j, n) - 1] = -2.0 * c(k, i, j)
    return SecondFundamentalForm(n, h)


def gauss_curvature(h):
    """``R_ijkl = sum_mu h_ik h_jl - h_il h_jk``."""
    H = h.h
    R = np.einsum("ikm,jlm->ijkl", H, H) - np.einsum("ilm,jkm->ijkl", H, H)
    return CurvatureTensor(h.n, R)


class QuadraticMetric:
    """``g_ij(x) = delta_ij + (1/2) sum_kl D[i, j, k, l] x^k x^l``.

    ``D[i, j, k, l]`` is the second derivative ``d_kl g_ij(0)``.
    """

    def __init__(self, D):
        self.D = np.asarray(D, dtype=float)
        self.n = self.D.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.eye(self.n) + 0.5 * np.einsum("ijkl,k,l->ij", self.D, x, x)

    def polys(self):
        n = self.n
        X = [Poly.var(n, k) for k in range(n)]
        out = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                p = Poly.const(n, 1.0 if i == j else 0.0)
                for k in range(n):
                    for l in range(n):
                        if self.D[i, j, k, l]:
                            p = p + X[k] * X[l] * (0.5 * self.D[i, j, k, l])
                out[i][j] = p
        return out

    def curvature(self):
        """Curvature at 0 from second derivatives in normal coordinates."""
        D = self.D
        # R_ijkl = (d_jk g_il + d_il g_jk - d_ik g_jl - d_jl g_ik) / 2
        R = 0.5 * (np.einsum("iljk->ijkl", D) + np.einsum("jkil->ijkl", D)
                   - np.einsum("jlik->ijkl", D) - np.einsum("ikjl->ijkl", D))
        return CurvatureTensor(self.n, R)


def metric_from_curvature(R, tol=1e-10):
    """``g_ij = delta_ij - (1/3) R_ikjl x^k x^l``."""
    res = R.invariant_residuals()
    scale = max(1.0, float(np.max(np.abs(R.R))))
    if max(res.values()) > tol * scale:
        raise InvalidCurvature(f"curvature tensor fails its symmetries: {res}")
    T = R.R
    D = -(np.einsum("ikjl->ijkl", T) + np.einsum("iljk->ijkl", T)) / 3.0
    return QuadraticMetric(D)


@dataclass
class EmbeddingJet:
    n: int
    alpha: np.ndarray  # alpha[i, j, k, l] = alpha_ijk^l, symmetric in i, j, k
    h: SecondFundamentalForm
    selection_cond: float = float("nan")
    max_residual: float = float("nan")

    def polys(self):
        """Components of ``u`` as polynomials."""
        n = self.n
        X = [Poly.var(n, k) for k in range(n)]
        comps = []
        for l in range(n):
            p = X[l].copy()
            for i, j, k in itertools.product(range(n), repeat=3):
                a = self.alpha[i, j, k, l]
                if a:
                    p = p + X[i] * X[j] * X[k] * (a / 6.0)
            comps.append(p)
        for mu in range(self.h.h.shape[2]):
            p = Poly(n)
            for i, j in itertools.product(range(n), repeat=2):
                v = self.h.h[i, j, mu]
                if v:
                    p = p + X[i] * X[j] * (0.5 * v)
            comps.append(p)
        return comps

    def to_json(self):
        return {"format_version": FORMAT_VERSION, "n": self.n,
                "alpha": self.alpha.tolist(), "h": self.h.h.tolist(),
                "selection_cond": self.selection_cond, "max_residual": self.max_residual}


def _triples(n):
    return list(itertools.combinations_with_replacement(range(n), 3))


def _equation_index(n):
    pairs = list(itertools.combinations_with_replacement(range(n), 2))
    return [(i, j, k, l) for (i, j) in pairs for (k, l) in pairs]


def _ordered(i, j, k, l, n):
    # 0-based indices; the ordered condition on the pairs
    return i < j and k < l and tau(i + 1, j + 1, n) <= tau(k + 1, l + 1, n)


def selected_equations(n):
    """Equations used in the square solve, as 0-based ``(i, j, k, l)`` tuples."""
    sel = [e for e in _equation_index(n) if not _ordered(*e, n)]
    sel += [tuple(q) for q in itertools.combinations(range(n), 4)]
    return sel


def _system(n, h, D, equations):
    """Rows ``M alpha = rhs`` for the listed equations."""
    T = _triples(n)
    col = {}
    for q, tr in enumerate(T):
        for l in range(n):
            col[(tr, l)] = q * n + l
    H = h.h
    M = np.zeros((len(equations), len(T) * n))
    rhs = np.zeros(len(equations))
    for r, (i, j, k, l) in enumerate(equations):
        M[r, col[(tuple(sorted((i, k, l))), j)]] += 1.0
        M[r, col[(tuple(sorted((l, j, k))), i)]] += 1.0
        rhs[r] = D[i, j, k, l] - H[i, k] @ H[l, j] - H[i, l] @ H[j, k]
    return M, rhs, T


def solve_alpha(g, h, gauss_tol=1e-10, check_tol=1e-9):
    """Solve the selected square system for ``alpha`` and check every equation."""
    n = h.n
    if not h.basis_ok():
        warnings.warn("second fundamental form rows do not form a basis (degenerate H)")
    Rg = g.curvature().R
    Rh = gauss_curvature(h).R
    gap = float(np.max(np.abs(Rg - Rh)))
    if gap > gauss_tol * max(1.0, float(np.max(np.abs(Rh)))):
        raise GaussMismatch(f"curvature of g and Gauss form of h differ by {gap:.3e}",
                            detail={"residual": gap})
    sel = selected_equations(n)
    M, rhs, T = _system(n, h, g.D, sel)
    if M.shape[0] != M.shape[1]:
        raise SelectionDegenerate(f"selection is {M.shape[0]}x{M.shape[1]}")
    s = np.linalg.svd(M, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    if not np.isfinite(cond) or cond > 1e12:
        deficient = int(np.sum(s <= 1e-12 * s[0]))
        raise SelectionDegenerate(f"selected system is singular (cond {cond:.2e})",
                                  detail={"rank_deficit": deficient})
    sol = np.linalg.solve(M, rhs)
    alpha = np.zeros((n, n, n, n))
    for q, tr in enumerate(T):
        for perm in set(itertools.permutations(tr)):
            alpha[perm + (slice(None),)] = sol[q * n:(q + 1) * n]
    Mall, rall, _ = _system(n, h, g.D, _equation_index(n))
    resid = float(np.max(np.abs(Mall @ sol - rall)))
    if resid > check_tol * max(1.0, float(np.max(np.abs(rall)))):
        raise ConsistencyFailure(f"unselected equations fail by {resid:.3e}",
                                 detail={"residual": resid})
    return EmbeddingJet(n, alpha, h, cond, resid)


def equation_residuals(jet, g):
    """Residual of every equation for the stored ``alpha``."""
    n = jet.n
    eqs = _equation_index(n)
    T = _triples(n)
    sol = np.array([jet.alpha[tr + (l,)] for tr in T for l in range(n)])
    M, rhs, _ = _system(n, jet.h, g.D, eqs)
    return M @ sol - rhs


@dataclass
class Order2Report:
    max_jet: float
    exponent: float
    max_ratio: float

    def to_json(self):
        return {"max_jet": self.max_jet, "jet_tol": 1e-10,
                "exponent": self.exponent, "max_ratio": self.max_ratio}


def induced_metric_polys(jet):
    comps = jet.polys()
    n = jet.n
    du = [[p.deriv(i) for p in comps] for i in range(n)]
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            acc = Poly(n)
            for a, b in zip(du[i], du[j]):
                acc = acc + a * b
            out[i][j] = out[j][i] = acc
    return out


def verify_order2(jet, g, radii=(1e-1, 1e-2, 1e-3), directions=8, seed=0):
    """Measure ``E = du.du - g`` near 0.

    ``max_jet`` is the largest derivative of ``E`` at 0 of order at most 2,
    computed exactly.  ``exponent`` is the fitted decay rate of
    ``max |E|`` over spheres of the given radii and ``max_ratio`` the largest
    ``|E| / |x|^3`` seen there.
    """
    n = jet.n
    pm = induced_metric_polys(jet)
    gp = g.polys()
    E = [[pm[i][j] - gp[i][j] for j in range(n)] for i in range(n)]
    max_jet = max(E[i][j].max_jet(2) for i in range(n) for j in range(n))
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(directions, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sizes = []
    ratio = 0.0
    for r in radii:
        X = r * dirs
        vals = np.max([np.abs(E[i][j](X)) for i in range(n) for j in range(n)], axis=0)
        sizes.append(float(np.max(vals)))
        ratio = max(ratio, float(np.max(vals)) / r ** 3)
    if min(sizes) > 0:
        exponent = float(np.polyfit(np.log(radii), np.log(sizes), 1)[0])
    else:
        exponent = math.inf
    return Order2Report(float(max_jet), exponent, ratio)


def pipeline(c):
    """``h -> R -> g -> alpha`` for a parameter set.  Returns ``(h, R, g, jet)``."""
    h = h_from_params(c)
    R = gauss_curvature(h)
    g = metric_from_curvature(R)
    return h, R, g, solve_alpha(g, h)
