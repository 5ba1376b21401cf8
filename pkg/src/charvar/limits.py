"""Limit directions of the singular locus of ``P(xi, t c)`` as ``t -> 0``.

Write ``a`` for a limit direction and ``Z`` for its zero set.  Near ``a``
put ``xi_i = t y_i`` for ``i`` in ``Z``.  The ``Z`` block of the symbol is
then ``t Q + O(t^2)`` with

    Q = diag(x_Z) + (off-diagonal part of b_ZZ(a)),   x_i = y_i + b_ii(a),

and the symbol drops to rank ``n - 2`` exactly when ``Q`` (to leading
order) drops to rank ``|Z| - 2``.  That gives three families:

* ``|Z| = 2``: ``Q = 0``, i.e. ``b_ij(a) = b_ji(a) = 0`` (two linear forms).
* ``|Z| = 3``: ``Q`` has rank one, possible iff
  ``b_ij b_jl b_li = b_ji b_lj b_il`` (a cubic).
* ``|Z| = 4``: ``Q`` has rank two; for ``n = 5`` the direction is a
  coordinate point and the rank condition is a quadratic in one diagonal
  entry.

All indices in public data (zero patterns, JSON) are 1-based.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateQuadruple, DegeneratePair, DegenerateTriple,
                     InvalidDimension)
from .symbol import b_matrix

ROOT_IMAG_TOL = 1e-8
DEDUP_RADIUS = 1e-6


# ----------------------------------------------------------------------------
# projective helpers


def normalize(a):
    """Chart normalization: divide by the largest-magnitude coordinate.

    Ties go to the lowest index.  The result has that coordinate equal to +1.
    """
    a = np.asarray(a, dtype=float)
    m = int(np.argmax(np.abs(a)))
    if a[m] == 0:
        raise ValueError("zero vector has no projective class")
    return a / a[m]


def unit(a):
    a = np.asarray(a, dtype=float)
    return a / np.linalg.norm(a)


def proj_dist(a, b):
    """Distance between the lines through ``a`` and ``b`` on the unit sphere."""
    ua, ub = unit(a), unit(b)
    return float(min(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub)))


def dedup(points, key=lambda p: p, radius=DEDUP_RADIUS):
    """Keep the first of every cluster of projectively equal points."""
    kept = []
    for p in points:
        if all(proj_dist(key(p), key(q)) >= radius for q in kept):
            kept.append(p)
    return kept


# ----------------------------------------------------------------------------
# real roots


def real_roots(coeffs, imag_tol=ROOT_IMAG_TOL):
    """Real roots of a univariate polynomial (highest degree first).

    Roots come from companion-matrix eigenvalues.  A root is real when its
    imaginary part is below ``imag_tol`` times the spectral radius.  Real
    roots are polished with a few Newton steps.

    Returns
    -------
    roots : ndarray
        Sorted real roots.
    double : bool
        True when two real roots coincide to the same tolerance, which is a
        non-generic situation.
    """
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if coeffs.size <= 1:
        return np.array([]), False
    z = np.roots(coeffs)
    radius = max(float(np.max(np.abs(z))), 1e-300)
    real = np.sort(z[np.abs(z.imag) <= imag_tol * radius].real)
    d = np.polyder(coeffs)
    for _ in range(3):
        dv = np.polyval(d, real)
        ok = dv != 0
        real[ok] = real[ok] - np.polyval(coeffs, real[ok]) / dv[ok]
    real = np.sort(real)
    double = bool(np.any(np.diff(real) <= imag_tol * radius)) if real.size > 1 else False
    return real, double


# ----------------------------------------------------------------------------
# data types


@dataclass
class LimitPoint:
    """A limit direction with its zero pattern.

    ``zbar`` holds the leading-order values of ``y_Z = xi_Z / t`` (one array
    per admissible branch).  Cases 1 and 2 carry one branch; a Case-3
    quadruple carries as many branches as its quadratic has real roots.
    """

    zero_pattern: tuple
    coords: np.ndarray
    case: int
    roots: int
    zbar: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"case": self.case, "zeros": list(self.zero_pattern),
                "coords": [float(x) for x in self.coords], "roots": self.roots}


@dataclass
class Case1Family:
    """Pattern ``{i, j}`` for general ``n``: the solution space of the two
    linear equations, an ``(n - 4)``-dimensional subspace.  ``basis`` is an
    orthonormal ``(n, n - 4)`` array with zero rows at ``i`` and ``j``."""

    pair: tuple
    basis: np.ndarray

    def point(self, coeffs):
        return self.basis @ np.asarray(coeffs, dtype=float)


@dataclass
class Case2Family:
    """Pattern ``{i, j, l}`` for general ``n``: the cubic hypersurface."""

    triple: tuple
    c: object

    def residual(self, a):
        i, j, l = (x - 1 for x in self.triple)
        a = np.asarray(a, dtype=float)
        B = b_matrix(self.c, a)
        return float(B[i, j] * B[j, l] * B[l, i] - B[j, i] * B[l, j] * B[i, l])


@dataclass
class CountPrediction:
    alpha: int
    beta: int
    gamma: int

    @property
    def total(self):
        return 10 + self.alpha + 2 * self.beta + 3 * self.gamma

    def to_json(self):
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "total": self.total,
                "note": "each 2-root quadruple contributes 2 points (total uses 2*beta)"}


# ----------------------------------------------------------------------------
# helpers


def _size(c):
    return float(np.max(np.abs(c.values))) if c.values.size else 0.0


def _ybar(c, a, Z, x):
    """Convert leading-order diagonal values ``x_Z`` of ``Q`` to ``y_Z``."""
    B = b_matrix(c, a)
    return np.array([x[q] - B[i, i] for q, i in enumerate(Z)])


def rank_one_diagonal(Q):
    """Diagonal ``x`` making ``diag(x) + offdiag(Q)`` rank one (3x3)."""
    x = np.zeros(3)
    for p in range(3):
        q, s = [k for k in range(3) if k != p]
        x[p] = Q[p, q] * Q[s, p] / Q[s, q]
    return x


# ----------------------------------------------------------------------------
# Case 1


def _pair_system(c, i, j):
    """Coefficient rows of ``b_ij(a)`` and ``b_ji(a)`` on the remaining coordinates."""
    C = c.tensor
    rest = [k for k in range(c.n) if k not in (i, j)]
    M = np.array([[C[i, k, j] for k in rest], [C[j, k, i] for k in rest]])
    return rest, M


def case1_family(c, i, j, rtol=1e-10):
    """Null space of the two linear forms for the (1-based) pair ``(i, j)``."""
    i0, j0 = i - 1, j - 1
    rest, M = _pair_system(c, i0, j0)
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0 or s[1] <= rtol * s[0]:
        raise DegeneratePair(f"linear forms for pair ({i}, {j}) are dependent",
                             where=(i, j), detail={"singular_values": s.tolist()})
    _, _, Vt = np.linalg.svd(M)
    null = Vt[2:].T
    basis = np.zeros((c.n, null.shape[1]))
    basis[rest] = null
    return Case1Family((i, j), basis)


def case1_points(c):
    """For n = 5, one point per pair; for larger n, one :class:`Case1Family` per pair.

    Raises :class:`DegeneratePair` naming the first pair whose two linear
    forms are dependent.
    """
    n = c.n
    if n < 5:
        raise InvalidDimension(f"limit sets are defined for n >= 5, got {n}")
    out = []
    for i, j in itertools.combinations(range(1, n + 1), 2):
        fam = case1_family(c, i, j)
        if n > 5:
            out.append(fam)
            continue
        a = normalize(fam.basis[:, 0])
        a[[i - 1, j - 1]] = 0.0
        notes = []
        rest = [k for k in range(n) if k not in (i - 1, j - 1)]
        if np.min(np.abs(a[rest])) < 1e-10:
            notes.append("zero coordinate outside the pattern")
        out.append(LimitPoint((i, j), a, 1, 1, [_ybar(c, a, [i - 1, j - 1], np.zeros(2))], notes))
    return out


# ----------------------------------------------------------------------------
# Case 2


def triple_cubic(c, i, j, l):
    """Coefficients (in the lower remaining coordinate, upper one set to 1) of
    ``b_ij b_jl b_li - b_ji b_lj b_il`` for n = 5.  Indices 1-based."""
    if c.n != 5:
        raise InvalidDimension("the single-variable cubic is for n = 5")
    C = c.tensor
    i0, j0, l0 = i - 1, j - 1, l - 1
    p, q = [k for k in range(5) if k not in (i0, j0, l0)]

    def lin(r, s):
        return np.array([C[r, p, s], C[r, q, s]])

    def prod(fs):
        out = np.array([1.0])
        for f in fs:
            out = np.polymul(out, f)
        return out

    left = prod([lin(i0, j0), lin(j0, l0), lin(l0, i0)])
    right = prod([lin(j0, i0), lin(l0, j0), lin(i0, l0)])
    return np.polysub(left, right), (p + 1, q + 1)


def cubic_admissible(coeffs, scale=1.0):
    """Split real roots of a cubic into admissible (nonzero) and excluded (zero).

    Raises :class:`DegenerateTriple` when leading and trailing coefficients
    both vanish, which leaves the pattern undetermined.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    floor = 1e-14 * max(scale, 1e-300) ** 3
    if abs(coeffs[0]) < floor and abs(coeffs[-1]) < floor:
        raise DegenerateTriple("cubic leading and trailing coefficients vanish",
                               detail={"coeffs": coeffs.tolist()})
    roots, double = real_roots(coeffs)
    radius = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    zero = np.abs(roots) <= 1e-10 * radius
    return roots[~zero], roots[zero], double


@dataclass
class TripleSummary:
    triple: tuple
    coeffs: np.ndarray
    remaining: tuple
    admissible: np.ndarray
    excluded: np.ndarray
    double: bool

    @property
    def roots(self):
        return len(self.admissible) + len(self.excluded)

    @property
    def generic(self):
        return not self.double and not len(self.excluded)


def case2_triples(c):
    """Per-triple cubic data for n = 5 (raises :class:`DegenerateTriple`)."""
    s = _size(c)
    out = []
    for tri in itertools.combinations(range(1, 6), 3):
        coeffs, rem = triple_cubic(c, *tri)
        try:
            good, excluded, double = cubic_admissible(coeffs, s)
        except DegenerateTriple as exc:
            exc.where = tri
            raise
        out.append(TripleSummary(tri, coeffs, rem, good, excluded, double))
    return out


def case2_points(c):
    """For n = 5, one point per admissible real cubic root and triple.

    For n > 5 returns one :class:`Case2Family` (residual evaluator) per triple.
    Triples whose cubic degenerates raise :class:`DegenerateTriple`.  Roots
    at zero would put a fourth zero in the pattern; they are dropped and
    noted on the sibling points.
    """
    n = c.n
    if n < 5:
        raise InvalidDimension(f"limit sets are defined for n >= 5, got {n}")
    if n > 5:
        return [Case2Family(tri, c) for tri in itertools.combinations(range(1, n + 1), 3)]
    out = []
    for summ in case2_triples(c):
        p, q = summ.remaining
        notes = []
        if len(summ.excluded):
            notes.append("root at zero excluded (non-generic)")
        if summ.double:
            notes.append("double root (non-generic)")
        Z = [x - 1 for x in summ.triple]
        for r in summ.admissible:
            a = np.zeros(5)
            a[p - 1] = r
            a[q - 1] = 1.0
            a = normalize(a)
            Q = b_matrix(c, a)[np.ix_(Z, Z)]
            off = [abs(Q[u, v]) for u in range(3) for v in range(3) if u != v]
            pt_notes = list(notes)
            if min(off) <= 1e-10 * max(max(off), 1e-300):
                pt_notes.append("vanishing off-diagonal b entry (non-generic)")
                zb = []
            else:
                zb = [_ybar(c, a, Z, rank_one_diagonal(Q))]
            out.append(LimitPoint(summ.triple, a, 2, summ.roots, zb, pt_notes))
    return out


# ----------------------------------------------------------------------------
# Case 3


def case3_quadratic(Q):
    """Rank-two completion of a 4x4 off-diagonal pattern.

    ``Q`` is 4x4; its diagonal is ignored.  Returns the quadratic in the
    first diagonal entry together with the rational maps giving the other
    three entries.  Each map is ``(numerator, denominator)`` as polynomials.
    The four vanishing minors are, by (row, col) positions in the pattern:
    (4,3), (4,2), (3,2) and (2,1).
    """

    def q(r, s):
        return float(Q[r - 1, s - 1])

    k2 = -q(1, 3) * q(2, 1) * q(3, 4) + q(1, 3) * q(2, 4) * q(3, 1) - q(1, 4) * q(2, 3) * q(3, 1)
    N3 = np.array([-q(2, 3) * q(3, 4), -k2])
    D3 = np.array([-q(2, 4), q(1, 4) * q(2, 1)])
    k3 = q(1, 3) * q(2, 4) * q(4, 1) + q(1, 4) * q(2, 1) * q(4, 3) - q(1, 4) * q(2, 3) * q(4, 1)
    N4 = np.array([q(2, 4) * q(4, 3), -k3])
    D4 = np.array([q(2, 3), -q(1, 3) * q(2, 1)])
    k4 = -q(1, 2) * q(3, 4) * q(4, 3) + q(1, 3) * q(3, 4) * q(4, 2) + q(1, 4) * q(3, 2) * q(4, 3)
    quad = (q(1, 2) * np.polymul(N3, N4)
            - q(1, 3) * q(3, 2) * np.polymul(N4, D3)
            - q(1, 4) * q(4, 2) * np.polymul(N3, D4)
            + k4 * np.polymul(D3, D4))
    N2 = np.array([q(2, 4) * q(3, 2),
                   q(1, 2) * q(2, 1) * q(3, 4) - q(1, 2) * q(2, 4) * q(3, 1) - q(1, 4) * q(2, 1) * q(3, 2)])
    D2 = np.array([q(3, 4), -q(1, 4) * q(3, 1)])
    return quad, {"z2": (N2, D2), "z3": (N3, D3), "z4": (N4, D4)}


def case3_solutions(Q, scale=1.0):
    """Real rank-two completions ``x`` of the 4x4 pattern ``Q``.

    Returns ``(solutions, quad, double)``.  Pivots of the cascade below
    ``1e-14 * scale**k`` raise :class:`DegenerateQuadruple`.
    """
    quad, maps = case3_quadratic(Q)
    s = max(scale, 1e-300)
    if np.max(np.abs(quad)) <= 1e-14 * s ** 6:
        raise DegenerateQuadruple("quadratic vanishes identically",
                                  detail={"quad": np.asarray(quad).tolist()})
    if abs(quad[0]) <= 1e-14 * s ** 6:
        raise DegenerateQuadruple("quadratic loses its leading term",
                                  detail={"quad": np.asarray(quad).tolist()})
    roots, double = real_roots(quad)
    sols = []
    for z1 in roots:
        vals = [z1]
        for name in ("z2", "z3", "z4"):
            N, D = maps[name]
            den = np.polyval(D, z1)
            if abs(den) <= 1e-14 * s ** (len(D)):
                raise DegenerateQuadruple(f"pivot for {name} vanishes",
                                          detail={"z1": float(z1)})
            vals.append(np.polyval(N, z1) / den)
        sols.append(np.array(vals))
    return sols, quad, double


def case3_points(c):
    """One coordinate point per quadruple (n = 5), tagged with its root count."""
    if c.n != 5:
        raise InvalidDimension(f"the quadruple solver is for n = 5, got {c.n}")
    out = []
    s = _size(c)
    for Z1 in itertools.combinations(range(1, 6), 4):
        Z = [x - 1 for x in Z1]
        m = [k for k in range(5) if k not in Z][0]
        a = np.zeros(5)
        a[m] = 1.0
        Q = b_matrix(c, a)[np.ix_(Z, Z)]
        try:
            sols, quad, double = case3_solutions(Q, s)
        except DegenerateQuadruple as exc:
            exc.where = Z1
            raise
        notes = ["double root (non-generic)"] if double else []
        zb = [_ybar(c, a, Z, x) for x in sols]
        out.append(LimitPoint(Z1, a, 3, len(sols), zb, notes))
    return out


# ----------------------------------------------------------------------------
# counting and the general description


def predict_count(c):
    """``(alpha, beta, gamma)`` for n = 5; raises on any non-generic pattern."""
    if c.n != 5:
        raise InvalidDimension(f"the count formula is for n = 5, got {c.n}")
    case1_points(c)
    per_triple = {}
    for summ in case2_triples(c):
        if not summ.generic:
            raise DegenerateTriple(f"triple {summ.triple} is non-generic", where=summ.triple)
        per_triple[summ.triple] = summ.roots
    for p in case2_points(c):
        if p.notes:
            raise DegenerateTriple(f"triple {p.zero_pattern}: {p.notes}", where=p.zero_pattern)
    alpha = sum(1 for r in per_triple.values() if r == 1)
    gamma = sum(1 for r in per_triple.values() if r == 3)
    if alpha + gamma != 10:
        raise DegenerateTriple(f"unexpected root counts {per_triple}")
    beta = 0
    for p in case3_points(c):
        if p.notes:
            raise DegenerateQuadruple(f"quadruple {p.zero_pattern}: {p.notes}", where=p.zero_pattern)
        beta += p.roots == 2
    return CountPrediction(alpha, beta, gamma)


def rescaled_symbol(c, a):
    """Leading-order symbol: ``a_i`` on the diagonal, ``b_ij(a)`` off it."""
    P = b_matrix(c, a)
    np.fill_diagonal(P, np.asarray(a, dtype=float))
    return P


@dataclass
class LambdaDescription:
    """Three families of constraint systems describing the limit set."""

    c: object
    quadruples: list
    triples: list
    pairs: list

    def residuals(self, a):
        """Residual of every family member at ``a``, as ``(family, pattern, value)``.

        ``a`` is scaled to unit length and ``c`` to unit max-entry, so the
        numbers are comparable across draws.
        """
        a = unit(a)
        s = _size(self.c)
        Pt = rescaled_symbol(self.c, a)
        off = Pt - np.diag(np.diag(Pt))
        if s > 0:
            off = off / s
        out = []
        for Z in self.quadruples:
            z = [x - 1 for x in Z]
            out.append(("i", Z, float(np.max(np.abs(a[z])))))
        for Z in self.triples:
            i, j, l = (x - 1 for x in Z)
            cub = off[i, j] * off[j, l] * off[l, i] - off[j, i] * off[l, j] * off[i, l]
            out.append(("ii", Z, float(max(abs(a[i]), abs(a[j]), abs(a[l]), abs(cub)))))
        for Z in self.pairs:
            i, j = (x - 1 for x in Z)
            out.append(("iii", Z, float(max(abs(a[i]), abs(a[j]), abs(off[i, j]), abs(off[j, i])))))
        return out

    def membership(self, a):
        """Best ``(family, pattern, residual)`` at ``a``."""
        return min(self.residuals(a), key=lambda r: r[2])

    def contains(self, a, tol=1e-10):
        return self.membership(a)[2] <= tol


def lambda_general(c):
    n = c.n
    if n < 5:
        raise InvalidDimension(f"limit sets are defined for n >= 5, got {n}")
    idx = range(1, n + 1)
    return LambdaDescription(c, list(itertools.combinations(idx, 4)),
                             list(itertools.combinations(idx, 3)),
                             list(itertools.combinations(idx, 2)))


def lambda_report(c):
    """JSON-ready list of every n = 5 limit point."""
    pts = case1_points(c) + case2_points(c) + case3_points(c)
    return [p.to_json() for p in pts]
