"""Detection, refinement and counting of rank-deficient symbols.

The work horse is :class:`FourMinorSystem`.  For a limit direction ``a``
with zero set ``Z`` it uses the unknowns

    z_i = xi_i / t        for i in Z,
    xi_k                  for the remaining free coordinates,

with one coordinate ``m`` fixed at 1 (the chart) and, for ``n > 5``,
``n - 5`` more coordinates frozen.  In these variables the four selected
minors have a nonsingular Jacobian at ``t = 0``.  The minors are evaluated
through the Schur complement of the non-zero block,

    S = P_ZZ - P_ZW P_WW^{-1} P_WZ,
    det P(row r, col s deleted) = +/- det(P_WW) det(S with r, s deleted),

so the residual ``det(S_rs / t)`` keeps full relative accuracy however
small ``t`` is.
"""

from __future__ import annotations

import itertools
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from . import limits as L
from .errors import (DegeneracyError, GenericityFailure, InvalidDimension,
                     LemmaHypothesisFailure, NoConvergence, NotFound)
from .params import check_cond12, check_n4_conditions, scale
from .symbol import (RankCertificate, adjugate, all_minors, coefficient_matrices,
                     matrix_scale, rank, symbol_array)

MAX_ITERS = 50
STEP_TOL = 1e-12
RES_TOL = 1e-10
MINOR_TOL = 1e-8
JAC_COND_MAX = 1e10
SUBBLOCK_TOL = 1e-11


def worker_count(default=1):
    try:
        return max(1, int(os.environ.get("CHARVAR_THREADS", default)))
    except ValueError:
        return default


def _pmap(fn, items, workers=None):
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------------------
# zero-minor propagation


@dataclass
class LemmaReport:
    """Outcome of propagating known zero minors to the whole matrix.

    ``covered`` lists (row, col) pairs (1-based) proven zero.  ``failed``
    lists the sub-blocks whose full-rank hypothesis did not hold, as
    ``(kind, line, (other1, other2), rank, needed)``.
    """

    covered: set
    failed: list
    n: int

    @property
    def complete(self):
        return len(self.covered) == self.n * self.n


def propagate_zero_minors(P, known, tol=SUBBLOCK_TOL):
    """Propagate vanishing ``(n-1)``-minors using two linear-algebra rules.

    Row rule: if minors ``(r, c1)`` and ``(r, c2)`` vanish and ``P`` without
    row ``r`` and columns ``c1, c2`` has rank ``n - 2``, every minor in row
    ``r`` vanishes.  The column rule is the transpose.  Indices are 1-based.
    The rules are applied to a fixpoint; the rank tolerance is relative to
    the largest singular value of ``P``.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    s1 = np.linalg.norm(P, 2)
    zero = {(r - 1, s - 1) for r, s in known}
    failed = {}
    cache = {}

    def block_rank(rows_out, cols_out):
        key = (rows_out, cols_out)
        if key not in cache:
            rows = [r for r in range(n) if r not in rows_out]
            cols = [s for s in range(n) if s not in cols_out]
            sv = np.linalg.svd(P[np.ix_(rows, cols)], compute_uv=False)
            cache[key] = int(np.sum(sv > tol * s1)) if s1 > 0 else 0
        return cache[key]

    changed = True
    while changed:
        changed = False
        for r in range(n):
            cols = sorted(s for (rr, s) in zero if rr == r)
            if len(cols) == n:
                continue
            for c1, c2 in itertools.combinations(cols, 2):
                rk = block_rank((r,), (c1, c2))
                if rk == n - 2:
                    zero |= {(r, s) for s in range(n)}
                    changed = True
                    failed.pop(("row", r), None)
                    break
                failed.setdefault(("row", r), ("row", r + 1, (c1 + 1, c2 + 1), rk, n - 2))
        for s in range(n):
            rows = sorted(r for (r, ss) in zero if ss == s)
            if len(rows) == n:
                continue
            for r1, r2 in itertools.combinations(rows, 2):
                rk = block_rank((r1, r2), (s,))
                if rk == n - 2:
                    zero |= {(r, s) for r in range(n)}
                    changed = True
                    failed.pop(("col", s), None)
                    break
                failed.setdefault(("col", s), ("col", s + 1, (r1 + 1, r2 + 1), rk, n - 2))
    covered = {(r + 1, s + 1) for r, s in zero}
    rows_done = {r for r in range(n) if all((r, s) in zero for s in range(n))}
    cols_done = {s for s in range(n) if all((r, s) in zero for r in range(n))}
    fails = [v for (kind, line), v in sorted(failed.items())
             if not (kind == "row" and line in rows_done) and not (kind == "col" and line in cols_done)]
    if len(covered) == n * n:
        fails = []
    return LemmaReport(covered, fails, n)


def four_minor_lemma(P, minors=((1, 1), (2, 2), (1, 2), (2, 1)), tol=SUBBLOCK_TOL):
    """Check the hypotheses of the four-minor criterion and its conclusion.

    Returns ``(report, max_minor)`` where ``max_minor`` is the largest
    ``(n-1)``-minor relative to ``||P||^(n-1)``.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    rep = propagate_zero_minors(P, minors, tol)
    s1 = np.linalg.norm(P, 2)
    M = all_minors(P)
    return rep, float(np.max(np.abs(M)) / max(s1, 1e-300) ** (n - 1))


# ----------------------------------------------------------------------------
# four-minor system


def minor_set(case, Z):
    """The four (row, col) minors (0-based) used for a pattern of the given case."""
    if case == 1:
        i, j = Z
        return [(i, i), (j, j), (i, j), (j, i)]
    if case == 2:
        i, j, l = Z
        return [(i, j), (j, i), (i, l), (j, l)]
    if case == 3:
        i, j, k, l = Z
        return [(l, k), (l, j), (k, j), (j, i)]
    raise ValueError(f"unknown case {case}")


class FourMinorSystem:
    """Residual map for the four selected minors near a limit direction.

    Call the instance on chart coordinates ``u`` to get the four scaled
    residuals.  ``u0`` is the predictor built from the limit data.
    """

    def __init__(self, c, t, pattern, branch=0, anchor=None, free=None):
        if t <= 0:
            raise ValueError("t must be positive")
        self.c = c
        self.t = float(t)
        self.pattern = pattern
        self.branch = branch
        n = self.n = c.n
        a = np.asarray(pattern.coords if anchor is None else anchor, dtype=float)
        a = L.normalize(a)
        self.anchor = a
        self.Z = [z - 1 for z in pattern.zero_pattern]
        self.W = [k for k in range(n) if k not in self.Z]
        self.m = max(self.W, key=lambda k: (abs(a[k]), -k))
        others = [k for k in self.W if k != self.m]
        nfree = 4 - len(self.Z)
        if free is None:
            free = self._choose_free(others, nfree)
        self.free = list(free)
        self.frozen = [k for k in others if k not in self.free]
        self.minors = minor_set(pattern.case, self.Z)
        self._pos = {z: q for q, z in enumerate(self.Z)}
        self.At = coefficient_matrices(scale(c, t))
        if pattern.zbar:
            y = np.asarray(pattern.zbar[branch], dtype=float)
        else:
            y = np.zeros(len(self.Z))
        self.u0 = np.concatenate([y, a[self.free]])

    def _choose_free(self, others, nfree):
        if nfree <= 0:
            return []
        if len(others) == nfree:
            return others
        if len(self.Z) == 2:
            i, j = self.Z
            C = self.c.tensor
            best = max(itertools.combinations(others, nfree),
                       key=lambda kl: abs(np.linalg.det(
                           np.array([[C[i, k, j] for k in kl], [C[j, k, i] for k in kl]]))))
            return list(best)
        return others[:nfree]

    def xi(self, u):
        u = np.asarray(u)
        xi = np.array(self.anchor, dtype=u.dtype)
        nz = len(self.Z)
        xi[self.Z] = self.t * u[:nz]
        xi[self.free] = u[nz:]
        return xi

    def chart(self, xi):
        """Inverse of :meth:`xi` for a covector scaled so that ``xi_m = 1``."""
        xi = np.asarray(xi, dtype=float) / xi[self.m]
        return np.concatenate([xi[self.Z] / self.t, xi[self.free]])

    def schur(self, u):
        P = np.einsum("k,kij->ij", self.xi(u), self.At)
        Z, W = self.Z, self.W
        D = P[np.ix_(W, W)]
        S = P[np.ix_(Z, Z)] - P[np.ix_(Z, W)] @ np.linalg.solve(D, P[np.ix_(W, Z)])
        return S / self.t, P

    def __call__(self, u):
        S, _ = self.schur(u)
        out = []
        for r, s in self.minors:
            rr, ss = self._pos[r], self._pos[s]
            sub = np.delete(np.delete(S, rr, 0), ss, 1)
            out.append(np.linalg.det(sub) if sub.size else 1.0)
        return np.array(out)

    def jacobian(self, u, h=1e-30):
        """Exact Jacobian by complex-step differentiation."""
        u = np.asarray(u, dtype=float)
        J = np.empty((4, u.size))
        for q in range(u.size):
            e = np.zeros(u.size, dtype=complex)
            e[q] = 1j * h
            J[:, q] = np.imag(self(u + e)) / h
        return J

    def raw_minors(self, u):
        P = np.einsum("k,kij->ij", self.xi(np.asarray(u, dtype=float)), self.At)
        return np.array([np.linalg.det(np.delete(np.delete(P, r, 0), s, 1)) for r, s in self.minors])


def four_minor_system(c, t, pattern, branch=0):
    return FourMinorSystem(c, t, pattern, branch)


# ----------------------------------------------------------------------------
# refinement


@dataclass
class SingularPoint:
    t: float
    xi: np.ndarray
    seed: object
    branch: int
    rank_cert: RankCertificate
    minor_residual: float
    newton_iters: int
    residual: float
    seed_distance: float
    lemma: LemmaReport = field(repr=False, default=None)
    continuation_steps: int = 0

    def to_json(self):
        return {"xi": [float(x) for x in self.xi], "rank": self.rank_cert.rank,
                "minor_residual": self.minor_residual,
                "minor_tol": MINOR_TOL,
                "singular_values": list(self.rank_cert.singular_values),
                "rank_tol": self.rank_cert.tol,
                "seed": {**self.seed.to_json(), "branch": self.branch},
                "seed_distance": self.seed_distance,
                "iters": self.newton_iters, "residual": self.residual,
                "continuation_steps": self.continuation_steps,
                "residual_tol": RES_TOL}


def _precheck(c, pattern, branch):
    if pattern.case == 1 and c.n >= 5:
        rep = check_cond12(c, *pattern.zero_pattern)
        if not rep.passed:
            raise GenericityFailure(f"pair conditions fail for {pattern.zero_pattern}",
                                    where=pattern.zero_pattern, detail=rep.to_json())
    if pattern.case in (2, 3) and branch >= len(pattern.zbar):
        raise GenericityFailure(f"no admissible branch {branch} for {pattern.zero_pattern}",
                                where=pattern.zero_pattern, detail={"notes": pattern.notes})


def newton(system, u0, max_iters=MAX_ITERS):
    """Damped Newton (Armijo on ``||F||^2``).  Returns ``(u, iters, residual)``."""
    u = np.asarray(u0, dtype=float).copy()
    F = system(u)
    f0 = float(F @ F)
    for it in range(1, max_iters + 1):
        J = system.jacobian(u)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Newton matrix", detail={"iter": it}) from exc
        lam = 1.0
        while True:
            un = u + lam * step
            Fn = system(un)
            fn = float(Fn @ Fn)
            if fn <= (1 - 1e-4 * lam) * f0 or lam < 1e-4:
                break
            lam *= 0.5
        xi_old, xi_new = system.xi(u), system.xi(un)
        dxi = np.linalg.norm(xi_new - xi_old)
        stalled = fn >= f0
        if not stalled or fn < f0 * 4:
            u, F, f0 = un, Fn, fn
        res = np.sqrt(f0)
        if res < RES_TOL and (dxi < STEP_TOL * np.linalg.norm(xi_new) or stalled or res < 1e-15):
            return u, it, res
    raise NoConvergence(f"Newton did not converge in {max_iters} iterations",
                        detail={"residual": float(np.sqrt(f0))})


def solve_pattern(c, t, pattern, branch=0, t_floor_ratio=1e-6):
    """Newton from the predictor, falling back to continuation in ``t``.

    When the predictor at ``t`` is outside the basin (which happens when a
    non-zero coordinate of the limit direction is itself small), the system
    is first solved at a smaller ``t`` and the solution is carried up to the
    requested ``t`` by geometric steps.  The chart is the same for every
    ``t``, so the previous solution is a valid starting point.

    Returns ``(system, u, iters, residual, steps)``.
    """
    system = FourMinorSystem(c, t, pattern, branch)
    J0 = system.jacobian(system.u0)
    cond = np.linalg.cond(J0)
    if not np.isfinite(cond) or cond > JAC_COND_MAX:
        raise GenericityFailure(f"Newton matrix at the predictor is singular (cond {cond:.2e})",
                                where=pattern.zero_pattern, detail={"cond": float(cond)})
    try:
        u, iters, res = newton(system, system.u0)
        return system, u, iters, res, 0
    except NoConvergence:
        pass
    # find a small t where the predictor converges
    ts = t
    u = None
    while ts > t * t_floor_ratio:
        ts /= 10.0
        sub = FourMinorSystem(c, ts, pattern, branch)
        try:
            u, _, _ = newton(sub, sub.u0)
            break
        except NoConvergence:
            continue
    if u is None:
        raise NoConvergence("no starting scale found for continuation",
                            where=pattern.zero_pattern)
    steps = 0
    total = 0
    factor = 2.0
    while ts < t:
        tn = min(t, ts * factor)
        sub = FourMinorSystem(c, tn, pattern, branch)
        try:
            un, it, res = newton(sub, u)
        except NoConvergence:
            factor = np.sqrt(factor)
            if factor < 1.0 + 1e-3:
                raise NoConvergence(f"continuation stalled at t={ts:.3e}",
                                    where=pattern.zero_pattern)
            continue
        u, ts = un, tn
        steps += 1
        total += it
        factor = min(2.0, factor * factor)
    return system, u, total, res, steps


def refine(c, t, seed, branch=0, check_lemma=True):
    """Refine a limit direction to a point of the singular locus at scale ``t``."""
    if not 0 < t:
        raise ValueError("t must be positive")
    _precheck(c, seed, branch)
    system, u, iters, res, steps = solve_pattern(c, t, seed, branch)
    xi = system.xi(u)
    xi = xi / np.linalg.norm(xi)
    if xi[system.m] < 0:
        xi = -xi
    P = symbol_array(scale(c, t), xi)
    cert = rank(P)
    minres = float(np.max(np.abs(all_minors(P))))
    lemma = None
    if check_lemma:
        lemma = propagate_zero_minors(P, [(r + 1, s + 1) for r, s in system.minors])
        pscale = np.linalg.norm(P, 2) ** (c.n - 1)
        if minres > MINOR_TOL * pscale or not lemma.complete:
            raise LemmaHypothesisFailure(
                "converged but the remaining minors are not certified",
                where=seed.zero_pattern,
                detail={"minor_residual": minres, "failed_blocks": lemma.failed})
    return SingularPoint(t, xi, seed, branch, cert, minres, iters, float(res),
                         L.proj_dist(xi, seed.coords), lemma, steps)


# ----------------------------------------------------------------------------
# counting


@dataclass
class CountResult:
    t: float
    count: int
    points: list
    failures: list
    prediction: object = None

    def to_json(self):
        return {"t": self.t, "count": self.count,
                "points": [p.to_json() for p in self.points],
                "failures": self.failures}


def seeds_n5(c):
    """All ``(limit point, branch)`` starts for n = 5, with setup failures."""
    failures = []
    seeds = []
    for solver in (L.case1_points, L.case2_points, L.case3_points):
        try:
            pts = solver(c)
        except DegeneracyError as exc:
            failures.append({"stage": solver.__name__, "error": type(exc).__name__,
                             "message": str(exc), "where": exc.where})
            pts = _partial(c, solver)
        for p in pts:
            nb = len(p.zbar) if p.case == 3 else 1
            seeds.extend((p, b) for b in range(nb))
    return seeds, failures


def _partial(c, solver):
    # Fall back to pattern-by-pattern solving so one bad pattern does not hide the rest.
    out = []
    if solver is L.case1_points:
        for i, j in itertools.combinations(range(1, c.n + 1), 2):
            try:
                fam = L.case1_family(c, i, j)
            except DegeneracyError:
                continue
            a = L.normalize(fam.basis[:, 0])
            out.append(L.LimitPoint((i, j), a, 1, 1, [np.zeros(2)], []))
    return out


def count_detected(c, t, workers=None):
    """Refine every n = 5 seed at scale ``t`` and count distinct points."""
    if c.n != 5:
        raise InvalidDimension(f"counting is implemented for n = 5, got {c.n}")
    seeds, failures = seeds_n5(c)

    def job(sb):
        p, b = sb
        try:
            return refine(c, t, p, b), None
        except DegeneracyError as exc:
            return None, {"seed": p.to_json(), "branch": b, "error": type(exc).__name__,
                          "message": str(exc), "where": exc.where}

    results = _pmap(job, seeds, workers)
    pts = [r for r, _ in results if r is not None]
    failures += [f for _, f in results if f is not None]
    pts.sort(key=lambda p: (p.seed.case, p.seed.zero_pattern, tuple(np.round(p.xi, 12))))
    # Case-3 branches share a limit and differ by O(t); compare in the
    # rescaled chart, i.e. shrink the sphere radius with t.
    kept = L.dedup(pts, key=lambda p: p.xi, radius=L.DEDUP_RADIUS * min(t, 1.0))
    return CountResult(float(t), len(kept), kept, failures)


def drift_slope(c, ts=(1e-2, 1e-3, 1e-4), workers=None):
    """Least-squares slope of ``log max dist(xi(t), seed)`` against ``log t``."""
    dists = []
    for t in ts:
        res = count_detected(c, t, workers)
        dists.append(max(p.seed_distance for p in res.points))
    slope = np.polyfit(np.log(ts), np.log(dists), 1)[0]
    return float(slope), dists


def estimate_tmax(c, ts=(3e-1, 1e-1, 3e-2, 1e-2, 3e-3, 1e-3), workers=None):
    """Largest ``t`` in a decreasing schedule from which every smaller ``t``
    reproduces the predicted count.  Returns ``None`` if none does."""
    pred = L.predict_count(c).total
    good = None
    for t in sorted(ts):
        res = count_detected(c, t, workers)
        if res.count == pred and not res.failures:
            good = t
        else:
            break
    return good


# ----------------------------------------------------------------------------
# surfaces for n >= 6


@dataclass
class TraceResult:
    t: float
    pattern: tuple
    nodes: np.ndarray
    spacing: float
    points: list
    failures: list

    @property
    def converged(self):
        return [p for p in self.points if p is not None]

    def to_json(self):
        return {"t": self.t, "pattern": list(self.pattern), "spacing": self.spacing,
                "points": [None if p is None else p.to_json() for p in self.points],
                "failures": self.failures}


def _eqnb_ok(c, a, i, j, tol=1e-10):
    from .symbol import b_matrix
    B = b_matrix(c, a)
    s = float(np.max(np.abs(c.values)))
    return all(max(abs(B[p, i]), abs(B[p, j])) > tol * s
               for p in range(c.n) if p not in (i, j))


def arc_nodes(family, count=50, margin=0.05, t=None, kappa=3.0):
    """Nodes on the longest arc of a pair family where no coordinate vanishes.

    Uses the great circle spanned by the first two basis vectors.  A
    fraction ``margin`` of the arc is dropped at each end.  When ``t`` is
    given the arc is further restricted to directions whose smallest free
    coordinate is at least ``kappa * sqrt(t)`` (unit normalization): closer
    to a coordinate hyperplane the pair pattern merges with a neighbouring
    one and the small-``t`` picture needs a smaller ``t``.

    Returns ``(nodes, spacing)`` with ``spacing`` the angular step.
    """
    u, v = family.basis[:, 0], family.basis[:, 1]
    i, j = (x - 1 for x in family.pair)
    W = [k for k in range(len(u)) if k not in (i, j)]
    zeros = sorted(np.mod(np.arctan2(-u[k], v[k]), np.pi) for k in W)
    gaps = [(zeros[q], zeros[q + 1] if q + 1 < len(zeros) else zeros[0] + np.pi)
            for q in range(len(zeros))]
    lo, hi = max(gaps, key=lambda g: g[1] - g[0])
    width = hi - lo
    lo, hi = lo + margin * width, hi - margin * width
    if t is not None:
        fine = np.linspace(lo, hi, 2001)
        pts = np.cos(fine)[:, None] * u + np.sin(fine)[:, None] * v
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        ok = np.min(np.abs(pts[:, W]), axis=1) >= kappa * np.sqrt(t)
        if not ok.any():
            raise GenericityFailure("no part of the arc is far enough from the coordinate "
                                    f"hyperplanes for t={t:g}", where=family.pair)
        # longest run of admissible samples
        best, start = (0, 0), None
        for q, flag in enumerate(np.append(ok, False)):
            if flag and start is None:
                start = q
            elif not flag and start is not None:
                if q - start > best[1] - best[0]:
                    best = (start, q)
                start = None
        lo, hi = fine[best[0]], fine[best[1] - 1]
    th = np.linspace(lo, hi, count)
    nodes = np.cos(th)[:, None] * u + np.sin(th)[:, None] * v
    spacing = float(th[1] - th[0]) if count > 1 else 0.0
    return nodes, spacing


def surface_trace(c, t, pattern, grid=50, workers=None):
    """Refine along a sampled curve of a pair family.

    ``pattern`` is a :class:`~charvar.limits.Case1Family` (n >= 6) or a
    Case-1 :class:`~charvar.limits.LimitPoint` (n = 5, where the trace is a
    single refinement).  ``grid`` is a node count or an explicit
    ``(nodes, spacing)`` pair.
    """
    if isinstance(pattern, L.LimitPoint):
        p = refine(c, t, pattern)
        return TraceResult(t, pattern.zero_pattern, pattern.coords[None, :], 0.0, [p], [])
    if c.n < 6:
        raise InvalidDimension("families are only used for n >= 6")
    i, j = pattern.pair
    rep = check_cond12(c, i, j)
    if not rep.passed:
        raise GenericityFailure(f"pair conditions fail for {(i, j)}", where=(i, j),
                                detail=rep.to_json())
    nodes, spacing = arc_nodes(pattern, grid, t=t) if np.isscalar(grid) else grid

    def job(a):
        lp = L.LimitPoint((i, j), L.normalize(a), 1, 1, [np.zeros(2)], [])
        if not _eqnb_ok(c, a, i - 1, j - 1):
            return None, {"node": a.tolist(), "error": "GenericityFailure",
                          "message": "node violates the b_pi / b_pj condition"}
        try:
            return _refine_node(c, t, lp), None
        except DegeneracyError as exc:
            return None, {"node": a.tolist(), "error": type(exc).__name__, "message": str(exc)}

    results = _pmap(job, list(nodes), workers)
    return TraceResult(float(t), (i, j), nodes, spacing,
                       [r for r, _ in results], [f for _, f in results if f is not None])


def _refine_node(c, t, lp):
    system = FourMinorSystem(c, t, lp)
    cond = np.linalg.cond(system.jacobian(system.u0))
    if not np.isfinite(cond) or cond > JAC_COND_MAX:
        raise GenericityFailure(f"Newton matrix singular at node (cond {cond:.2e})")
    u, iters, res = newton(system, system.u0)
    xi = system.xi(u)
    xi = xi / np.linalg.norm(xi)
    if xi[system.m] < 0:
        xi = -xi
    P = symbol_array(scale(c, t), xi)
    minres = float(np.max(np.abs(all_minors(P))))
    lemma = propagate_zero_minors(P, [(r + 1, s + 1) for r, s in system.minors])
    if minres > MINOR_TOL * np.linalg.norm(P, 2) ** (c.n - 1) or not lemma.complete:
        raise LemmaHypothesisFailure("node not certified", detail={"minor_residual": minres})
    return SingularPoint(t, xi, lp, 0, rank(P), minres, iters, float(res),
                         L.proj_dist(xi, lp.coords), lemma)


# ----------------------------------------------------------------------------
# n = 4 smoothness


@dataclass
class SmoothnessReport:
    t: float
    samples: int
    circles: int
    min_grad: float
    min_grad_over_t: float
    min_sigma_ratio: float
    singular_found: bool
    worst_point: list
    warning: str = ""

    def to_json(self):
        return {"t": self.t, "samples": self.samples, "circles": self.circles,
                "min_grad": self.min_grad, "min_grad_over_t": self.min_grad_over_t,
                "min_sigma_ratio": self.min_sigma_ratio,
                "singular_found": self.singular_found, "worst_point": self.worst_point,
                "grad_tol": 1e-8, "rank_tol": 1e-8, "warning": self.warning}


def sigma_points(A, rng, samples, batch=64, grid=1025, max_circles=None):
    """Points of ``det P = 0`` on random great circles of the unit sphere.

    Each circle is sampled on ``grid`` angles in ``[0, pi]``; every sign
    change is bisected (60 halvings, far below 1e-12 in arclength).
    Returns ``(points, circles)``.
    """
    n = A.shape[0]
    max_circles = max_circles or 100 * samples
    th = np.linspace(0.0, np.pi, grid)
    out = []
    circles = 0
    total = 0

    def detv(X):
        return np.linalg.det(np.einsum("...k,kij->...ij", X, A))

    while total < samples and circles < max_circles:
        G = rng.normal(size=(batch, n, 2))
        Qm, _ = np.linalg.qr(G)
        u, v = Qm[:, :, 0], Qm[:, :, 1]
        X = np.cos(th)[None, :, None] * u[:, None, :] + np.sin(th)[None, :, None] * v[:, None, :]
        d = detv(X)
        b_idx, t_idx = np.nonzero(np.sign(d[:, :-1]) * np.sign(d[:, 1:]) < 0)
        if b_idx.size:
            lo, hi = th[t_idx], th[t_idx + 1]
            ub, vb = u[b_idx], v[b_idx]
            dlo = d[b_idx, t_idx]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                dm = detv(np.cos(mid)[:, None] * ub + np.sin(mid)[:, None] * vb)
                same = np.sign(dm) == np.sign(dlo)
                lo = np.where(same, mid, lo)
                dlo = np.where(same, dm, dlo)
                hi = np.where(same, hi, mid)
            mid = 0.5 * (lo + hi)
            pts = np.cos(mid)[:, None] * ub + np.sin(mid)[:, None] * vb
            out.append(pts)
            total += len(pts)
        circles += batch
    pts = np.concatenate(out) if out else np.zeros((0, n))
    return pts, circles


def _coordinate_probes(A, tol=1e-12):
    """Directions ``e_k`` and ``e_k +/- e_l`` that lie on the variety.

    As ``t -> 0`` the variety collapses onto the coordinate hyperplanes and any
    degeneration sits near their crossings, which random circles miss.
    """
    n = A.shape[1]
    E = np.eye(n)
    cand = [E[k] for k in range(n)]
    cand += [(E[k] + sgn * E[l]) / np.sqrt(2) for k, l in itertools.combinations(range(n), 2)
             for sgn in (1.0, -1.0)]
    cand = np.array(cand)
    P = np.einsum("...k,kij->...ij", cand, A)
    scale = np.linalg.norm(P, 2, axis=(1, 2)) ** n
    on = np.abs(np.linalg.det(P)) <= tol * np.maximum(scale, 1e-300)
    return cand[on]


def smooth_scan_n4(c, t, samples=10_000, seed=0, check=True):
    """Sample the variety of ``P(xi, t c)`` for n = 4 and test smoothness.

    The gradient is reported twice: raw, ``||grad det|| / ||xi||^3``, and
    divided by ``t``.  As ``t -> 0`` the variety tends to the union of the
    coordinate hyperplanes, whose crossings have zero gradient, so the raw
    minimum shrinks like ``t`` even when the variety is smooth.
    """
    if c.n != 4:
        raise InvalidDimension(f"smooth_scan_n4 needs n = 4, got {c.n}")
    if check:
        rep = check_n4_conditions(c)
        if not rep.passed:
            raise GenericityFailure("n = 4 conditions fail", detail=rep.to_json())
    A = coefficient_matrices(scale(c, t))
    rng = np.random.default_rng(seed)
    pts, circles = sigma_points(A, rng, samples)
    probes = _coordinate_probes(A)
    warning = ""
    if len(pts) < samples:
        warning = f"insufficient coverage: {len(pts)} of {samples} points"
        warnings.warn(warning)
    if len(probes):
        pts = np.concatenate([pts, probes])
    if not len(pts):
        return SmoothnessReport(t, 0, circles, np.nan, np.nan, np.nan, False, [], warning)
    P = np.einsum("...k,kij->...ij", pts, A)
    s = np.linalg.svd(P, compute_uv=False)
    adj = adjugate(P)
    g = np.einsum("...ji,kij->...k", adj, A)
    gn = np.linalg.norm(g, axis=1) / np.linalg.norm(pts, axis=1) ** 3
    ratio = s[:, 2] / s[:, 0]
    worst = int(np.argmin(gn))
    ranks = np.sum(s > 1e-8 * s[:, :1], axis=1)
    found = bool(np.any(ranks <= 2) or np.any(gn < 1e-8))
    return SmoothnessReport(float(t), int(len(pts)), int(circles), float(gn.min()),
                            float(gn.min() / min(t, 1.0)), float(ratio.min()), found,
                            pts[worst].tolist(), warning)


# ----------------------------------------------------------------------------
# existence of characteristic directions


@dataclass
class Witness:
    xi: np.ndarray
    residual: float
    method: str

    def to_json(self):
        return {"xi": self.xi.tolist(), "residual": self.residual, "method": self.method,
                "tol": 1e-10}


def witness_residual(c, xi):
    """``|det P(xi)| / (||xi|| * max_k ||A^k||)^n``."""
    xi = np.asarray(xi, dtype=float)
    s = matrix_scale(c)
    return float(abs(np.linalg.det(symbol_array(c, xi))) / (np.linalg.norm(xi) * s) ** c.n)


def _arc_root(c, x, y):
    """Bisect ``det`` along the great circle from ``x`` to ``y`` (opposite signs)."""
    x = x / np.linalg.norm(x)
    w = y - (y @ x) * x
    w = w / np.linalg.norm(w)
    ang = np.arctan2(y @ w, y @ x)
    if ang <= 0:
        ang += 2 * np.pi

    def f(th):
        return np.linalg.det(symbol_array(c, np.cos(th) * x + np.sin(th) * w))

    th = brentq(f, 0.0, ang, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return np.cos(th) * x + np.sin(th) * w


def nonempty_witness(c, seed=0, budget=2000, tol=1e-10):
    """A unit covector with ``det P(xi, c) = 0`` up to ``tol`` (normalized)."""
    n = c.n
    for k in range(n):
        e = np.eye(n)[k]
        if witness_residual(c, e) <= tol:
            return Witness(e, witness_residual(c, e), "coordinate")
    rng = np.random.default_rng(seed)
    if n % 2 == 1:
        x = rng.normal(size=n)
        # det is odd: the arc from x to -x through an orthogonal direction changes sign.
        x = x / np.linalg.norm(x)
        w = rng.normal(size=n)
        w -= (w @ x) * x
        w /= np.linalg.norm(w)

        def f(th):
            return np.linalg.det(symbol_array(c, np.cos(th) * x + np.sin(th) * w))

        th = brentq(f, 0.0, np.pi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        xi = np.cos(th) * x + np.sin(th) * w
        return Witness(xi, witness_residual(c, xi), "antipodal")
    X = rng.normal(size=(budget, n))
    d = np.linalg.det(symbol_array(c, X))
    pos, neg = np.nonzero(d > 0)[0], np.nonzero(d < 0)[0]
    if pos.size and neg.size:
        xi = _arc_root(c, X[pos[0]], X[neg[0]])
        return Witness(xi, witness_residual(c, xi), "sign-change")
    return _minimize_witness(c, rng, budget // 100 or 1, tol)


def _minimize_witness(c, rng, starts, tol):
    n = c.n
    best = None
    for _ in range(starts):
        x0 = rng.normal(size=n)

        def obj(x):
            return witness_residual(c, x) ** 2 * 1e20

        r = minimize(obj, x0, method="Nelder-Mead",
                     options={"xatol": 1e-14, "fatol": 1e-30, "maxiter": 20000})
        xi = r.x / np.linalg.norm(r.x)
        res = witness_residual(c, xi)
        if best is None or res < best[1]:
            best = (xi, res)
        if res <= tol:
            return Witness(xi, res, "minimize")
    raise NotFound(f"no witness after {starts} starts (best residual {best[1]:.2e})",
                   detail={"starts": starts, "best": best[1]})
