import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from charvar import limits as L
from charvar import params as prm
from charvar.errors import DegeneratePair, DegenerateQuadruple, InvalidDimension
from charvar.symbol import b_matrix


def permute(c, sigma):
    """Relabel indices: ``c'_i^{kj} = c_{s(i)}^{s(k) s(j)}`` (0-based ``sigma``)."""
    C = c.tensor
    s = np.asarray(sigma)
    return prm.ParamSet.from_tensor(C[np.ix_(s, s, s)])


def sturm_count(coeffs):
    """Number of distinct real roots by a Sturm sequence."""
    p = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    seq = [p, np.polyder(p)]
    while seq[-1].size > 1 or (seq[-1].size == 1 and seq[-1][0] != 0):
        _, r = np.polydiv(seq[-2], seq[-1])
        r = np.trim_zeros(r, "f")
        if r.size == 0 or np.max(np.abs(r)) < 1e-12 * np.max(np.abs(seq[-2])):
            break
        seq.append(-r)

    def changes(sign_at):
        signs = [s for s in sign_at if s != 0]
        return sum(1 for a, b in zip(signs, signs[1:]) if a != b)

    lo = [np.sign(q[0]) * (-1) ** (q.size - 1) for q in seq]
    hi = [np.sign(q[0]) for q in seq]
    return changes(lo) - changes(hi)


def rank2_completions(Q):
    """Independent oracle: eliminate through the leading 2x2 block."""
    eqs = []
    for r, s in [(2, 3), (3, 2)]:
        eqs.append(np.array([
            Q[r, s], -Q[r, 1] * Q[1, s], -Q[r, 0] * Q[0, s],
            -Q[r, s] * Q[0, 1] * Q[1, 0] + Q[r, 0] * Q[0, 1] * Q[1, s] + Q[r, 1] * Q[1, 0] * Q[0, s]]))
    e1, e2 = eqs
    lin = e2[0] * e1 - e1[0] * e2
    A, B, C = lin[1], lin[2], lin[3]
    quad = [e1[0] * A, e1[0] * C - B * e1[1] + e1[2] * A, e1[2] * C - B * e1[3]]
    sols = []
    for z0 in np.roots(quad):
        if abs(z0.imag) > 1e-9 * max(1, abs(z0)):
            continue
        z0 = z0.real
        z1 = -(A * z0 + C) / B
        top = np.array([[z0, Q[0, 1]], [Q[1, 0], z1]])
        S = Q[2:, 2:] - Q[2:, :2] @ np.linalg.solve(top, Q[:2, 2:])
        sols.append(np.array([z0, z1, -S[0, 0], -S[1, 1]]))
    return sols


# ---------------------------------------------------------------------------
# helpers


def test_normalize_largest_coordinate():
    a = L.normalize([0.2, -3.0, 1.0])
    np.testing.assert_allclose(a, [-0.2 / 3, 1.0, -1 / 3])
    b = L.normalize([2.0, -2.0, 0.0])
    assert b[0] == 1.0
    with pytest.raises(ValueError):
        L.normalize([0.0, 0.0])


def test_proj_dist_and_dedup():
    a = np.array([1.0, 2.0, 3.0])
    assert L.proj_dist(a, -5 * a) == pytest.approx(0.0, abs=1e-15)
    pts = [a, -a, a + 1e-9, np.array([1.0, 0, 0])]
    assert len(L.dedup(pts)) == 2
    assert len(L.dedup(pts, radius=1e-12)) == 3


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=5), st.floats(0.1, 3))
@settings(max_examples=80, deadline=None)
def test_real_roots_against_sturm(roots, lead):
    # distinct, well separated roots plus a complex pair
    roots = sorted(set(round(r, 1) for r in roots))
    p = lead * np.poly(roots)
    p = np.polymul(p, [1.0, 0.0, 1.0])
    got, double = L.real_roots(p)
    assert len(got) == sturm_count(p) == len(roots)
    np.testing.assert_allclose(got, roots, atol=1e-7)
    assert not double


def test_real_roots_flags_double_root():
    _, double = L.real_roots(np.poly([1.0, 1.0, -2.0]))
    assert double


# ---------------------------------------------------------------------------
# the three families


@pytest.fixture(scope="module")
def c5():
    return prm.sample(5, 1)


def test_case1_points_solve_pair_equations(c5):
    pts = L.case1_points(c5)
    assert len(pts) == 10
    for p in pts:
        i, j = (x - 1 for x in p.zero_pattern)
        a = p.coords
        assert a[i] == 0 and a[j] == 0
        B = b_matrix(c5, a)
        assert abs(B[i, j]) < 1e-13 and abs(B[j, i]) < 1e-13
        assert np.max(np.abs(a)) == 1.0


def test_case2_points_satisfy_the_cubic(c5):
    pts = L.case2_points(c5)
    for p in pts:
        i, j, l = (x - 1 for x in p.zero_pattern)
        B = b_matrix(c5, p.coords)
        lhs = B[i, j] * B[j, l] * B[l, i]
        rhs = B[j, i] * B[l, j] * B[i, l]
        assert abs(lhs - rhs) < 1e-12
        Z = [i, j, l]
        y = p.zbar[0]
        Q = B[np.ix_(Z, Z)] + np.diag(y)
        s = np.linalg.svd(Q, compute_uv=False)
        assert s[1] < 1e-10 * s[0]


def test_case2_root_count_matches_triples(c5):
    summaries = L.case2_triples(c5)
    assert len(summaries) == 10
    assert sum(len(s.admissible) for s in summaries) == len(L.case2_points(c5))
    for s in summaries:
        assert s.roots == sturm_count(s.coeffs)


@pytest.mark.parametrize("seed", range(6))
def test_case3_against_independent_elimination(seed):
    rng = np.random.default_rng(seed)
    Q = rng.uniform(-1, 1, (4, 4))
    np.fill_diagonal(Q, 0)
    sols, quad, _ = L.case3_solutions(Q)
    ref = rank2_completions(Q)
    assert len(sols) == len(ref)
    for x in sols:
        M = Q + np.diag(x)
        s = np.linalg.svd(M, compute_uv=False)
        assert s[2] < 1e-10 * s[0]
        assert min(np.max(np.abs(x - r)) for r in ref) < 1e-8


def test_case3_both_root_counts_occur():
    counts = set()
    rng = np.random.default_rng(0)
    for _ in range(200):
        Q = rng.uniform(-1, 1, (4, 4))
        np.fill_diagonal(Q, 0)
        counts.add(len(L.case3_solutions(Q)[0]))
    assert counts == {0, 2}


def test_case3_degenerate_pivot():
    Q = np.ones((4, 4))
    np.fill_diagonal(Q, 0)
    with pytest.raises(DegenerateQuadruple):
        L.case3_solutions(Q)


def test_case3_points_rank_two(c5):
    for p in L.case3_points(c5):
        Z = [x - 1 for x in p.zero_pattern]
        B = b_matrix(c5, p.coords)
        assert len(p.zbar) == p.roots
        for y in p.zbar:
            s = np.linalg.svd(B[np.ix_(Z, Z)] + np.diag(y), compute_uv=False)
            assert s[2] < 1e-10 * s[0]


@pytest.mark.parametrize("seed", range(8))
def test_prediction_structure(seed):
    pred = L.predict_count(prm.sample(5, seed))
    assert pred.alpha + pred.gamma == 10
    assert 0 <= pred.beta <= 5
    assert pred.total == 10 + pred.alpha + 2 * pred.beta + 3 * pred.gamma


def test_prediction_is_scale_invariant(c5):
    assert L.predict_count(prm.scale(c5, 1e-4)).total == L.predict_count(c5).total


def test_permutation_equivariance(c5):
    sigma = [2, 4, 0, 1, 3]
    cp = permute(c5, sigma)
    assert L.predict_count(cp).to_json() == L.predict_count(c5).to_json()
    ref = [L.unit(p.coords) for p in L.case1_points(c5) + L.case2_points(c5)]
    for p in L.case1_points(cp) + L.case2_points(cp):
        eta = np.zeros(5)
        eta[sigma] = p.coords
        assert min(L.proj_dist(eta, r) for r in ref) < 1e-10


def test_zero_params_are_degenerate():
    with pytest.raises(DegeneratePair):
        L.case1_points(prm.sample(5, 0, dist="point"))


def test_wrong_dimension():
    with pytest.raises(InvalidDimension):
        L.predict_count(prm.sample(4, 0))
    with pytest.raises(InvalidDimension):
        L.case1_points(prm.sample(4, 0))


def test_families_for_n6():
    c = prm.sample(6, 2)
    fams = L.case1_points(c)
    assert len(fams) == 15
    for fam in fams:
        i, j = (x - 1 for x in fam.pair)
        assert fam.basis.shape == (6, 2)
        for a in fam.basis.T:
            B = b_matrix(c, a)
            assert abs(B[i, j]) < 1e-13 and abs(B[j, i]) < 1e-13
    tri = L.case2_points(c)[0]
    assert len(L.case2_points(c)) == 20
    assert np.isfinite(tri.residual(np.ones(6)))


def test_limit_set_membership(c5):
    desc = L.lambda_general(c5)
    for p in L.case1_points(c5) + L.case2_points(c5) + L.case3_points(c5):
        assert desc.contains(p.coords)
    rng = np.random.default_rng(0)
    assert not desc.contains(rng.normal(size=5), tol=1e-6)


def test_count_prediction_uses_two_beta():
    assert L.CountPrediction(4, 3, 6).total == 10 + 4 + 6 + 18
