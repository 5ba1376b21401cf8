import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import lemma_cases as lc
from charvar import limits as L
from charvar import params as prm
from charvar import singular as S
from charvar.errors import GenericityFailure, InvalidDimension
from charvar.symbol import all_minors, assemble, symbol_array


@pytest.fixture(scope="module")
def c5():
    return prm.sample(5, 1)


@pytest.fixture(scope="module")
def seeds5(c5):
    return S.seeds_n5(c5)[0]


# ---------------------------------------------------------------------------
# linear-algebra lemmas


@given(st.integers(3, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_dependence_lemma(m, seed):
    V = lc.dependence_family(m, np.random.default_rng(seed))
    assert lc.dependence_hypotheses(V)
    assert lc.all_subsets_dependent(V)


def test_dependence_lemma_needs_independent_core():
    # e_1, ..., e_{m-1}, 0 in R^{m-1}: dropping any e_i leaves a dependent set
    # only because of the zero vector; the common core hypothesis is what fails
    # for the shifted family below.
    V = np.column_stack([np.eye(3)[:, :2], np.zeros(3), np.eye(3)[:, 2]])
    assert not lc.dependence_hypotheses(V)
    assert not lc.all_subsets_dependent(V)


@given(st.integers(3, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_four_minor_lemma_low_rank(n, seed):
    P = lc.four_minor_instance(n, np.random.default_rng(seed), "low")
    assert lc.full_rank_subblocks(P)
    rep, rel = S.four_minor_lemma(P)
    assert rep.complete
    assert rel < 1e-8


@given(st.integers(3, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_four_minor_lemma_hypothesis_catches_kernel_case(n, seed):
    P = lc.four_minor_instance(n, np.random.default_rng(seed), "kernel")
    M = all_minors(P) / np.linalg.norm(P, 2) ** (n - 1)
    assert np.max(np.abs(M[:2, :2])) < 1e-10
    assert not lc.full_rank_subblocks(P)
    rep, rel = S.four_minor_lemma(P)
    assert not rep.complete
    assert rep.failed
    assert rel > 1e-6


def test_diagonal_counterexample_fails_hypothesis():
    P = np.diag([1.0, 1.0, 1.0, 0.0])
    M = all_minors(P)
    assert np.count_nonzero(M) == 1 and M[3, 3] == 1.0
    assert not lc.full_rank_subblocks(P)
    rep, rel = S.four_minor_lemma(P)
    assert not rep.complete
    assert rep.failed
    assert rel == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# the four-minor system


def test_zero_params_minors_vanish_on_pattern():
    c = prm.sample(5, 0, dist="point")
    rng = np.random.default_rng(0)
    for _ in range(5):
        xi = rng.normal(size=5)
        xi[:2] = 0
        P = assemble(c, xi)
        for r, s in S.minor_set(1, (0, 1)):
            assert abs(np.linalg.det(np.delete(np.delete(P.entries, r, 0), s, 1))) == 0.0


def test_minor_sets():
    assert S.minor_set(1, (0, 1)) == [(0, 0), (1, 1), (0, 1), (1, 0)]
    assert S.minor_set(2, (0, 1, 2)) == [(0, 1), (1, 0), (0, 2), (1, 2)]
    with pytest.raises(ValueError):
        S.minor_set(4, (0,))


def test_raw_minors_small_at_predictor(c5, seeds5):
    p, b = next(sb for sb in seeds5 if sb[0].case == 1)
    ts = [1e-2, 1e-3, 1e-4]
    vals = []
    for t in ts:
        sysm = S.four_minor_system(c5, t, p, b)
        vals.append(np.max(np.abs(sysm.raw_minors(sysm.u0))))
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    assert slope > 1.9


def test_residual_bounded_away_from_variety(c5, seeds5):
    p, b = seeds5[0]
    sysm = S.four_minor_system(c5, 1e-3, p, b)
    far = sysm.u0 + np.array([5.0, -5.0, 0.5, 0.5])[: sysm.u0.size]
    assert np.max(np.abs(sysm(far))) > 1e-2


def test_complex_step_jacobian(c5, seeds5):
    p, b = seeds5[12]
    sysm = S.four_minor_system(c5, 1e-3, p, b)
    u = sysm.u0 + 0.01
    J = sysm.jacobian(u)
    h = 1e-6
    fd = np.column_stack([(sysm(u + h * e) - sysm(u - h * e)) / (2 * h) for e in np.eye(u.size)])
    np.testing.assert_allclose(J, fd, rtol=1e-5, atol=1e-7)


# ---------------------------------------------------------------------------
# refinement


def test_refined_points_have_rank_three(c5, seeds5):
    t = 1e-4
    for p, b in seeds5[::5]:
        sp = S.refine(c5, t, p, b)
        assert sp.rank_cert.rank <= 3
        P = symbol_array(prm.scale(c5, t), sp.xi)
        assert np.max(np.abs(all_minors(P))) <= 1e-8
        assert sp.lemma.complete
        assert sp.seed_distance < 50 * t
        assert np.linalg.norm(sp.xi) == pytest.approx(1.0)


def test_refine_refuses_zero_params():
    c = prm.sample(5, 0, dist="point")
    lp = L.LimitPoint((1, 2), np.array([0, 0, 1.0, 1.0, 1.0]), 1, 1, [np.zeros(2)], [])
    with pytest.raises(GenericityFailure):
        S.refine(c, 1e-3, lp)


def test_refine_is_projectively_consistent(c5, seeds5):
    p, b = next(sb for sb in seeds5 if sb[0].case == 2)
    flipped = L.LimitPoint(p.zero_pattern, -3.0 * p.coords, p.case, p.roots, p.zbar, p.notes)
    a = S.refine(c5, 1e-3, p, b)
    f = S.refine(c5, 1e-3, flipped, b)
    assert L.proj_dist(a.xi, f.xi) < 1e-12


def test_drift_contracts_linearly(c5, seeds5):
    for p, b in seeds5[::7]:
        d1 = S.refine(c5, 1e-4, p, b).seed_distance
        d2 = S.refine(c5, 5e-5, p, b).seed_distance
        assert d2 / d1 == pytest.approx(0.5, abs=0.05)


def test_count_matches_prediction_at_small_t(c5):
    res = S.count_detected(c5, 1e-4)
    assert res.count == L.predict_count(c5).total
    assert not res.failures
    assert all(p.rank_cert.rank == 3 for p in res.points)
    xs = [p.xi for p in res.points]
    assert min(L.proj_dist(a, b) for a, b in itertools.combinations(xs, 2)) > 1e-6


def test_count_resolves_case3_branches_at_tiny_t(c5):
    assert S.count_detected(c5, 1e-8).count == L.predict_count(c5).total


def test_count_is_independent_of_threads(c5):
    a = S.count_detected(c5, 1e-3, workers=1)
    b = S.count_detected(c5, 1e-3, workers=4)
    assert a.count == b.count
    for p, q in zip(a.points, b.points):
        np.testing.assert_array_equal(p.xi, q.xi)


def test_pair_violation_is_excluded():
    c = prm.sample(5, 1)
    C = np.array(c.tensor)
    C[0, 2, 1] = C[0, 1, 2] = C[1, 2, 0] * C[0, 3, 1] / C[1, 3, 0]
    bad = prm.ParamSet.from_tensor(C)
    res = S.count_detected(bad, 1e-4)
    pairs = [f["where"] for f in res.failures if f["error"] == "GenericityFailure"]
    assert (1, 2) in pairs
    assert all(p.seed.zero_pattern != (1, 2) for p in res.points)


def test_counting_needs_n5():
    with pytest.raises(InvalidDimension):
        S.count_detected(prm.sample(6, 0), 1e-3)


def test_drift_slope_and_tmax(c5):
    slope, dists = S.drift_slope(c5, ts=(1e-3, 1e-4, 1e-5))
    assert slope == pytest.approx(1.0, abs=0.05)
    assert S.estimate_tmax(c5, ts=(1e-3, 1e-4)) == 1e-3


# ---------------------------------------------------------------------------
# traces


def test_trace_reduces_to_refine_for_n5(c5, seeds5):
    p = next(sb[0] for sb in seeds5 if sb[0].case == 1)
    tr = S.surface_trace(c5, 1e-3, p)
    sp = S.refine(c5, 1e-3, p)
    np.testing.assert_allclose(tr.points[0].xi, sp.xi)


def test_trace_n6_nodes_are_singular():
    c = prm.sample(6, 2)
    fam = L.case1_family(c, 1, 2)
    tr = S.surface_trace(c, 1e-3, fam, grid=12)
    assert len(tr.converged) == 12
    P = symbol_array(prm.scale(c, 1e-3), tr.converged[5].xi)
    assert np.max(np.abs(all_minors(P))) < 1e-8 * np.linalg.norm(P, 2) ** 5
    for sp in tr.converged:
        assert sp.rank_cert.rank <= 4


def test_arc_nodes_avoid_coordinate_planes():
    c = prm.sample(6, 0)
    fam = L.case1_family(c, 1, 2)
    nodes, spacing = S.arc_nodes(fam, 20, t=1e-3)
    u = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    assert np.min(np.abs(u[:, 2:])) >= 3 * np.sqrt(1e-3) - 1e-12
    assert spacing > 0


# ---------------------------------------------------------------------------
# n = 4 smoothness


def test_zero_params_are_not_smooth():
    rep = S.smooth_scan_n4(prm.sample(4, 0, dist="point"), 1e-3, samples=200, check=False)
    assert rep.singular_found


def test_generic_n4_is_smooth():
    rep = S.smooth_scan_n4(prm.sample(4, 3), 1e-3, samples=2000)
    assert not rep.singular_found
    assert rep.samples >= 2000
    assert rep.min_grad_over_t > 1e-4
    assert rep.min_grad_over_t == pytest.approx(rep.min_grad / 1e-3)


def test_smooth_scan_checks_conditions():
    with pytest.raises(GenericityFailure):
        S.smooth_scan_n4(prm.sample(4, 0, dist="point", value=1.0), 1e-3, samples=10)
    with pytest.raises(InvalidDimension):
        S.smooth_scan_n4(prm.sample(5, 0), 1e-3)


# ---------------------------------------------------------------------------
# witnesses


def test_witness_for_zero_params_is_coordinate():
    w = S.nonempty_witness(prm.sample(4, 0, dist="point"))
    assert w.residual == 0.0
    assert np.count_nonzero(w.xi) < 4


@pytest.mark.parametrize("n", [3, 5])
def test_odd_witness(n):
    for seed in range(3):
        w = S.nonempty_witness(prm.sample(n, seed), seed=seed)
        assert w.residual <= 1e-10


def test_even_witness_cross_checked_by_sampling():
    c = prm.scale(prm.sample(4, 2), 0.1)
    X = np.random.default_rng(0).normal(size=(20_000, 4))
    d = np.linalg.det(symbol_array(c, X))
    assert d.min() < 0 < d.max()
    w = S.nonempty_witness(c, seed=1)
    assert w.residual <= 1e-10
