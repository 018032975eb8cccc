import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barriermpc.condense import InfeasibleError, box, condense, double_integrator
from barriermpc.explicit import (
    AffinePiece,
    DegenerateActiveSetError,
    PieceCache,
    enumerate_pieces,
    eval_explicit,
    phase_one,
    piece_gains,
    sigma_from_key,
    sigma_key,
    solve_qp,
)
from barriermpc.condense import CondensedQp


def scalar_qp(h=1.0, f=1.0, bound=1.0):
    """1-D QP: minimize 0.5 h u^2 - f x0 u subject to |u| <= bound."""
    return CondensedQp(
        H=np.array([[h]]),
        F=np.array([[f]]),
        G=np.array([[1.0], [-1.0]]),
        P=np.zeros((2, 1)),
        w=np.array([bound, bound]),
        Ahat=np.eye(1),
        Bhat=np.eye(1),
        T=1,
        d_x=1,
        d_u=1,
        cost_const=np.zeros((1, 1)),
    )


# Reference values produced by tests/oracles/qp_reference.py (accelerated
# dual projected gradient, 1e6 iterations) on the double-integrator
# benchmark, frozen here.
ORACLE_X0_A = np.array([-6.0, 2.0])
ORACLE_U_A = np.array([
    -0.44630358577456397, -0.9999999999999996, -0.9999999999999989,
    -1.0000000000000002, -0.5892961620624733, 0.1730288185419631,
    0.31964474686850586, 0.7692373850835166, 0.7736887973422718,
    -1.0000000000000002,
])
ORACLE_VALUE_A = -1171.5471038383532
ORACLE_X0_B = np.array([3.0, -1.5])
ORACLE_VALUE_B = -956.72109599823978


@pytest.fixture(scope="module")
def bench_qp():
    return condense(double_integrator())


# ---------------------------------------------------------------------------
# solve_qp


def test_interior_optimum_scalar():
    qp = scalar_qp()
    sol = solve_qp(qp, np.array([0.5]))
    assert sol.u_star[0] == pytest.approx(0.5, abs=1e-12)
    assert not sol.sigma.any()


def test_clipped_optimum_scalar():
    qp = scalar_qp()
    sol = solve_qp(qp, np.array([2.0]))
    assert sol.u_star[0] == pytest.approx(1.0, abs=1e-12)
    assert sol.sigma[0] and not sol.sigma[1]
    assert sol.lam[0] == pytest.approx(1.0, abs=1e-12)  # stationarity: u - x0 + lam = 0


def test_matches_frozen_dual_ascent_oracle(bench_qp):
    sol = solve_qp(bench_qp, ORACLE_X0_A)
    np.testing.assert_allclose(sol.u_star, ORACLE_U_A, atol=1e-6)
    assert bench_qp.objective(ORACLE_X0_A, sol.u_star) == pytest.approx(
        ORACLE_VALUE_A, abs=1e-6
    )
    sol_b = solve_qp(bench_qp, ORACLE_X0_B)
    assert bench_qp.objective(ORACLE_X0_B, sol_b.u_star) == pytest.approx(
        ORACLE_VALUE_B, abs=1e-6
    )


def test_box_pgd_oracle_agreement():
    # Literal projected gradient with clipping on a box-only instance.
    from tests.oracles.qp_reference import box_pgd

    spec = double_integrator(T=3, state_bound=1e6)
    qp = condense(spec)
    x0 = np.array([1.2, -0.7])
    u_ref = box_pgd(qp.H, qp.F.T @ x0, -np.ones(3), np.ones(3), iters=100_000)
    sol = solve_qp(qp, x0)
    assert qp.objective(x0, sol.u_star) <= qp.objective(x0, u_ref) + 1e-9
    np.testing.assert_allclose(sol.u_star, u_ref, atol=1e-6)


def test_kkt_certificate(bench_qp):
    rng = np.random.default_rng(3)
    for _ in range(50):
        x0 = rng.uniform(-5, 5, 2)
        try:
            sol = solve_qp(bench_qp, x0)
        except InfeasibleError:
            continue
        stat, primal, comp, dual = sol.kkt_residuals(bench_qp, x0)
        assert stat <= 1e-8
        assert primal <= 1e-8
        assert comp <= 1e-8
        assert dual <= 1e-8


def test_objective_monotone_over_iterations(bench_qp):
    rng = np.random.default_rng(11)
    for _ in range(20):
        x0 = rng.uniform(-6, 6, 2)
        trace = []
        try:
            solve_qp(bench_qp, x0, trace=trace)
        except InfeasibleError:
            continue
        diffs = np.diff(np.array(trace))
        assert np.all(diffs <= 1e-9)


def test_infeasible_state_raises(bench_qp):
    with pytest.raises(InfeasibleError):
        solve_qp(bench_qp, np.array([10.0, 10.0]))


def test_phase_one_feasible_and_certificate(bench_qp):
    u, t_star, cert = phase_one(bench_qp, np.zeros(2))
    assert t_star <= 1e-12
    assert bench_qp.residuals(np.zeros(2), u).min() >= -1e-9
    _, t_bad, cert = phase_one(bench_qp, np.array([10.0, 10.0]))
    assert t_bad > 0
    assert cert is not None
    # Certificate claims the state itself as infeasible.
    assert bench_qp.w @ cert + np.array([10.0, 10.0]) @ (bench_qp.P.T @ cert) < 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kkt_on_random_systems(seed):
    from barriermpc.condense import LinearSystem, MpcSpec

    rng = np.random.default_rng(seed)
    n, m = 2, 1
    sys = LinearSystem(rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, (n, m)))
    spec = MpcSpec(
        sys=sys, T=3, Q=np.eye(n), R=0.1 * np.eye(m), X=box(5.0, n), U=box(1.0, m)
    )
    qp = condense(spec)
    x0 = rng.uniform(-1.0, 1.0, n)
    try:
        sol = solve_qp(qp, x0)
    except InfeasibleError:
        return
    stat, primal, comp, dual = sol.kkt_residuals(qp, x0)
    assert max(stat, primal, comp, dual) <= 1e-8


# ---------------------------------------------------------------------------
# piece gains


def test_empty_active_set_gain(bench_qp):
    piece = piece_gains(bench_qp, np.zeros(60, dtype=bool))
    np.testing.assert_allclose(piece.K, np.linalg.solve(bench_qp.H, bench_qp.F.T))
    np.testing.assert_allclose(piece.k, np.zeros(10))


def test_scalar_upper_bound_gain():
    # With u pinned at the upper bound, the law is constant: K = 0, k = 1.
    qp = scalar_qp()
    piece = piece_gains(qp, np.array([True, False]))
    assert piece.K[0, 0] == pytest.approx(0.0, abs=1e-14)
    assert piece.k[0] == pytest.approx(1.0, abs=1e-14)


def test_piece_matches_solver_in_region(bench_qp):
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(200):
        x0 = rng.uniform(-6, 6, 2)
        try:
            sol = solve_qp(bench_qp, x0)
        except InfeasibleError:
            continue
        try:
            piece = piece_gains(bench_qp, sol.sigma)
        except DegenerateActiveSetError:
            continue
        assert np.linalg.norm(piece.K @ x0 + piece.k - sol.u_star) <= 1e-8
        checked += 1
    assert checked >= 100


def test_degenerate_active_set_raises(bench_qp):
    sigma = np.zeros(60, dtype=bool)
    sigma[0] = sigma[1] = True  # u_0 <= 1 and -u_0 <= 1 cannot bind together
    with pytest.raises(DegenerateActiveSetError):
        piece_gains(bench_qp, sigma)


def test_piecewise_affinity_fit_and_predict(bench_qp):
    # Fit the affine law on 3 states of one region and predict a 4th.
    offsets = [np.zeros(2), np.array([0.01, 0.0]), np.array([0.0, 0.01]), np.array([0.008, 0.006])]
    for base in (np.array([3.0, -1.5]), np.array([0.0, 1.0]), np.array([-2.0, 0.5])):
        ref = solve_qp(bench_qp, base)
        sols = [solve_qp(bench_qp, base + off) for off in offsets]
        if any(sigma_key(s.sigma) != sigma_key(ref.sigma) for s in sols):
            continue  # region boundary crossed; try the next base point
        states = [base + off for off in offsets]
        X = np.array([[s[0], s[1], 1.0] for s in states[:3]])
        coeff = np.linalg.solve(X, np.array([s.u_star for s in sols[:3]]))
        predicted = np.array([states[3][0], states[3][1], 1.0]) @ coeff
        np.testing.assert_allclose(predicted, sols[3].u_star, atol=1e-7)
        return
    pytest.fail("no base point produced four same-region samples")


# ---------------------------------------------------------------------------
# enumeration


def test_single_piece_when_unconstrained():
    spec = double_integrator(T=3, state_bound=1e5, input_bound=1e5)
    qp = condense(spec)
    grid = np.array([[a, b] for a in np.linspace(-1, 1, 7) for b in np.linspace(-1, 1, 7)])
    census = enumerate_pieces(qp, grid)
    assert census.n_pieces == 1
    assert list(census.counts.values()) == [49]
    key = next(iter(census.counts))
    assert not sigma_from_key(key).any()


def test_three_piece_saturation_structure():
    qp = scalar_qp()
    grid = np.linspace(-2, 2, 81).reshape(-1, 1)
    census = enumerate_pieces(qp, grid)
    assert census.n_pieces == 3
    keys = set(census.counts)
    assert keys == {"00", "10", "01"}


def test_census_accounting(bench_qp):
    g = np.linspace(-10, 10, 41)
    grid = np.array([[a, b] for a in g for b in g])
    census = enumerate_pieces(bench_qp, grid)
    assert sum(census.counts.values()) + census.infeasible == census.total == 41 * 41
    assert census.n_pieces >= 40
    assert census.infeasible > 0
    for key, piece in census.pieces.items():
        assert isinstance(piece, AffinePiece)
        assert sigma_key(piece.sigma) == key


# ---------------------------------------------------------------------------
# explicit evaluation cache


def test_cache_hit_returns_identical_input(bench_qp):
    cache = PieceCache(bench_qp)
    x0 = np.array([2.0, 0.5])
    first = eval_explicit(bench_qp, x0, cache)
    assert cache.misses == 1 and cache.hits == 0
    second = eval_explicit(bench_qp, x0, cache)
    assert cache.hits == 1
    np.testing.assert_allclose(first, second, atol=0)
    np.testing.assert_allclose(second, solve_qp(bench_qp, x0).u_star, atol=1e-10)


def test_empty_cache_falls_back_to_solver(bench_qp):
    cache = PieceCache(bench_qp)
    x0 = np.array([-4.0, 1.0])
    np.testing.assert_allclose(
        eval_explicit(bench_qp, x0, cache), solve_qp(bench_qp, x0).u_star, atol=1e-12
    )


def test_explicit_matches_solver_on_random_states(bench_qp):
    cache = PieceCache(bench_qp)
    rng = np.random.default_rng(17)
    worst = 0.0
    evaluated = 0
    for _ in range(1000):
        x0 = rng.uniform(-8, 8, 2)
        try:
            expected = solve_qp(bench_qp, x0).u_star
        except InfeasibleError:
            continue
        got = eval_explicit(bench_qp, x0, cache)
        worst = max(worst, float(np.linalg.norm(got - expected)))
        evaluated += 1
    assert evaluated > 300
    assert worst <= 1e-8
    assert cache.hits > cache.misses  # the cache actually serves lookups


def test_sigma_key_round_trip():
    sigma = np.array([True, False, True, True, False])
    assert sigma_key(sigma) == "10110"
    np.testing.assert_array_equal(sigma_from_key("10110"), sigma)


def test_batch_evaluation_matches_per_state_solves(bench_qp):
    from barriermpc.explicit import eval_explicit_batch

    rng = np.random.default_rng(53)
    states = rng.uniform(-11, 11, size=(300, 2))
    U, infeasible = eval_explicit_batch(bench_qp, states)
    for x0, u, bad in zip(states, U, infeasible):
        try:
            expected = solve_qp(bench_qp, x0).u_star
        except InfeasibleError:
            assert bad
            continue
        assert not bad
        assert np.linalg.norm(u - expected, np.inf) <= 1e-8
    assert infeasible.any() and not infeasible.all()


def test_batch_evaluation_reuses_cache(bench_qp):
    from barriermpc.explicit import PieceCache, eval_explicit_batch

    cache = PieceCache(bench_qp)
    rng = np.random.default_rng(59)
    states = rng.uniform(-6, 6, size=(200, 2))
    eval_explicit_batch(bench_qp, states, cache=cache)
    first_fill = len(cache)
    assert first_fill > 0
    U1, _ = eval_explicit_batch(bench_qp, states, cache=cache)
    assert len(cache) == first_fill  # second pass adds no new pieces
    U2, _ = eval_explicit_batch(bench_qp, states)
    np.testing.assert_allclose(U1, U2, atol=1e-10)
