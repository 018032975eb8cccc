import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barriermpc.condense import (
    CondensedQp,
    InfeasibleError,
    LinearSystem,
    MpcSpec,
    Polytope,
    box,
    build_prediction_matrices,
    chebyshev_center,
    condense,
    double_integrator,
    geometry,
    load_problem,
    simulate,
)


@st.composite
def random_specs(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 2))
    T = draw(st.integers(1, 4))
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, size=(n, n))
    B = rng.uniform(-1.0, 1.0, size=(n, m))
    WQ = rng.uniform(-1.0, 1.0, size=(n, n))
    WR = rng.uniform(-1.0, 1.0, size=(m, m))
    spec = MpcSpec(
        sys=LinearSystem(A, B),
        T=T,
        Q=WQ @ WQ.T + 0.1 * np.eye(n),
        R=WR @ WR.T + 0.1 * np.eye(m),
        X=box(draw(st.floats(2.0, 8.0)), n),
        U=box(draw(st.floats(0.5, 3.0)), m),
    )
    return spec, rng


# ---------------------------------------------------------------------------
# prediction matrices


def test_prediction_matrices_identity_system():
    sys = LinearSystem(np.eye(2), np.eye(2))
    Ahat, Bhat = build_prediction_matrices(sys, 2)
    np.testing.assert_allclose(Ahat, np.vstack([np.eye(2), np.eye(2)]))
    expected = np.block([[np.eye(2), np.zeros((2, 2))], [np.eye(2), np.eye(2)]])
    np.testing.assert_allclose(Bhat, expected)


def test_prediction_matrices_horizon_one():
    spec = double_integrator(T=1)
    Ahat, Bhat = build_prediction_matrices(spec.sys, 1)
    np.testing.assert_allclose(Ahat, spec.sys.A)
    np.testing.assert_allclose(Bhat, spec.sys.B)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prediction_matches_rollout(seed):
    rng = np.random.default_rng(seed)
    sys = LinearSystem(rng.uniform(-1, 1, (3, 3)), rng.uniform(-1, 1, (3, 2)))
    T = 3
    Ahat, Bhat = build_prediction_matrices(sys, T)
    x0 = rng.uniform(-1, 1, 3)
    u = rng.uniform(-1, 1, T * 2)
    stacked = Ahat @ x0 + Bhat @ u
    traj = simulate(sys, x0, u)
    np.testing.assert_allclose(stacked.reshape(T, 3), traj[1:], atol=1e-12)


# ---------------------------------------------------------------------------
# condensation


def test_constraint_count_double_integrator():
    qp = condense(double_integrator())
    assert qp.m == 10 * (2 + 4) == 60
    assert qp.n_u == 10


def test_residuals_at_origin_equal_bounds_stack():
    spec = double_integrator(T=1)
    qp = condense(spec)
    res = qp.residuals(np.zeros(2), np.zeros(1))
    np.testing.assert_allclose(res, np.concatenate([spec.U.b, spec.X.b]))


def test_residuals_one_dim_box():
    # Rows (u <= 1, -u <= 1) at u = 0.5 leave slacks (0.5, 1.5).
    pol = box(1.0, 1)
    res = pol.b - pol.A @ np.array([0.5])
    np.testing.assert_allclose(res, [0.5, 1.5])


def test_residual_row_on_state_boundary():
    # From x0 = (10, 0) the first-step position equals 10 for every input, so
    # the upper position row for x_1 sits exactly on the boundary.
    qp = condense(double_integrator())
    res = qp.residuals(np.array([10.0, 0.0]), np.zeros(10))
    # Row layout per step: 2 input rows, then 4 state rows (+pos, +vel, -pos, -vel).
    assert res[2] == pytest.approx(0.0, abs=1e-12)


def test_total_cost_matches_simulation():
    spec = double_integrator()
    qp = condense(spec)
    rng = np.random.default_rng(42)
    for _ in range(100):
        x0 = rng.uniform(-3, 3, 2)
        u = rng.uniform(-1, 1, 10)
        traj = simulate(spec.sys, x0, u)
        direct = sum(x @ Q @ x for x, Q in zip(traj[1:], spec.Q))
        direct += sum(
            float(ut @ R @ ut) for ut, R in zip(u.reshape(10, 1), spec.R)
        )
        value = qp.total_cost(x0, u)
        assert value == pytest.approx(direct, rel=1e-10, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(random_specs())
def test_objective_is_half_curvature_stage_cost(spec_rng):
    # 2 V(x0, u) equals the stage sum started from the doubled state, up to
    # the u-independent term 4 x0' Ahat'Qbar Ahat x0: the controller family
    # weights the curvature at half the rolled-out cost.
    spec, rng = spec_rng
    qp = condense(spec)
    x0 = rng.uniform(-0.5, 0.5, spec.sys.d_x)
    u = rng.uniform(-1, 1, qp.n_u)

    def stage_sum(y, u):
        traj = simulate(spec.sys, y, u)
        total = sum(x @ Q @ x for x, Q in zip(traj[1:], spec.Q))
        total += sum(
            ut @ R @ ut for ut, R in zip(u.reshape(spec.T, spec.sys.d_u), spec.R)
        )
        return total

    lhs = 2.0 * qp.objective(x0, u)
    rhs = stage_sum(2.0 * x0, u) - 4.0 * x0 @ qp.cost_const @ x0
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-10)
    assert qp.total_cost(x0, u) == pytest.approx(stage_sum(x0, u), rel=1e-9, abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(random_specs())
def test_constraint_equivalence(spec_rng):
    spec, rng = spec_rng
    qp = condense(spec)
    x0 = rng.uniform(-0.3, 0.3, spec.sys.d_x) * spec.X.b.min()
    u = rng.uniform(-1.5, 1.5, qp.n_u) * spec.U.b.min()
    res = qp.residuals(x0, u)
    traj = simulate(spec.sys, x0, u)
    stage_ok = all(
        spec.U.contains(ut, tol=1e-12) for ut in u.reshape(spec.T, spec.sys.d_u)
    ) and all(spec.X.contains(x, tol=1e-12) for x in traj[1:])
    margin = res.min()
    if abs(margin) < 1e-9:
        return  # boundary points are ambiguous at float tolerance
    assert (margin > 0) == stage_ok


@settings(max_examples=60, deadline=None)
@given(random_specs())
def test_hessian_positive_definite(spec_rng):
    spec, _ = spec_rng
    qp = condense(spec)
    np.testing.assert_allclose(qp.H, qp.H.T)
    lam_min_R = min(np.linalg.eigvalsh(R).min() for R in spec.R)
    assert np.linalg.eigvalsh(qp.H).min() >= lam_min_R - 1e-12


def test_normalized_rows_unit_norm():
    qp = condense(double_integrator())
    norms = np.linalg.norm(qp.G, axis=1)
    nonzero = norms > 1e-12
    np.testing.assert_allclose(norms[nonzero], 1.0)
    # Position rows for x_1 do not involve u at all.
    assert int((~nonzero).sum()) == 2


# ---------------------------------------------------------------------------
# geometry


def test_geometry_unit_box_1d():
    spec = double_integrator(T=1, state_bound=1e6)
    qp = condense(spec)
    g = geometry(qp, np.zeros(2))
    assert g.r == pytest.approx(1.0, abs=1e-8)
    assert g.R_out == pytest.approx(1.0, abs=1e-6)


def test_geometry_unit_box_2d():
    spec = double_integrator(T=2, state_bound=1e6)
    qp = condense(spec)
    g = geometry(qp, np.zeros(2))
    assert g.r == pytest.approx(1.0, abs=1e-8)
    assert g.R_out == pytest.approx(np.sqrt(2.0), abs=1e-6)


def test_geometry_radius_matches_refinement_search():
    # The Chebyshev LP optimum is re-derived by a derivative-free concave
    # search (shrinking random steps); both must agree to 1e-3.
    qp = condense(double_integrator())
    x0 = np.zeros(2)
    g = geometry(qp, x0)
    rhs = qp.w + qp.P @ x0
    norms = np.linalg.norm(qp.G, axis=1)
    mask = norms > 1e-12

    def margin(u):
        return float(np.min((rhs[mask] - qp.G[mask] @ u) / norms[mask]))

    rng = np.random.default_rng(7)
    best_u = np.zeros(qp.n_u)
    best = margin(best_u)
    scale = 1.0
    for _ in range(60):
        cand = best_u + scale * rng.standard_normal((400, qp.n_u))
        vals = np.array([margin(c) for c in cand])
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_u = float(vals[i]), cand[i]
        else:
            scale *= 0.6
    assert best <= g.r + 1e-9
    assert g.r == pytest.approx(best, abs=1e-3)


def test_geometry_orders_and_bounds():
    qp = condense(double_integrator())
    g = geometry(qp, np.array([1.0, -0.5]))
    assert 0 < g.r <= g.R_out
    assert g.alpha > 0
    assert g.L_V > 0


def test_geometry_infeasible_state_raises():
    qp = condense(double_integrator())
    with pytest.raises(InfeasibleError):
        geometry(qp, np.array([100.0, 0.0]))


def test_chebyshev_center_is_interior():
    qp = condense(double_integrator())
    center, r = chebyshev_center(qp, np.array([2.0, 1.0]))
    assert r > 0
    assert qp.residuals(np.array([2.0, 1.0]), center).min() >= r - 1e-9


# ---------------------------------------------------------------------------
# validation and loading


def test_polytope_rejects_zero_row():
    with pytest.raises(ValueError):
        Polytope(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1.0, 1.0]))


def test_polytope_rejects_empty_set():
    with pytest.raises(InfeasibleError):
        Polytope(np.array([[1.0], [-1.0]]), np.array([-2.0, 1.0]))


def test_polytope_box_bounds():
    pol = box(2.0, 3)
    lo, hi = pol.box_bounds()
    np.testing.assert_allclose(lo, [-2.0, -2.0, -2.0])
    np.testing.assert_allclose(hi, [2.0, 2.0, 2.0])
    general = Polytope(np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]), np.ones(3))
    assert general.box_bounds() is None


def test_mpc_spec_rejects_indefinite_cost():
    sys = LinearSystem(np.eye(2), np.ones((2, 1)))
    with pytest.raises(ValueError):
        MpcSpec(sys=sys, T=2, Q=np.diag([1.0, -1.0]), R=np.eye(1), X=box(1, 2), U=box(1, 1))


def test_load_problem_round_trip(tmp_path):
    data = {
        "A": [[1.0, 1.0], [0.0, 1.0]],
        "B": [[0.0], [1.0]],
        "Q": 1.0,
        "R": 0.01,
        "T": 10,
        "X": {"A": [[1, 0], [0, 1], [-1, 0], [0, -1]], "b": [10, 10, 10, 10]},
        "U": {"A": [[1], [-1]], "b": [1, 1]},
    }
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(data))
    spec = load_problem(path)
    qp = condense(spec)
    ref = condense(double_integrator())
    np.testing.assert_allclose(qp.H, ref.H)
    np.testing.assert_allclose(qp.G, ref.G)
    np.testing.assert_allclose(qp.w, ref.w)


def test_load_problem_missing_key(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"A": [[1.0]], "B": [[1.0]]}))
    with pytest.raises(KeyError):
        load_problem(path)


def test_isinstance_of_dataclasses():
    qp = condense(double_integrator(T=2))
    assert isinstance(qp, CondensedQp)
