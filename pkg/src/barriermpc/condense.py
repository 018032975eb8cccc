"""Condense a finite-horizon MPC problem into a dense multiparametric QP.

The horizon-T problem with dynamics x_{t+1} = A x_t + B u_t, stage costs
x_t' Q_t x_t + u_t' R_t u_t, and polytopic state and input sets becomes

    minimize  V(x0, u) = 0.5 u' H u - x0' F u
    subject to  G u <= w + P x0

over the stacked input sequence u = (u_0, ..., u_{T-1}), with

    H = Rbar + Bhat' Qbar Bhat,    F = -2 Ahat' Qbar Bhat.

This controller family halves the curvature of the rolled-out stage cost, so
V relates to it through a doubled state: 2 V(x0, u) equals the stage sum
started from 2 x0 minus 4 x0' Ahat'Qbar Ahat x0.  CondensedQp.total_cost
evaluates the exact stage sum for diagnostics.  Constraint rows are stacked
per step t as (input rows for u_t, state rows for x_{t+1}) and scaled to unit
Euclidean norm whenever the row actually involves u; rows with a zero
u-coefficient restrict x0 alone and keep their natural scale.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog


class InfeasibleError(RuntimeError):
    """The constraint polytope is empty (or has empty interior) at this state."""


def _as_matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _check_pd(M, name, floor=1e-12):
    M = _as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh(M)
    if w.min() <= floor:
        raise ValueError(f"{name} must be positive definite (min eigenvalue {w.min():g})")
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Discrete-time linear dynamics x_{t+1} = A x_t + B u_t."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows but A is {A.shape[0]}x{A.shape[1]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def d_x(self):
        return self.A.shape[0]

    @property
    def d_u(self):
        return self.B.shape[1]

    def step(self, x, u):
        return self.A @ x + self.B @ u


@dataclass(frozen=True, eq=False)
class Polytope:
    """Set {z : A z <= b} with unit-norm rows, certified nonempty on build."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A_ineq")
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise ValueError(f"b has {b.shape[0]} entries for {A.shape[0]} rows")
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("polytope rows must be nonzero")
        A = A / norms[:, None]
        b = b / norms
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        res = linprog(
            np.zeros(A.shape[1]), A_ub=A, b_ub=b, bounds=(None, None), method="highs"
        )
        if not res.success:
            raise InfeasibleError("polytope is empty")

    @property
    def dim(self):
        return self.A.shape[1]

    @property
    def n_rows(self):
        return self.A.shape[0]

    def contains(self, z, tol=1e-9):
        return bool(np.all(self.A @ np.asarray(z, dtype=float) <= self.b + tol))

    def box_bounds(self):
        """(lo, hi) arrays when every row touches one coordinate, else None.

        Detecting the axis-aligned case lets callers project by clipping
        instead of solving a QP.
        """
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for row, rhs in zip(self.A, self.b):
            nz = np.flatnonzero(np.abs(row) > 1e-12)
            if nz.size != 1:
                return None
            j = nz[0]
            if row[j] > 0:
                hi[j] = min(hi[j], rhs / row[j])
            else:
                lo[j] = max(lo[j], rhs / row[j])
        if np.any(lo > hi):
            return None
        return lo, hi


def box(bound, dim):
    """Axis-aligned box {z : |z_i| <= bound} as a Polytope."""
    eye = np.eye(dim)
    return Polytope(np.vstack([eye, -eye]), np.full(2 * dim, float(bound)))


def _cost_list(M, T, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 3:
        if M.shape[0] != T:
            raise ValueError(f"{name} has {M.shape[0]} matrices for horizon {T}")
        return [_check_pd(M[t], f"{name}[{t}]") for t in range(T)]
    return [_check_pd(M, name)] * T


@dataclass(frozen=True, eq=False)
class MpcSpec:
    """Finite-horizon MPC problem data.

    Q and R may be single matrices (broadcast over the horizon) or length-T
    lists; Q_t weights x_{t+1} and R_t weights u_t.
    """

    sys: LinearSystem
    T: int
    Q: list = field(repr=False)
    R: list = field(repr=False)
    X: Polytope
    U: Polytope

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("horizon T must be at least 1")
        object.__setattr__(self, "Q", _cost_list(np.asarray(self.Q), self.T, "Q"))
        object.__setattr__(self, "R", _cost_list(np.asarray(self.R), self.T, "R"))
        if self.Q[0].shape[0] != self.sys.d_x:
            raise ValueError("Q dimension does not match the state dimension")
        if self.R[0].shape[0] != self.sys.d_u:
            raise ValueError("R dimension does not match the input dimension")
        if self.X.dim != self.sys.d_x:
            raise ValueError("state polytope dimension mismatch")
        if self.U.dim != self.sys.d_u:
            raise ValueError("input polytope dimension mismatch")


def build_prediction_matrices(sys, T):
    """Stack the T-step reachability maps: x_{1:T} = Ahat x0 + Bhat u.

    Ahat stacks A^1 .. A^T; block (i, j) of Bhat is A^(i-1-j) B for j < i.
    """
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    n, m = sys.d_x, sys.d_u
    powers = [np.eye(n)]
    for _ in range(T):
        powers.append(sys.A @ powers[-1])
    Ahat = np.vstack(powers[1:])
    Bhat = np.zeros((T * n, T * m))
    for i in range(1, T + 1):
        for j in range(i):
            Bhat[(i - 1) * n : i * n, j * m : (j + 1) * m] = powers[i - 1 - j] @ sys.B
    return Ahat, Bhat


def simulate(sys, x0, u_seq):
    """Roll the dynamics forward; returns the T+1 states x_0 .. x_T."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u_seq = np.asarray(u_seq, dtype=float).reshape(-1, sys.d_u)
    traj = [x0]
    for u in u_seq:
        traj.append(sys.step(traj[-1], u))
    return np.array(traj)


@dataclass(frozen=True, eq=False)
class CondensedQp:
    """Dense mpQP data: minimize 0.5 u'Hu - x0'Fu subject to Gu <= w + P x0."""

    H: np.ndarray
    F: np.ndarray
    G: np.ndarray
    P: np.ndarray
    w: np.ndarray
    Ahat: np.ndarray
    Bhat: np.ndarray
    T: int
    d_x: int
    d_u: int
    cost_const: np.ndarray = field(repr=False)

    @property
    def n_u(self):
        return self.T * self.d_u

    @property
    def m(self):
        return self.G.shape[0]

    def residuals(self, x0, u):
        """Constraint slacks w + P x0 - G u (negative entries flag violation)."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        return self.w + self.P @ x0 - self.G @ u

    def objective(self, x0, u):
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        return 0.5 * u @ self.H @ u - x0 @ self.F @ u

    def gradient(self, x0, u):
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        return self.H @ u - self.F.T @ x0

    def total_cost(self, x0, u):
        """Summed stage cost u'Hu - x0'Fu + x0' cost_const x0."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        return u @ self.H @ u - x0 @ self.F @ u + x0 @ self.cost_const @ x0


def residuals(qp, x0, u):
    return qp.residuals(x0, u)


def condense(spec):
    """Build the condensed QP for an MpcSpec.

    The quadratic term is H = Rbar + Bhat' Qbar Bhat and the linear coupling
    is F = -2 Ahat' Qbar Bhat; see the module docstring for how the objective
    0.5 u'Hu - x0'Fu relates to the rolled-out stage cost.
    """
    sys, T = spec.sys, spec.T
    n, m_u = sys.d_x, sys.d_u
    Ahat, Bhat = build_prediction_matrices(sys, T)
    Qbar = np.zeros((T * n, T * n))
    Rbar = np.zeros((T * m_u, T * m_u))
    for t in range(T):
        Qbar[t * n : (t + 1) * n, t * n : (t + 1) * n] = spec.Q[t]
        Rbar[t * m_u : (t + 1) * m_u, t * m_u : (t + 1) * m_u] = spec.R[t]

    H = Rbar + Bhat.T @ Qbar @ Bhat
    H = 0.5 * (H + H.T)
    F = -2.0 * Ahat.T @ Qbar @ Bhat
    cost_const = Ahat.T @ Qbar @ Ahat

    A_u, b_u = spec.U.A, spec.U.b
    A_x, b_x = spec.X.A, spec.X.b
    k_u, k_x = A_u.shape[0], A_x.shape[0]
    m = T * (k_u + k_x)
    N = T * m_u
    G = np.zeros((m, N))
    P = np.zeros((m, n))
    w = np.zeros(m)

    powers = [np.eye(n)]
    for _ in range(T):
        powers.append(sys.A @ powers[-1])

    row = 0
    for t in range(T):
        G[row : row + k_u, t * m_u : (t + 1) * m_u] = A_u
        w[row : row + k_u] = b_u
        row += k_u
        # x_{t+1} = A^{t+1} x0 + (block row t+1 of Bhat) u
        G[row : row + k_x, :] = A_x @ Bhat[t * n : (t + 1) * n, :]
        P[row : row + k_x, :] = -A_x @ powers[t + 1]
        w[row : row + k_x] = b_x
        row += k_x

    # Unit-normalize every row that involves u; rows with zero u-coefficient
    # constrain x0 only and are left at their natural scale.
    norms = np.linalg.norm(G, axis=1)
    scale = np.where(norms > 1e-12, norms, 1.0)
    G = G / scale[:, None]
    P = P / scale[:, None]
    w = w / scale

    return CondensedQp(
        H=H, F=F, G=G, P=P, w=w, Ahat=Ahat, Bhat=Bhat,
        T=T, d_x=n, d_u=m_u, cost_const=cost_const,
    )


def _solve_lp(c, A_ub, b_ub):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=(None, None), method="highs")
    return res


def chebyshev_center(qp, x0):
    """Largest inscribed ball of {u : Gu <= w + P x0}.

    Returns (center, radius) where radius is the optimum of the inflation LP;
    a nonpositive radius means the polytope has empty interior.  Rows that do
    not involve u cannot be inflated, so they enter as pure feasibility checks.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    rhs = qp.w + qp.P @ x0
    norms = np.linalg.norm(qp.G, axis=1)
    zero_rows = norms <= 1e-12
    if np.any(rhs[zero_rows] < -1e-12):
        raise InfeasibleError("state-only constraint rows are violated at this x0")
    A_ub = np.hstack([qp.G, norms[:, None]])
    c = np.zeros(qp.n_u + 1)
    c[-1] = -1.0
    res = _solve_lp(c, A_ub, rhs)
    if not res.success:
        raise InfeasibleError("constraint polytope is empty at this x0")
    return res.x[:-1], float(-res.fun)


@dataclass(frozen=True)
class QpGeometry:
    """Ball radii, objective Lipschitz bound, and strong convexity of a QP."""

    r: float
    R_out: float
    L_V: float
    alpha: float
    center: np.ndarray = field(repr=False)


def geometry(qp, x0):
    """Per-state geometry of the feasible polytope {u : Gu <= w + P x0}.

    r is the Chebyshev radius, R_out an interval-enclosure upper bound on the
    largest feasible norm (coordinate-wise min/max LPs, then the box corner),
    L_V the analytic bound norm(H) * R_out + norm(F' x0) on the objective
    gradient over the feasible set, and alpha the smallest eigenvalue of H.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    center, r = chebyshev_center(qp, x0)
    if r <= 0:
        raise InfeasibleError(f"feasible set has empty interior at this x0 (r={r:g})")
    rhs = qp.w + qp.P @ x0
    lo = np.empty(qp.n_u)
    hi = np.empty(qp.n_u)
    for i in range(qp.n_u):
        c = np.zeros(qp.n_u)
        c[i] = 1.0
        res_min = _solve_lp(c, qp.G, rhs)
        res_max = _solve_lp(-c, qp.G, rhs)
        if not (res_min.success and res_max.success):
            raise ValueError("feasible set is unbounded; outer radius undefined")
        lo[i], hi[i] = res_min.fun, -res_max.fun
    R_out = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
    alpha = float(np.linalg.eigvalsh(qp.H).min())
    L_V = float(np.linalg.norm(qp.H, 2) * R_out + np.linalg.norm(qp.F.T @ x0))
    return QpGeometry(r=float(r), R_out=R_out, L_V=L_V, alpha=alpha, center=center)


def load_problem(path):
    """Read an MpcSpec from a JSON problem file.

    Expected keys: A, B, Q, R, T, X = {A, b}, U = {A, b}.  Q and R accept a
    scalar (multiple of the identity), a vector (diagonal), a full matrix, or
    a length-T list of matrices.
    """
    with open(path) as fh:
        data = json.load(fh)
    for key in ("A", "B", "Q", "R", "T", "X", "U"):
        if key not in data:
            raise KeyError(f"problem file is missing required key {key!r}")
    sys = LinearSystem(np.asarray(data["A"], dtype=float), np.asarray(data["B"], dtype=float))
    T = int(data["T"])

    def expand(value, d, name):
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            return float(arr) * np.eye(d)
        if arr.ndim == 1:
            if arr.shape[0] != d:
                raise ValueError(f"{name} diagonal has length {arr.shape[0]}, expected {d}")
            return np.diag(arr)
        return arr

    Q = data["Q"]
    R = data["R"]
    Q = (
        np.asarray([expand(q, sys.d_x, "Q") for q in Q])
        if isinstance(Q, list) and np.asarray(Q).ndim == 3
        else expand(Q, sys.d_x, "Q")
    )
    R = (
        np.asarray([expand(r, sys.d_u, "R") for r in R])
        if isinstance(R, list) and np.asarray(R).ndim == 3
        else expand(R, sys.d_u, "R")
    )
    X = Polytope(np.asarray(data["X"]["A"], dtype=float), np.asarray(data["X"]["b"], dtype=float))
    U = Polytope(np.asarray(data["U"]["A"], dtype=float), np.asarray(data["U"]["b"], dtype=float))
    return MpcSpec(sys=sys, T=T, Q=Q, R=R, X=X, U=U)


def double_integrator(T=10, state_bound=10.0, input_bound=1.0, q=1.0, r=0.01):
    """Constrained double integrator benchmark used throughout the test suite."""
    sys = LinearSystem(np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[0.0], [1.0]]))
    return MpcSpec(
        sys=sys,
        T=T,
        Q=q * np.eye(2),
        R=r * np.eye(1),
        X=box(state_bound, 2),
        U=box(input_bound, 1),
    )
