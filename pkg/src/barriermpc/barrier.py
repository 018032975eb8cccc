"""Recentered log-barrier MPC: smoothed solve, analytic policy Jacobians,
and the quantitative bounds that govern them.

Replacing the hard constraints of the condensed QP with a weighted log
barrier gives the smooth objective

    V_eta(x0, u) = 0.5 u'Hu - x0'Fu - eta [sum_i log phi_i(x0, u) - d'u],

where phi = w + P x0 - G u are the constraint residuals and the recentering
vector d = -sum_i g_i / w_i shifts the analytic center so that the smoothed
policy, like the exact one, maps the origin to zero input.  The minimizer
u_eta(x0) is strictly interior, unique, and differentiable in x0; its
Jacobian has a closed form and is a convex combination of the exact policy's
piecewise-affine gains, with weights that concentrate on the active piece as
eta shrinks.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from barriermpc.condense import InfeasibleError, chebyshev_center, geometry
from barriermpc.explicit import piece_gains
from barriermpc.linalg_kernels import CombinatorialLimitError, SUBSET_LIMIT, subsets


class OutsideDomainError(ValueError):
    """Barrier evaluated at a point with a nonpositive constraint residual."""


@dataclass(frozen=True)
class BarrierConfig:
    """Solver knobs for the smoothed problem."""

    eta: float
    newton_tol: float = 1e-10
    max_newton_iters: int = 200
    feasibility_margin: float = 1e-9

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 < self.newton_tol <= 0.25:
            raise ValueError("newton_tol must lie in (0, 1/4]")


@dataclass(frozen=True, eq=False)
class BarrierSolution:
    u_eta: np.ndarray
    phi: np.ndarray
    jacobian: np.ndarray
    newton_iters: int
    decrement: float
    converged: bool = True


@dataclass(frozen=True)
class BoundsReport:
    """Certified constants of the smoothed policy at one (x0, eta)."""

    nu: float
    res_lb: float
    subopt_ub: float
    L: float
    hess_ub: float
    C: float = field(default=0.0)


def recentering_vector(qp):
    """d = -sum_i g_i / w_i, the barrier gradient at the origin, negated.

    Adding d'u to the barrier makes u = 0 the minimizer of the smoothed
    objective at x0 = 0 for every eta.  Requires w > 0 entrywise (the origin
    must be strictly inside every constraint).
    """
    if np.any(qp.w <= 0):
        raise OutsideDomainError("recentering needs w > 0 (origin strictly feasible)")
    return -(qp.G / qp.w[:, None]).sum(axis=0)


def barrier_objective(qp, eta, x0, u, d=None):
    """Value, gradient, and Hessian of the smoothed objective at (x0, u)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if d is None:
        d = recentering_vector(qp)
    phi = qp.residuals(x0, u)
    if phi.min() <= 0:
        raise OutsideDomainError(f"outside domain: min residual {phi.min():g}")
    value = 0.5 * u @ qp.H @ u - x0 @ qp.F @ u - eta * (np.log(phi).sum() - d @ u)
    grad = qp.H @ u - qp.F.T @ x0 + eta * ((qp.G / phi[:, None]).sum(axis=0) + d)
    GPhi = qp.G / phi[:, None]
    hess = qp.H + eta * GPhi.T @ GPhi
    return value, grad, hess


def _interior_start(qp, x0, margin):
    u = np.zeros(qp.n_u)
    phi = qp.residuals(x0, u)
    if phi.min() >= margin:
        return u
    center, r = chebyshev_center(qp, x0)
    # A positive ball radius is not enough: rows of G that are zero (state
    # constraints the input cannot influence) never enter the radius, yet a
    # zero residual on one of them empties the barrier domain.
    if r <= margin or qp.residuals(x0, center).min() <= 0:
        raise InfeasibleError(f"no strict interior at this state (radius {r:g})")
    return center


def solve_barrier(qp, cfg, x0, warm_start=None):
    """Damped-Newton minimization of the smoothed objective.

    Full steps once the Newton decrement drops to 1/4, damped 1/(1+lambda)
    steps before that, plus halving backtracks whenever a step would leave
    the domain or increase the objective.  Terminates at decrement <=
    cfg.newton_tol; if the iteration budget runs out the best iterate is
    returned with converged=False.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    d = recentering_vector(qp)
    u = None
    if warm_start is not None:
        w = np.asarray(warm_start, dtype=float).reshape(-1)
        if qp.residuals(x0, w).min() >= cfg.feasibility_margin:
            u = w
    if u is None:
        u = _interior_start(qp, x0, cfg.feasibility_margin)

    value, grad, hess = barrier_objective(qp, cfg.eta, x0, u, d=d)
    decrement = math.inf
    iters = 0
    converged = False
    for iters in range(1, cfg.max_newton_iters + 1):
        try:
            Hc = cho_factor(hess)
            step = -cho_solve(Hc, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.solve(hess, grad)
        decrement = math.sqrt(max(-grad @ step, 0.0))
        if decrement <= cfg.newton_tol:
            converged = True
            break
        t = 1.0 if decrement <= 0.25 else 1.0 / (1.0 + decrement)
        for _ in range(80):
            candidate = u + t * step
            phi_c = qp.residuals(x0, candidate)
            if phi_c.min() > 0:
                value_c, grad_c, hess_c = barrier_objective(qp, cfg.eta, x0, candidate, d=d)
                if value_c <= value + 1e-14 * (1.0 + abs(value)):
                    u, value, grad, hess = candidate, value_c, grad_c, hess_c
                    break
            t *= 0.5
        else:
            break  # no acceptable step length: stop at the current iterate

    phi = qp.residuals(x0, u)
    jac = policy_jacobian(qp, cfg.eta, x0, u)
    return BarrierSolution(
        u_eta=u,
        phi=phi,
        jacobian=jac,
        newton_iters=iters,
        decrement=float(decrement),
        converged=converged,
    )


def policy(qp, cfg, x0, warm_start=None):
    """First input block of the smoothed minimizer."""
    sol = solve_barrier(qp, cfg, x0, warm_start=warm_start)
    return sol.u_eta[: qp.d_u]


def policy_jacobian(qp, eta, x0, u_eta):
    """d u_eta / d x0 by implicit differentiation of the stationarity system.

    Equals (H + eta G'Phi^-2 G)^-1 (F' + eta G'Phi^-2 P) at the minimizer.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u_eta = np.asarray(u_eta, dtype=float).reshape(-1)
    phi = qp.residuals(x0, u_eta)
    if phi.min() <= 0:
        raise OutsideDomainError("Jacobian requires a strictly interior point")
    GPhi = qp.G / phi[:, None]
    hess = qp.H + eta * GPhi.T @ GPhi
    rhs = qp.F.T + eta * GPhi.T @ (qp.P / phi[:, None])
    try:
        return cho_solve(cho_factor(hess), rhs)
    except np.linalg.LinAlgError:
        return np.linalg.solve(hess, rhs)


def policy_jacobian_woodbury(qp, eta, x0, u_eta):
    """Same Jacobian through the low-rank-update form.

    H^-1 [F' - G'(G H^-1 G' + Lambda)^-1 (G H^-1 F' - P)] with the diagonal
    Lambda = eta^-1 Phi^2.  Agrees with policy_jacobian to solver precision;
    its (G H^-1 G' + Lambda)^-1 factor is the object the subset expansion of
    convex_combination_jacobian decomposes.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u_eta = np.asarray(u_eta, dtype=float).reshape(-1)
    phi = qp.residuals(x0, u_eta)
    if phi.min() <= 0:
        raise OutsideDomainError("Jacobian requires a strictly interior point")
    Hc = cho_factor(qp.H)
    Hinv_Gt = cho_solve(Hc, qp.G.T)
    Hinv_Ft = cho_solve(Hc, qp.F.T)
    M = qp.G @ Hinv_Gt + np.diag(phi**2 / eta)
    inner = np.linalg.solve(M, qp.G @ Hinv_Ft - qp.P)
    return Hinv_Ft - Hinv_Gt @ inner


def subset_gain_table(qp):
    """Per-active-set data reused by the subset-expansion Jacobian.

    Returns a list of (sigma, logdet, K) for every sigma whose reduced
    system G_sigma H^-1 G_sigma' has a positive, well-separated determinant;
    the gains K are state independent so the table is computed once per QP.
    """
    if qp.m > SUBSET_LIMIT:
        raise CombinatorialLimitError(
            f"subset expansion needs 2^{qp.m} terms; limit is m <= {SUBSET_LIMIT}"
        )
    Hc = cho_factor(qp.H)
    A = qp.G @ cho_solve(Hc, qp.G.T)
    table = []
    for sigma in subsets(qp.m):
        act = np.flatnonzero(sigma)
        if act.size == 0:
            table.append((sigma, 0.0, piece_gains(qp, sigma).K))
            continue
        sub = A[np.ix_(act, act)]
        sign, logdet = np.linalg.slogdet(sub)
        row_norms = np.linalg.norm(sub, axis=1)
        scale = np.log(row_norms).sum() if row_norms.min() > 0 else -np.inf
        if sign <= 0 or logdet < np.log(1e-12) + scale:
            continue  # singular reduced system: contributes nothing
        K = _gain_for(qp, Hc, act)
        table.append((sigma, float(logdet), K))
    return table


def _gain_for(qp, Hc, act):
    Hinv_Gt = cho_solve(Hc, qp.G.T[:, act])
    Hinv_Ft = cho_solve(Hc, qp.F.T)
    S = qp.G[act] @ Hinv_Gt
    inner = np.linalg.solve(S, qp.G[act] @ Hinv_Ft - qp.P[act])
    return Hinv_Ft - Hinv_Gt @ inner


def convex_combination_jacobian(qp, eta, x0, u_eta, table=None):
    """The policy Jacobian as a weighted average of exact-policy gains.

    Expands det(G H^-1 G' + Lambda) over principal minors: each active set
    sigma with an invertible reduced system receives weight

        h_sigma / h,  h_sigma = det([G H^-1 G']_sigma) prod_{i not in sigma}
                                 (phi_i^2 / eta),

    and the weighted sum of its gains K_sigma reproduces policy_jacobian
    exactly.  Weights are computed in log space and normalized with
    log-sum-exp so they form a convex combination at any eta.

    Returns (jacobian, weights) with weights keyed by the sigma bitmask.
    """
    from barriermpc.explicit import sigma_key

    x0 = np.asarray(x0, dtype=float).reshape(-1)
    u_eta = np.asarray(u_eta, dtype=float).reshape(-1)
    phi = qp.residuals(x0, u_eta)
    if phi.min() <= 0:
        raise OutsideDomainError("subset expansion requires a strictly interior point")
    if table is None:
        table = subset_gain_table(qp)
    log_lam = 2.0 * np.log(phi) - np.log(eta)
    log_h = np.array([logdet + log_lam[~sigma].sum() for sigma, logdet, _ in table])
    log_total = log_h.max() + np.log(np.exp(log_h - log_h.max()).sum())
    weights = np.exp(log_h - log_total)
    jac = np.zeros((qp.n_u, qp.d_x))
    for (sigma, _, K), weight in zip(table, weights):
        jac += weight * K
    weight_map = {sigma_key(sigma): float(wt) for (sigma, _, _), wt in zip(table, weights)}
    return jac, weight_map


def jacobian_norm_bound(qp, sigmas):
    """Largest spectral norm of the exact-policy gains over the given sets."""
    sigmas = list(sigmas)
    if not sigmas:
        raise ValueError("need at least one active set")
    L = 0.0
    for sigma in sigmas:
        K = piece_gains(qp, sigma).K
        L = max(L, float(np.linalg.norm(K, 2)))
    return L


def self_concordance_parameter(qp, geom):
    """nu = 20 (m + R_out^2 norm(d)^2) for the recentered barrier."""
    d = recentering_vector(qp)
    return 20.0 * (qp.m + geom.R_out**2 * float(d @ d))


def residual_lower_bound(qp, eta, geom):
    """Certified floor on the smallest residual at the smoothed minimizer.

    min{eta/2, r eta^2 / (150 (nu eta^2 + R^2 (L_V^2 + 1)))} in the geometry
    of the feasible polytope at the given state.
    """
    nu = self_concordance_parameter(qp, geom)
    second = geom.r * eta**2 / (150.0 * (nu * eta**2 + geom.R_out**2 * (geom.L_V**2 + 1.0)))
    return min(eta / 2.0, second)


def suboptimality_report(qp, eta, x0, cfg=None):
    """Distance between the smoothed and exact minimizers, with its bound.

    Returns (gap_actual, gap_bound) where gap_bound = sqrt(2 eta nu / alpha)
    comes from strong convexity: 0.5 alpha gap^2 <= eta nu.
    """
    from barriermpc.explicit import solve_qp

    if cfg is None:
        cfg = BarrierConfig(eta=eta)
    sol = solve_barrier(qp, cfg, x0)
    exact = solve_qp(qp, x0)
    geom = geometry(qp, x0)
    nu = self_concordance_parameter(qp, geom)
    gap = float(np.linalg.norm(sol.u_eta - exact.u_star))
    bound = math.sqrt(2.0 * eta * nu / geom.alpha)
    return gap, bound


def sampled_c_constant(qp, sigmas):
    """C = max over sets of norm(2 H^-1 G'(G H^-1 G')_sigma^-1)."""
    Hc = cho_factor(qp.H)
    C = 0.0
    for sigma in sigmas:
        act = np.flatnonzero(np.asarray(sigma).astype(bool))
        if act.size == 0:
            continue
        Hinv_Gt = cho_solve(Hc, qp.G.T[:, act])
        S = qp.G[act] @ Hinv_Gt
        if np.linalg.cond(S) > 1e12:
            continue
        C = max(C, 2.0 * float(np.linalg.norm(Hinv_Gt @ np.linalg.inv(S), 2)))
    return C


def hessian_norm_report(qp, eta, x0, sigmas, cfg=None, n_directions=32, h=1e-5, rng=None):
    """Estimated second derivative of the smoothed policy and its bound.

    hess_actual is the largest spectral norm of a central finite difference
    of the analytic Jacobian over random unit directions in the state; the
    bound is C / res_lb * (norm(P) + norm(G) L)^2 with sampled C.
    """
    if cfg is None:
        cfg = BarrierConfig(eta=eta)
    if rng is None:
        rng = np.random.default_rng(0)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    hess_actual = 0.0
    for _ in range(n_directions):
        y = rng.standard_normal(x0.shape[0])
        y /= np.linalg.norm(y)
        jp = solve_barrier(qp, cfg, x0 + h * y).jacobian
        jm = solve_barrier(qp, cfg, x0 - h * y).jacobian
        hess_actual = max(hess_actual, float(np.linalg.norm((jp - jm) / (2.0 * h), 2)))

    geom = geometry(qp, x0)
    res_lb = residual_lower_bound(qp, eta, geom)
    L = jacobian_norm_bound(qp, sigmas)
    C = sampled_c_constant(qp, sigmas)
    norm_P = float(np.linalg.norm(qp.P, 2))
    norm_G = float(np.linalg.norm(qp.G, 2))
    hess_bound = C / res_lb * (norm_P + norm_G * L) ** 2
    return hess_actual, hess_bound


def bounds_report(qp, eta, x0, sigmas):
    """Assemble every certified constant of the smoothed policy at (x0, eta).

    sigmas supplies the active sets over which the gain hull and the C
    constant are taken, typically from a piece census of the state region of
    interest.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    geom = geometry(qp, x0)
    nu = self_concordance_parameter(qp, geom)
    res_lb = residual_lower_bound(qp, eta, geom)
    subopt_ub = math.sqrt(2.0 * eta * nu / geom.alpha)
    L = jacobian_norm_bound(qp, sigmas)
    C = sampled_c_constant(qp, sigmas)
    norm_P = float(np.linalg.norm(qp.P, 2))
    norm_G = float(np.linalg.norm(qp.G, 2))
    hess_ub = C / res_lb * (norm_P + norm_G * L) ** 2
    return BoundsReport(
        nu=nu, res_lb=res_lb, subopt_ub=subopt_ub, L=L, hess_ub=hess_ub, C=C
    )


def barrier_hessian_floor(qp, x0, points):
    """Smallest eigenvalue of G'Phi^-2 G over the points, with its floor.

    Self-concordant barriers on sets inside a ball of radius R have Hessians
    bounded below by 1/(9 R^2); returns (min eigenvalue seen, floor).
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    geom = geometry(qp, x0)
    floor = 1.0 / (9.0 * geom.R_out**2)
    worst = math.inf
    for u in np.atleast_2d(points):
        phi = qp.residuals(x0, u)
        if phi.min() <= 0:
            raise OutsideDomainError("barrier Hessian needs strictly interior points")
        GPhi = qp.G / phi[:, None]
        worst = min(worst, float(np.linalg.eigvalsh(GPhi.T @ GPhi).min()))
    return worst, floor


def inner_product_check(qp, x0, n_samples=500, rng=None):
    """max of grad(barrier)(u)'(v - u) over sampled interior pairs, with nu.

    The recentered barrier's gradient satisfies grad(u)'(v - u) <= nu for any
    two points of the domain; returns (max seen, nu).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    d = recentering_vector(qp)
    geom = geometry(qp, x0)
    nu = self_concordance_parameter(qp, geom)
    center, radius = chebyshev_center(qp, x0)
    worst = -math.inf
    for _ in range(n_samples):
        u = sample_interior(qp, x0, center, radius, rng)
        v = sample_interior(qp, x0, center, radius, rng, edge_bias=0.999)
        phi = qp.residuals(x0, u)
        grad = (qp.G / phi[:, None]).sum(axis=0) + d
        worst = max(worst, float(grad @ (v - u)))
    return worst, nu


def sample_interior(qp, x0, center, radius, rng, edge_bias=None):
    """Random strictly interior point: a scaled ray from the Chebyshev center.

    Draws a direction, finds the exact distance to the boundary along it, and
    steps a uniform (or near-1 when edge_bias is set) fraction of that
    distance.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    rhs = qp.w + qp.P @ x0
    direction = rng.standard_normal(qp.n_u)
    direction /= np.linalg.norm(direction)
    Gd = qp.G @ direction
    slack = rhs - qp.G @ center
    with np.errstate(divide="ignore"):
        steps = np.where(Gd > 1e-14, slack / np.where(Gd > 1e-14, Gd, 1.0), np.inf)
    t_max = min(steps.min(), 1e8)
    frac = edge_bias if edge_bias is not None else rng.uniform(0.0, 0.95)
    return center + frac * t_max * direction
