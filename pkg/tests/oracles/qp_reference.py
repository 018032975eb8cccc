"""Independent QP reference solvers used to freeze expected values.

Two deliberately simple first-order methods, kept free of any active-set
machinery so they can serve as oracles for it:

* ``box_pgd``: primal projected gradient with exact clipping, valid when the
  feasible set is an axis-aligned box in u.
* ``dual_ascent``: accelerated projected gradient on the dual of the general
  inequality-constrained QP; primal iterate recovered from the dual.

Run as a script to print the frozen reference values used in the tests:

    python3 tests/oracles/qp_reference.py
"""

import numpy as np


def box_pgd(H, q, lo, hi, iters=200_000):
    """Minimize 0.5 u'Hu - q'u over the box [lo, hi] by projected gradient."""
    L = np.linalg.norm(H, 2)
    u = np.clip(np.zeros_like(q), lo, hi)
    for _ in range(iters):
        u = np.clip(u - (H @ u - q) / L, lo, hi)
    return u


def dual_ascent(H, q, G, rhs, iters=1_000_000):
    """Maximize the dual of min 0.5 u'Hu - q'u s.t. Gu <= rhs.

    Accelerated projected gradient (FISTA) on lambda >= 0; returns the primal
    u(lambda) = H^-1 (q - G' lambda) at the final iterate.
    """
    Hinv_q = np.linalg.solve(H, q)
    Hinv_Gt = np.linalg.solve(H, G.T)
    S = G @ Hinv_Gt
    step = 1.0 / max(np.linalg.eigvalsh(S).max(), 1e-12)
    lam = np.zeros(G.shape[0])
    prev = lam.copy()
    t_prev = 1.0
    for _ in range(iters):
        t = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_prev**2))
        y = lam + ((t_prev - 1.0) / t) * (lam - prev)
        y = np.maximum(y, 0.0)
        u = Hinv_q - Hinv_Gt @ y
        grad = G @ u - rhs
        prev = lam
        lam = np.maximum(y + step * grad, 0.0)
        t_prev = t
    u = Hinv_q - Hinv_Gt @ lam
    return u, lam


def main():
    from barriermpc.condense import condense, double_integrator

    np.set_printoptions(precision=17, linewidth=200)
    qp = condense(double_integrator())

    for x0 in (np.array([-6.0, 2.0]), np.array([3.0, -1.5])):
        rhs = qp.w + qp.P @ x0
        u, lam = dual_ascent(qp.H, qp.F.T @ x0, qp.G, rhs, iters=1_000_000)
        value = 0.5 * u @ qp.H @ u - x0 @ qp.F @ u
        worst = float((qp.G @ u - rhs).max())
        print(f"x0 = {x0}")
        print(f"  u_star = {u!r}")
        print(f"  value  = {value:.17g}")
        print(f"  max constraint violation = {worst:.3g}")
        print(f"  active rows (slack < 1e-6): {np.flatnonzero(rhs - qp.G @ u < 1e-6)}")


if __name__ == "__main__":
    main()
