"""Exact QP solve and the explicit piecewise-affine structure of linear MPC.

The optimizer of the condensed QP is affine in the state within each critical
region: u*(x0) = K_sigma x0 + k_sigma where sigma is the optimal active set.
This module provides a primal active-set solver with KKT certification, the
per-active-set affine gains, a sampling census of the pieces reachable over a
state grid, and a lookup cache that evaluates the policy by checking cached
KKT systems before falling back to a fresh solve.
"""

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import linprog

from barriermpc.condense import InfeasibleError


class DegenerateActiveSetError(ValueError):
    """The selected rows give a singular reduced KKT system."""


class CyclingGuardError(RuntimeError):
    """Active-set iteration budget exhausted; carries the last iterate."""

    def __init__(self, message, u, working):
        super().__init__(message)
        self.u = u
        self.working = working


def sigma_key(sigma):
    """Bitmask string for an active set, row 0 leftmost."""
    return "".join("1" if s else "0" for s in np.asarray(sigma).astype(bool))


def sigma_from_key(key):
    return np.array([c == "1" for c in key], dtype=bool)


@dataclass(frozen=True, eq=False)
class QpSolution:
    u_star: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    iterations: int

    def kkt_residuals(self, qp, x0):
        """(stationarity, primal violation, complementarity, dual violation)."""
        res = qp.residuals(x0, self.u_star)
        stat = np.linalg.norm(qp.gradient(x0, self.u_star) + qp.G.T @ self.lam, np.inf)
        return (
            float(stat),
            float(max(0.0, -res.min())),
            float(np.abs(self.lam * res).max()) if res.size else 0.0,
            float(max(0.0, -self.lam.min())) if self.lam.size else 0.0,
        )


@dataclass(frozen=True, eq=False)
class AffinePiece:
    """u*(x0) = K x0 + k on the critical region of active set sigma.

    lam_gain and lam_offset give the multipliers on the active rows as
    lam_sigma(x0) = lam_gain x0 + lam_offset, which is what region membership
    tests need.
    """

    sigma: np.ndarray
    K: np.ndarray
    k: np.ndarray
    lam_gain: np.ndarray = field(repr=False)
    lam_offset: np.ndarray = field(repr=False)


def phase_one(qp, x0):
    """Minimize the worst constraint violation t over (u, t).

    Returns (u, t_star, certificate): t_star <= 0 means u is feasible.  When
    t_star > 0 the polytope is empty and the certificate y >= 0 satisfies
    G'y = 0 and 1'y = 1, so any state x with y'(w + Px) < 0 is infeasible too.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    rhs = qp.w + qp.P @ x0
    m, n = qp.G.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([qp.G, -np.ones((m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=rhs, bounds=(None, None), method="highs")
    if not res.success:
        raise RuntimeError(f"phase-one LP failed: {res.message}")
    u, t_star = res.x[:-1], float(res.x[-1])
    certificate = None
    if t_star > 0 and res.ineqlin is not None:
        y = -np.asarray(res.ineqlin.marginals)
        if (
            y.min() >= -1e-9
            and abs(y.sum() - 1.0) <= 1e-7
            and np.linalg.norm(qp.G.T @ y, np.inf) <= 1e-7
        ):
            certificate = np.maximum(y, 0.0)
    return u, t_star, certificate


def solve_qp(qp, x0, tol=1e-10, trace=None):
    """Primal active-set solve of min 0.5 u'Hu - x0'Fu s.t. Gu <= w + Px0.

    Starts from u = 0 when feasible, otherwise from the phase-one optimum.
    Ties in the blocking and dropping choices are broken by lowest row index
    to prevent cycling; a singular working-set system sheds its most recently
    added row.  Raises InfeasibleError when the polytope is empty and
    CyclingGuardError when the iteration budget runs out.  When ``trace`` is
    a list, the objective value of every iterate is appended to it.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    rhs = qp.w + qp.P @ x0
    m, n = qp.G.shape
    q = qp.F.T @ x0

    u = np.zeros(n)
    if (rhs - qp.G @ u).min() < -tol:
        u, t_star, _ = phase_one(qp, x0)
        if t_star > 1e-9:
            raise InfeasibleError(f"no feasible input sequence at this state (t*={t_star:g})")

    Hc = cho_factor(qp.H)
    Hinv_q = cho_solve(Hc, q)
    Hinv_Gt = cho_solve(Hc, qp.G.T)
    S_full = qp.G @ Hinv_Gt
    row_norm = np.linalg.norm(qp.G, axis=1)
    eligible = row_norm > 1e-12  # zero rows constrain x0 only, never u

    def independent(rows, candidate):
        """Whether G[candidate] is numerically independent of G[rows]."""
        if not rows:
            return True
        basis = qp.G[rows]
        coeff, *_ = np.linalg.lstsq(basis.T, qp.G[candidate], rcond=None)
        return np.linalg.norm(qp.G[candidate] - basis.T @ coeff) > 1e-10

    # Seed with a maximal independent subset of the tight rows (lowest index
    # first).  Independence is preserved from then on: a dependent row has a
    # negligible inner product with any step in the working set's null space,
    # so it is never accepted as a blocking row below.
    tight = np.flatnonzero((np.abs(rhs - qp.G @ u) <= tol) & eligible)
    working = []
    for i in tight:
        if independent(working, int(i)):
            working.append(int(i))
    max_iters = 100 + 20 * m

    for iteration in range(1, max_iters + 1):
        if trace is not None:
            trace.append(qp.objective(x0, u))
        W = np.array(working, dtype=int)
        if W.size:
            S = S_full[np.ix_(W, W)]
            b = qp.G[W] @ Hinv_q - rhs[W]
            try:
                lam_W = np.linalg.solve(S, b)
            except np.linalg.LinAlgError:
                working.pop()  # degenerate set: shed the most recent row
                continue
            u_target = Hinv_q - Hinv_Gt[:, W] @ lam_W
        else:
            lam_W = np.zeros(0)
            u_target = Hinv_q

        p = u_target - u
        if np.linalg.norm(p, np.inf) <= 1e-13 * (1.0 + np.linalg.norm(u, np.inf)):
            negative = np.flatnonzero(lam_W < -1e-10)
            if negative.size == 0:
                lam = np.zeros(m)
                if W.size:
                    lam[W] = np.maximum(lam_W, 0.0)
                sigma = np.zeros(m, dtype=bool)
                sigma[W] = True
                return QpSolution(u_star=u, sigma=sigma, lam=lam, iterations=iteration)
            drop = W[negative].min()  # lowest index: Bland's rule
            working.remove(int(drop))
            continue

        # Largest feasible step toward the working-set minimizer.
        Gp = qp.G @ p
        slack = rhs - qp.G @ u
        mask = (Gp > 1e-13) & ~np.isin(np.arange(m), W)
        alpha, add = 1.0, None
        while True:
            blocking = np.flatnonzero(mask)
            if blocking.size == 0:
                break
            steps = slack[blocking] / Gp[blocking]
            best = steps.min()
            if best >= 1.0 - 1e-14:
                break
            cand = int(blocking[steps <= best + 1e-12].min())  # Bland's rule
            if independent(working, cand):
                alpha, add = max(best, 0.0), cand
                break
            mask[cand] = False  # float-noise blocker, cannot truly block
        u = u + alpha * p
        if add is not None:
            working.append(add)

    raise CyclingGuardError(
        f"active-set solve exceeded {max_iters} iterations", u, list(working)
    )


def piece_gains(qp, sigma):
    """Affine gains of the critical region with active rows sigma.

    K = H^-1 [F' - G' Sinv (G H^-1 F' - P)] and k = H^-1 G' Sinv w, where
    Sinv is the inverse of the sigma-principal submatrix of G H^-1 G' padded
    back to full size with zeros.
    """
    sigma = np.asarray(sigma).astype(bool)
    if sigma.shape[0] != qp.m:
        raise ValueError(f"active set has {sigma.shape[0]} entries for {qp.m} rows")
    Hc = cho_factor(qp.H)
    Hinv_Gt = cho_solve(Hc, qp.G.T)
    Hinv_Ft = cho_solve(Hc, qp.F.T)
    act = np.flatnonzero(sigma)
    if act.size == 0:
        n = qp.n_u
        return AffinePiece(
            sigma=sigma,
            K=Hinv_Ft,
            k=np.zeros(n),
            lam_gain=np.zeros((0, qp.d_x)),
            lam_offset=np.zeros(0),
        )
    S = qp.G[act] @ Hinv_Gt[:, act]
    if S.size and (not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e12):
        raise DegenerateActiveSetError("degenerate active set: singular reduced system")
    Sinv = np.linalg.inv(S)
    lam_gain = Sinv @ (qp.G[act] @ Hinv_Ft - qp.P[act])
    lam_offset = -Sinv @ qp.w[act]
    K = Hinv_Ft - Hinv_Gt[:, act] @ lam_gain
    k = Hinv_Gt[:, act] @ Sinv @ qp.w[act]
    return AffinePiece(sigma=sigma, K=K, k=k, lam_gain=lam_gain, lam_offset=lam_offset)


def _claim_piece(qp, piece, states, tol=1e-8):
    """Boolean mask of states whose optimum is piece.K x + piece.k."""
    U = states @ piece.K.T + piece.k
    primal = qp.w + states @ qp.P.T - U @ qp.G.T
    ok = primal.min(axis=1) >= -tol
    act = np.flatnonzero(piece.sigma)
    if act.size:
        lam = states @ piece.lam_gain.T + piece.lam_offset
        ok &= lam.min(axis=1) >= -tol
    return ok


@dataclass
class PieceCensus:
    """Distinct optimal active sets found over a grid of states."""

    counts: dict
    pieces: dict
    infeasible: int
    total: int

    @property
    def n_pieces(self):
        return len(self.counts)


def enumerate_pieces(qp, grid, tol=1e-8):
    """Census of optimal active sets over the given states.

    Each newly discovered piece immediately claims, in one vectorized pass,
    every remaining state whose KKT conditions it satisfies; infeasible
    states are claimed by phase-one dual certificates the same way.  The cost
    is therefore one QP or LP solve per piece, not per state.
    """
    states = np.atleast_2d(np.asarray(grid, dtype=float))
    n_states = states.shape[0]
    unclaimed = np.ones(n_states, dtype=bool)
    counts = {}
    pieces = {}
    infeasible = 0

    while True:
        idx = np.flatnonzero(unclaimed)
        if idx.size == 0:
            break
        x0 = states[idx[0]]
        try:
            sol = solve_qp(qp, x0)
        except InfeasibleError:
            _, _, certificate = phase_one(qp, x0)
            if certificate is None:
                unclaimed[idx[0]] = False
                infeasible += 1
                continue
            margin = qp.w @ certificate + states[idx] @ (qp.P.T @ certificate)
            hit = margin < -1e-12
            if not hit[0]:
                hit[0] = True  # the solved state is infeasible regardless
            infeasible += int(hit.sum())
            unclaimed[idx[hit]] = False
            continue
        try:
            piece = piece_gains(qp, sol.sigma)
        except DegenerateActiveSetError:
            # Boundary state with a degenerate active set: count it under its
            # bitmask but claim only this one sample.
            key = sigma_key(sol.sigma)
            counts[key] = counts.get(key, 0) + 1
            unclaimed[idx[0]] = False
            continue
        hit = _claim_piece(qp, piece, states[idx], tol=tol)
        if not hit[0]:
            hit[0] = True  # numerical edge: at least claim the solved state
        key = sigma_key(sol.sigma)
        counts[key] = counts.get(key, 0) + int(hit.sum())
        pieces.setdefault(key, piece)
        unclaimed[idx[hit]] = False

    return PieceCensus(counts=counts, pieces=pieces, infeasible=infeasible, total=n_states)


class PieceCache:
    """Lookup table of explicit-MPC pieces keyed by active-set bitmask.

    Reads are lock-free; insertion takes a lock so concurrent evaluators
    cannot interleave partial updates.
    """

    def __init__(self, qp):
        self.qp = qp
        self._pieces = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._pieces)

    def insert(self, piece):
        with self._lock:
            self._pieces.setdefault(sigma_key(piece.sigma), piece)

    def snapshot(self):
        return list(self._pieces.values())

    def lookup(self, x0, tol=1e-9):
        """Scan cached pieces for one whose KKT conditions hold at x0."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        for piece in list(self._pieces.values()):
            u = piece.K @ x0 + piece.k
            if self.qp.residuals(x0, u).min() < -tol:
                continue
            act = np.flatnonzero(piece.sigma)
            if act.size and (piece.lam_gain @ x0 + piece.lam_offset).min() < -tol:
                continue
            return u
        return None


def eval_explicit(qp, x0, cache):
    """Evaluate the explicit policy, filling the cache on misses."""
    u = cache.lookup(x0)
    if u is not None:
        cache.hits += 1
        return u
    cache.misses += 1
    sol = solve_qp(qp, x0)
    try:
        cache.insert(piece_gains(qp, sol.sigma))
    except DegenerateActiveSetError:
        pass  # degenerate boundary set: solvable but not cacheable
    return sol.u_star


def eval_explicit_batch(qp, states, cache=None, tol=1e-8):
    """Explicit policy over many states, one QP solve per distinct piece.

    States are claimed in bulk by vectorized region tests against cached and
    freshly solved pieces, so evaluating n states costs roughly one solve per
    active set touched instead of n solves.  States with no feasible input
    are flagged instead of raising.

    Returns (U, infeasible): U[i] is the full input sequence at states[i]
    (zeros on infeasible rows), infeasible[i] marks empty feasible sets.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[0]
    U = np.zeros((n, qp.n_u))
    infeasible = np.zeros(n, dtype=bool)
    claimed = np.zeros(n, dtype=bool)
    if cache is None:
        cache = PieceCache(qp)

    def claim_with(piece):
        idx = np.flatnonzero(~claimed)
        if idx.size == 0:
            return
        hit = _claim_piece(qp, piece, states[idx], tol=tol)
        rows = idx[hit]
        if rows.size:
            U[rows] = states[rows] @ piece.K.T + piece.k
            claimed[rows] = True

    for piece in cache.snapshot():
        if claimed.all():
            break
        claim_with(piece)

    while not claimed.all():
        i = int(np.flatnonzero(~claimed)[0])
        try:
            sol = solve_qp(qp, states[i])
        except InfeasibleError:
            claimed[i] = True
            infeasible[i] = True
            _, _, cert = phase_one(qp, states[i])
            if cert is not None:
                idx = np.flatnonzero(~claimed)
                margin = (qp.w + states[idx] @ qp.P.T) @ cert
                bad = idx[margin < -1e-12]
                claimed[bad] = True
                infeasible[bad] = True
            continue
        U[i] = sol.u_star
        claimed[i] = True
        try:
            piece = piece_gains(qp, sol.sigma)
        except DegenerateActiveSetError:
            continue
        cache.insert(piece)
        claim_with(piece)
    return U, infeasible
