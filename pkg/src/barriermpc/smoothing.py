"""Randomized-smoothing baseline: the exact policy averaged over state noise.

pi_rs(x) = E_w[pi_mpc(x + eps w)] smooths the piecewise-affine explicit
policy by Monte Carlo averaging instead of by reshaping the optimization.
The price is feasibility: perturbed states can leave the domain where any
input sequence satisfies the constraints, and the exact policy is undefined
there.  Such draws are projected back onto the feasible domain through a
small QP and counted, so every mean carries the fraction of samples that
needed projection.  Finite-difference Jacobians reuse one noise matrix for
every shifted evaluation (common random numbers), which makes the estimator
exact on a single affine piece and keeps sweep curves out of the Monte Carlo
noise floor.
"""

from dataclasses import dataclass

import numpy as np

from barriermpc.condense import CondensedQp
from barriermpc.explicit import PieceCache, eval_explicit_batch

DISTRIBUTIONS = ("uniform-ball", "uniform-box", "gaussian")

# pull projected states this relative distance toward the origin (a strictly
# feasible state) so boundary roundoff cannot flip them back to infeasible
# Projected points land on the feasibility boundary up to the active-set
# solver's constraint tolerance, so they are pulled toward the origin (which
# is strictly feasible) before re-evaluation.  The pull must dominate that
# tolerance even for points projected from far away, where the absolute
# constraint error scales with the point's norm.
_INTERIOR_PULL = 1e-7


@dataclass(frozen=True)
class SmoothingSpec:
    """Noise model and sample budget for the randomized policy."""

    distribution: str
    epsilon: float
    n_samples: int
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


@dataclass(frozen=True, eq=False)
class RandomizedPolicyResult:
    u0_mean: np.ndarray
    u0_stderr: np.ndarray
    projected_fraction: float
    n_samples: int


def noise_stream(x0, seed):
    """Deterministic generator keyed by (state, seed).

    The state's raw float words enter the seed sequence, so every (x0, seed)
    pair gets its own reproducible stream regardless of evaluation order.
    """
    words = np.frombuffer(np.asarray(x0, dtype=float).tobytes(), dtype=np.uint64)
    entropy = [int(seed) & (2**64 - 1)] + [int(word) for word in words]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def draw_noise(rng, distribution, n, dim):
    """n unit-scale noise vectors: standard normal, box, or solid ball."""
    if distribution == "gaussian":
        return rng.standard_normal((n, dim))
    if distribution == "uniform-box":
        return rng.uniform(-1.0, 1.0, size=(n, dim))
    if distribution == "uniform-ball":
        direction = rng.standard_normal((n, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
        return direction * radius
    raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")


def projection_qp(qp, reg=1e-6):
    """QP whose solution projects a state onto the feasible domain.

    Minimizing 0.5 norm(x - xs)^2 + 0.5 reg norm(u)^2 over (x, u) with
    G u - P x <= w finds the closest state that admits a feasible input.
    The input regularizer keeps the lifted Hessian positive definite; 1e-6
    shifts the projected state by under 1e-4 while keeping the active-set
    solve well conditioned (1e-8 does not).
    """
    d_x, n_u, m = qp.d_x, qp.n_u, qp.m
    H = np.eye(d_x + n_u)
    H[d_x:, d_x:] *= reg
    F = np.hstack([np.eye(d_x), np.zeros((d_x, n_u))])
    G = np.hstack([-qp.P, qp.G])
    return CondensedQp(
        H=H,
        F=F,
        G=G,
        P=np.zeros((m, d_x)),
        w=qp.w.copy(),
        Ahat=np.eye(d_x),
        Bhat=np.eye(d_x),
        T=1,
        d_x=d_x,
        d_u=d_x + n_u,
        cost_const=np.zeros((d_x, d_x)),
    )


def project_feasible(qp, states, proj_qp=None, proj_cache=None):
    """Project states onto the set where the QP has a feasible input."""
    if proj_qp is None:
        proj_qp = projection_qp(qp)
    Z, bad = eval_explicit_batch(proj_qp, states, cache=proj_cache)
    if bad.any():
        raise RuntimeError("projection problem reported an empty feasible set")
    return (1.0 - _INTERIOR_PULL) * Z[:, : qp.d_x]


class _BatchEvaluator:
    """Explicit-policy evaluation with projection for infeasible states."""

    def __init__(self, qp):
        self.qp = qp
        self.cache = PieceCache(qp)
        self.proj_qp = projection_qp(qp)
        self.proj_cache = PieceCache(self.proj_qp)
        self.n_projected = 0
        self.n_evaluated = 0

    def first_inputs(self, states):
        states = np.atleast_2d(np.asarray(states, dtype=float))
        U, infeasible = eval_explicit_batch(self.qp, states, cache=self.cache)
        self.n_evaluated += states.shape[0]
        if infeasible.any():
            idx = np.flatnonzero(infeasible)
            fixed = project_feasible(
                self.qp, states[idx], proj_qp=self.proj_qp, proj_cache=self.proj_cache
            )
            U_fixed, still_bad = eval_explicit_batch(
                self.qp, fixed, cache=self.cache
            )
            if still_bad.any():
                raise RuntimeError("state remained infeasible after projection")
            U[idx] = U_fixed
            self.n_projected += idx.size
        return U[:, : self.qp.d_u]


def randomized_policy(qp, spec, x0, evaluator=None, noise=None):
    """Sample mean of the exact first input under state noise.

    Deterministic for fixed (spec, x0): the noise stream is keyed by the
    state and seed, and the mean is reduced in sample order.  Callers that
    need the same draws across several states (sweeps) can pass the noise
    matrix explicitly.  Returns the mean, its standard error, and the
    fraction of draws that had to be projected back onto the feasible
    domain.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if evaluator is None:
        evaluator = _BatchEvaluator(qp)
    if noise is None:
        rng = noise_stream(x0, spec.seed)
        W = draw_noise(rng, spec.distribution, spec.n_samples, x0.size)
    else:
        W = np.asarray(noise, dtype=float)
    before = evaluator.n_projected
    U0 = evaluator.first_inputs(x0 + spec.epsilon * W)
    projected = evaluator.n_projected - before
    mean = U0.mean(axis=0)
    if spec.n_samples > 1:
        stderr = U0.std(axis=0, ddof=1) / np.sqrt(spec.n_samples)
    else:
        stderr = np.zeros_like(mean)
    return RandomizedPolicyResult(
        u0_mean=mean,
        u0_stderr=stderr,
        projected_fraction=projected / spec.n_samples,
        n_samples=spec.n_samples,
    )


def smoothed_jacobian(qp, spec, x0, h=1e-4, evaluator=None, noise=None):
    """Central finite difference of the randomized policy over the state.

    Every shifted evaluation reuses one noise matrix (drawn at the base
    state unless passed in), so on a region where the exact policy is
    affine the difference quotient recovers the piece gain exactly.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if evaluator is None:
        evaluator = _BatchEvaluator(qp)
    if noise is None:
        rng = noise_stream(x0, spec.seed)
        W = draw_noise(rng, spec.distribution, spec.n_samples, x0.size)
    else:
        W = np.asarray(noise, dtype=float)
    jac = np.zeros((qp.d_u, x0.size))
    for j in range(x0.size):
        shift = np.zeros_like(x0)
        shift[j] = h
        up = evaluator.first_inputs(x0 + shift + spec.epsilon * W).mean(axis=0)
        dn = evaluator.first_inputs(x0 - shift + spec.epsilon * W).mean(axis=0)
        jac[:, j] = (up - dn) / (2.0 * h)
    return jac
