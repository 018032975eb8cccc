"""Closed-loop simulation, empirical stability and smoothness estimation,
and dataset export for imitation learning.

The policies below wrap the three controllers (exact explicit, barrier
smoothed, randomized smoothed) behind one stepping interface so the same
harness can roll them out, perturb them, sweep their smoothing parameters,
and export supervision datasets with per-step Jacobians.
"""

import json
from dataclasses import dataclass

import numpy as np

from barriermpc.barrier import BarrierConfig, solve_barrier
from barriermpc.condense import InfeasibleError
from barriermpc.explicit import (
    DegenerateActiveSetError,
    piece_gains,
    solve_qp,
)
from barriermpc.smoothing import (
    SmoothingSpec,
    _BatchEvaluator,
    draw_noise,
    randomized_policy,
    smoothed_jacobian,
)


class PolicyFailure(RuntimeError):
    """Controller failed mid-rollout; carries the step index."""

    def __init__(self, step, cause):
        super().__init__(f"policy failed at step {step}: {cause}")
        self.step = step


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One closed-loop run: states, inputs, per-step policy Jacobians."""

    states: np.ndarray
    inputs: np.ndarray
    jacobians: np.ndarray
    state_ok: np.ndarray
    input_ok: np.ndarray
    policy_tag: str
    halted_early: bool = False

    @property
    def n_steps(self):
        return self.inputs.shape[0]

    @property
    def n_violations(self):
        return int((~self.state_ok).sum() + (~self.input_ok).sum())


@dataclass(frozen=True)
class SmoothnessEstimate:
    """Worst-case first and second derivative sizes over a state grid."""

    parameter: float
    L0_est: float
    L1_est: float
    grid_spec: str
    n_failures: int = 0


class BarrierPolicy:
    """Smoothed controller with warm starts threaded along the trajectory.

    Each step seeds Newton with the previous solution shifted by one stage
    (last stage repeated); infeasible seeds are discarded inside the solver.
    """

    def __init__(self, qp, cfg):
        self.qp = qp
        self.cfg = cfg
        self.tag = f"barrier(eta={cfg.eta:g})"
        self._last = None

    def reset(self):
        self._last = None

    def _warm(self):
        if self._last is None:
            return None
        d_u = self.qp.d_u
        return np.concatenate([self._last[d_u:], self._last[-d_u:]])

    def step(self, x):
        sol = solve_barrier(self.qp, self.cfg, x, warm_start=self._warm())
        self._last = sol.u_eta
        return sol.u_eta[: self.qp.d_u], sol.jacobian[: self.qp.d_u]

    def jacobian_at(self, x):
        return solve_barrier(self.qp, self.cfg, x).jacobian[: self.qp.d_u]


class ExplicitPolicy:
    """Exact piecewise-affine controller; Jacobian is the piece gain."""

    def __init__(self, qp):
        self.qp = qp
        self.tag = "explicit"

    def reset(self):
        pass

    def step(self, x):
        sol = solve_qp(self.qp, x)
        try:
            jac = piece_gains(self.qp, sol.sigma).K[: self.qp.d_u]
        except DegenerateActiveSetError:
            jac = np.full((self.qp.d_u, self.qp.d_x), np.nan)
        return sol.u_star[: self.qp.d_u], jac

    def jacobian_at(self, x):
        sol = solve_qp(self.qp, x)
        return piece_gains(self.qp, sol.sigma).K[: self.qp.d_u]


class RandomizedSmoothingPolicy:
    """Monte Carlo smoothed controller built on the exact policy.

    Keeps one batch evaluator so piece caches and projection counts persist
    across steps; Jacobians come from common-random-number differences and
    can be disabled when only inputs are needed.
    """

    def __init__(self, qp, spec, record_jacobians=True, frozen_noise=None):
        self.qp = qp
        self.spec = spec
        self.record_jacobians = record_jacobians
        self.frozen_noise = frozen_noise
        self.tag = f"rs({spec.distribution},eps={spec.epsilon:g})"
        self.evaluator = _BatchEvaluator(qp)

    def reset(self):
        pass

    @property
    def projected_fraction(self):
        if self.evaluator.n_evaluated == 0:
            return 0.0
        return self.evaluator.n_projected / self.evaluator.n_evaluated

    def step(self, x):
        res = randomized_policy(self.qp, self.spec, x, evaluator=self.evaluator)
        if self.record_jacobians:
            jac = smoothed_jacobian(self.qp, self.spec, x, evaluator=self.evaluator)
        else:
            jac = np.full((self.qp.d_u, self.qp.d_x), np.nan)
        return res.u0_mean, jac

    def jacobian_at(self, x):
        return smoothed_jacobian(
            self.qp, self.spec, x, evaluator=self.evaluator, noise=self.frozen_noise
        )


def barrier_family(qp, **cfg_kwargs):
    """Factory mapping eta to a barrier policy, for smoothness sweeps."""

    def make(eta):
        return BarrierPolicy(qp, BarrierConfig(eta=float(eta), **cfg_kwargs))

    return make


def randomized_family(qp, distribution="gaussian", n_samples=500, seed=0):
    """Factory mapping epsilon to a randomized policy with frozen noise.

    Freezing one noise matrix per policy keeps the draws common across every
    state and finite-difference shift of a sweep, so curvature estimates
    measure the policy and not the Monte Carlo jitter.
    """

    def make(eps):
        spec = SmoothingSpec(distribution, float(eps), n_samples, seed)
        noise = draw_noise(np.random.default_rng(seed), distribution, n_samples, qp.d_x)
        return RandomizedSmoothingPolicy(
            qp, spec, record_jacobians=False, frozen_noise=noise
        )

    return make


def closed_loop(sys, policy, x0, K, state_set=None, input_set=None):
    """Roll the closed loop x_{t+1} = A x_t + B pi(x_t) for K steps.

    Records the policy Jacobian at every step, checks each state and input
    against the given sets, and halts early (flagged) when the state leaves
    state_set.  Policy errors surface as PolicyFailure with the step index.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    policy.reset()
    states = [x]
    inputs, jacs, input_ok = [], [], []
    state_ok = [state_set.contains(x) if state_set is not None else True]
    halted = False
    for t in range(K):
        if not state_ok[-1]:
            halted = True
            break
        try:
            u, jac = policy.step(states[-1])
        except (InfeasibleError, RuntimeError) as exc:
            raise PolicyFailure(t, exc) from exc
        inputs.append(np.asarray(u, dtype=float))
        jacs.append(np.asarray(jac, dtype=float))
        input_ok.append(input_set.contains(u) if input_set is not None else True)
        x_next = sys.step(states[-1], u)
        states.append(x_next)
        state_ok.append(state_set.contains(x_next) if state_set is not None else True)
    d_u = inputs[0].size if inputs else sys.d_u
    return Trajectory(
        states=np.array(states),
        inputs=np.array(inputs, dtype=float).reshape(len(inputs), d_u),
        jacobians=np.array(jacs, dtype=float).reshape(len(jacs), d_u, x.size),
        state_ok=np.array(state_ok, dtype=bool),
        input_ok=np.array(input_ok, dtype=bool),
        policy_tag=policy.tag,
        halted_early=halted,
    )


def iss_estimate(sys, policy, x0, perturbation_level, n_rollouts, K=20, seed=0):
    """Empirical incremental-stability gain under state disturbances.

    Runs one nominal rollout and n_rollouts perturbed ones with disturbances
    drawn uniformly on the sphere of radius perturbation_level, added to the
    state after each closed-loop step.  Returns the largest observed ratio
    of state deviation to the worst disturbance so far; zero perturbation
    returns 0 by convention.
    """
    if perturbation_level == 0 or n_rollouts == 0:
        return 0.0
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    nominal = closed_loop(sys, policy, x0, K)
    rng = np.random.default_rng(seed)
    gamma = 0.0
    for _ in range(n_rollouts):
        policy.reset()
        x = x0.copy()
        worst_delta = 0.0
        for t in range(K):
            try:
                u, _ = policy.step(x)
            except (InfeasibleError, RuntimeError) as exc:
                raise PolicyFailure(t, exc) from exc
            delta = rng.standard_normal(x0.size)
            delta *= perturbation_level / np.linalg.norm(delta)
            x = sys.step(x, u) + delta
            worst_delta = max(worst_delta, float(np.linalg.norm(delta)))
            deviation = float(np.linalg.norm(x - nominal.states[t + 1]))
            gamma = max(gamma, deviation / worst_delta)
    return gamma


def _direction_set(d_x, n_random, seed):
    dirs = [np.eye(d_x)[i] for i in range(d_x)]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        v = rng.standard_normal(d_x)
        dirs.append(v / np.linalg.norm(v))
    return dirs


def smoothness_sweep(
    policy_factory,
    parameter_grid,
    state_grid,
    n_random_directions=2,
    h_frac=1e-4,
    h_param_frac=0.0,
    seed=0,
):
    """Worst-case gradient and curvature of a policy family over a grid.

    For each parameter, L0_est is the largest Jacobian spectral norm over
    the state grid, and L1_est the largest central-difference curvature
    norm(J(x + hv) - J(x - hv)) / 2h over the grid and a direction sample.
    The step is h = h_frac times the grid extent, or, when h_param_frac is
    positive, h = h_param_frac times the swept parameter.  The latter suits
    families whose Jacobian varies on the scale of the parameter itself
    (randomized smoothing spreads its kinks over a strip of width epsilon;
    a fixed step much smaller than that strip measures individual Monte
    Carlo sample crossings, amplified by 1/h, instead of the curvature of
    the smoothed policy).  States where the policy fails are skipped and
    counted.
    """
    state_grid = np.atleast_2d(np.asarray(state_grid, dtype=float))
    extent = float(np.ptp(state_grid, axis=0).max())
    dirs = _direction_set(state_grid.shape[1], n_random_directions, seed)

    estimates = []
    for param in parameter_grid:
        if h_param_frac > 0.0:
            h = h_param_frac * float(param)
        else:
            h = h_frac * max(extent, 1.0)
        grid_spec = f"{state_grid.shape[0]} states, extent {extent:g}, h {h:g}"
        policy = policy_factory(param)
        L0, L1, failures = 0.0, 0.0, 0
        for x in state_grid:
            try:
                L0 = max(L0, float(np.linalg.norm(policy.jacobian_at(x), 2)))
                for v in dirs:
                    jp = policy.jacobian_at(x + h * v)
                    jm = policy.jacobian_at(x - h * v)
                    L1 = max(L1, float(np.linalg.norm(jp - jm, 2) / (2 * h)))
            except (InfeasibleError, RuntimeError):
                failures += 1
        estimates.append(
            SmoothnessEstimate(
                parameter=float(param),
                L0_est=L0,
                L1_est=L1,
                grid_spec=grid_spec,
                n_failures=failures,
            )
        )
    return estimates


def sweep_to_csv(estimates, path):
    """Write sweep results as parameter,L0,L1,n_failures rows."""
    lines = ["parameter,L0,L1,n_failures"]
    for est in estimates:
        lines.append(
            f"{est.parameter:.17g},{est.L0_est:.17g},{est.L1_est:.17g},{est.n_failures}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def export_dataset(trajectories, path, metadata=None):
    """Write per-step supervision rows for imitation training.

    Columns: traj_id, t, state, input, and the policy Jacobian flattened
    row-major; floats carry 17 significant digits so parsing the file back
    reproduces the arrays bit for bit.  A JSON sidecar at <path>.meta.json
    echoes the run configuration when metadata is given.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("need at least one trajectory")
    d_x = trajectories[0].states.shape[1]
    d_u = trajectories[0].inputs.shape[1]
    for traj in trajectories:
        if traj.states.shape[1] != d_x or traj.inputs.shape[1] != d_u:
            raise ValueError("trajectories have inconsistent dimensions")
    header = (
        ["traj_id", "t"]
        + [f"x_{i}" for i in range(d_x)]
        + [f"u_{i}" for i in range(d_u)]
        + [f"J_{i}{j}" for i in range(d_u) for j in range(d_x)]
    )
    lines = [",".join(header)]
    for traj_id, traj in enumerate(trajectories):
        for t in range(traj.n_steps):
            row = [str(traj_id), str(t)]
            row += [f"{v:.17g}" for v in traj.states[t]]
            row += [f"{v:.17g}" for v in traj.inputs[t]]
            row += [f"{v:.17g}" for v in traj.jacobians[t].ravel()]
            lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if metadata is not None:
        with open(f"{path}.meta.json", "w") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def load_dataset(path):
    """Parse an exported dataset back into (traj_id, t, x, u, J) arrays."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    d_x = sum(1 for name in header if name.startswith("x_"))
    d_u = sum(1 for name in header if name.startswith("u_"))
    traj_id = raw[:, 0].astype(int)
    t = raw[:, 1].astype(int)
    x = raw[:, 2 : 2 + d_x]
    u = raw[:, 2 + d_x : 2 + d_x + d_u]
    J = raw[:, 2 + d_x + d_u :].reshape(-1, d_u, d_x)
    return traj_id, t, x, u, J


def sample_initial_states(qp, state_box, n, seed=0, frac=0.8, max_tries=200):
    """Uniform draws from frac times the state box, kept only when feasible.

    The sampling box shrinks toward the box center by frac; draws whose QP
    has no feasible input sequence are rejected so every returned state can
    start a rollout.
    """
    bounds = state_box.box_bounds()
    if bounds is None:
        raise ValueError("state set is not an axis-aligned box")
    lo, hi = bounds
    center = (lo + hi) / 2.0
    half = frac * (hi - lo) / 2.0
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries * n):
        x = rng.uniform(center - half, center + half)
        try:
            solve_qp(qp, x)
        except InfeasibleError:
            continue
        out.append(x)
        if len(out) == n:
            return np.array(out)
    raise RuntimeError(f"could not find {n} feasible initial states")
