"""Command-line front end tying the library together for reproduction runs.

Subcommands
-----------
condense        write the dense QP matrices of a problem to CSV files
solve           smoothed minimizer, Jacobian, and Newton diagnostics at a state
explicit        exact minimizer and optimal active set at a state
pieces          census of affine pieces over a state grid, as CSV
rs-solve        Monte Carlo smoothed input at a state
rollout         one closed-loop run written in the dataset format
sweep           smoothness estimates across a log-spaced parameter range
bounds          certified constants of the smoothed policy as key=value lines
verify          run the module invariant suites and report any red check
export-dataset  batch rollouts exported for imitation training

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 verification failure.  All floating-point output carries 17 significant
digits so files round-trip bit for bit.  The seed flag falls back to the
BARRIER_MPC_SEED environment variable, then to 0.
"""

import argparse
import json
import math
import multiprocessing
import os
import sys
import tempfile

import numpy as np

from barriermpc.barrier import (
    BarrierConfig,
    OutsideDomainError,
    barrier_hessian_floor,
    bounds_report,
    convex_combination_jacobian,
    inner_product_check,
    policy_jacobian,
    policy_jacobian_woodbury,
    recentering_vector,
    residual_lower_bound,
    solve_barrier,
    suboptimality_report,
)
from barriermpc.condense import (
    InfeasibleError,
    condense,
    double_integrator,
    geometry,
    load_problem,
    simulate,
)
from barriermpc.explicit import (
    CyclingGuardError,
    DegenerateActiveSetError,
    enumerate_pieces,
    eval_explicit_batch,
    sigma_from_key,
    sigma_key,
    solve_qp,
)
from barriermpc.linalg_kernels import (
    adjugate,
    decompose_inverse_plus_diagonal,
    det_plus_diagonal,
    reconstruct_inverse,
)
from barriermpc.rollout import (
    BarrierPolicy,
    ExplicitPolicy,
    PolicyFailure,
    RandomizedSmoothingPolicy,
    barrier_family,
    closed_loop,
    export_dataset,
    load_dataset,
    randomized_family,
    sample_initial_states,
    smoothness_sweep,
    sweep_to_csv,
)
from barriermpc.smoothing import (
    DISTRIBUTIONS,
    SmoothingSpec,
    draw_noise,
    project_feasible,
    randomized_policy,
    smoothed_jacobian,
)

FLOAT_FMT = "%.17g"


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def fmt(x):
    return FLOAT_FMT % float(x)


def fmt_vector(v):
    return ",".join(fmt(x) for x in np.asarray(v, dtype=float).reshape(-1))


def fmt_matrix(M):
    return "\n".join(fmt_vector(row) for row in np.atleast_2d(M))


def parse_state(text, d_x):
    x0 = np.array([float(tok) for tok in text.split(",")], dtype=float)
    if x0.shape[0] != d_x:
        raise ValueError(f"--x0 has {x0.shape[0]} entries, the state needs {d_x}")
    return x0


def parse_parameter_range(text):
    """Parse 'start:stop:logN' into N log-spaced values, or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3 or not parts[2].startswith("log"):
            raise ValueError(
                f"range {text!r} is not start:stop:logN or a comma list"
            )
        start, stop = float(parts[0]), float(parts[1])
        n = int(parts[2][3:])
        if start <= 0 or stop <= 0 or n < 1:
            raise ValueError("log ranges need positive endpoints and N >= 1")
        return np.geomspace(start, stop, n)
    return np.array([float(tok) for tok in text.split(",")], dtype=float)


def resolve_seed(value):
    if value is not None:
        return int(value)
    env = os.environ.get("BARRIER_MPC_SEED")
    if env is not None:
        return int(env)
    return 0


def load_run(problem_path):
    """Problem spec and condensed QP for a run; None means the benchmark."""
    spec = load_problem(problem_path) if problem_path else double_integrator()
    return spec, condense(spec)


def state_grid(spec, n, frac=1.0):
    """Uniform n-per-axis grid over frac times the state box."""
    bounds = spec.X.box_bounds()
    if bounds is None:
        raise ValueError("state grids need an axis-aligned state set")
    lo, hi = bounds
    axes = [np.linspace(frac * lo[i], frac * hi[i], n) for i in range(spec.X.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_condense(args):
    spec, qp = load_run(args.problem)
    out = ensure_dir(args.output_dir)
    d = recentering_vector(qp)
    print(f"T={qp.T}")
    print(f"d_x={qp.d_x}")
    print(f"d_u={qp.d_u}")
    print(f"n_u={qp.n_u}")
    print(f"m={qp.m}")
    for name, M in (("H", qp.H), ("F", qp.F), ("G", qp.G), ("P", qp.P), ("w", qp.w), ("d", d)):
        path = os.path.join(out, f"condensed_{name}.csv")
        np.savetxt(path, np.atleast_2d(M), fmt=FLOAT_FMT, delimiter=",")
        print(f"wrote {path}")
    return 0


def cmd_solve(args):
    spec, qp = load_run(args.problem)
    x0 = parse_state(args.x0, qp.d_x)
    cfg = BarrierConfig(eta=args.eta, newton_tol=args.newton_tol)
    sol = solve_barrier(qp, cfg, x0)
    if not sol.converged:
        print(f"solver failure: Newton stalled at decrement {sol.decrement:g}", file=sys.stderr)
        return 2
    print(f"u0={fmt_vector(sol.u_eta[: qp.d_u])}")
    print(f"u={fmt_vector(sol.u_eta)}")
    print(f"residual_min={fmt(sol.phi.min())}")
    print(f"newton_iters={sol.newton_iters}")
    print(f"decrement={fmt(sol.decrement)}")
    print(f"objective={fmt(qp.objective(x0, sol.u_eta))}")
    print("jacobian=")
    print(fmt_matrix(sol.jacobian[: qp.d_u]))
    return 0


def cmd_explicit(args):
    spec, qp = load_run(args.problem)
    x0 = parse_state(args.x0, qp.d_x)
    sol = solve_qp(qp, x0)
    print(f"u0={fmt_vector(sol.u_star[: qp.d_u])}")
    print(f"u={fmt_vector(sol.u_star)}")
    print(f"sigma_bitmask={sigma_key(sol.sigma)}")
    print(f"n_active={int(np.asarray(sol.sigma).sum())}")
    print(f"objective={fmt(qp.objective(x0, sol.u_star))}")
    return 0


def cmd_pieces(args):
    from barriermpc.explicit import piece_gains

    spec, qp = load_run(args.problem)
    grid = state_grid(spec, args.grid, frac=args.frac)
    census = enumerate_pieces(qp, grid)
    rows = ["sigma_bitmask,count,K_frobenius_norm"]
    order = sorted(census.counts, key=lambda k: (-census.counts[k], k))
    for key in order:
        if key in census.pieces:
            fro = float(np.linalg.norm(census.pieces[key].K))
        else:
            try:
                fro = float(np.linalg.norm(piece_gains(qp, sigma_from_key(key)).K))
            except DegenerateActiveSetError:
                fro = float("nan")
        rows.append(f"{key},{census.counts[key]},{fmt(fro)}")
    body = "\n".join(rows) + "\n"
    sys.stdout.write(body)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(body)
    print(
        f"n_pieces={census.n_pieces} infeasible={census.infeasible} total={census.total}",
        file=sys.stderr,
    )
    return 0


def cmd_rs_solve(args):
    spec, qp = load_run(args.problem)
    x0 = parse_state(args.x0, qp.d_x)
    rs_spec = SmoothingSpec(args.dist, args.eps, args.samples, resolve_seed(args.seed))
    res = randomized_policy(qp, rs_spec, x0)
    print(f"u0_mean={fmt_vector(res.u0_mean)}")
    print(f"u0_stderr={fmt_vector(res.u0_stderr)}")
    print(f"projected_fraction={fmt(res.projected_fraction)}")
    print(f"n_samples={res.n_samples}")
    if args.jacobian:
        print("jacobian=")
        print(fmt_matrix(smoothed_jacobian(qp, rs_spec, x0)))
    return 0


def _build_policy(qp, args, seed):
    if args.policy == "barrier":
        return BarrierPolicy(qp, BarrierConfig(eta=args.eta))
    if args.policy == "explicit":
        return ExplicitPolicy(qp)
    rs_spec = SmoothingSpec(args.dist, args.eps, args.samples, seed)
    return RandomizedSmoothingPolicy(qp, rs_spec)


def cmd_rollout(args):
    spec, qp = load_run(args.problem)
    x0 = parse_state(args.x0, qp.d_x)
    if not spec.X.contains(x0):
        raise ValueError(f"initial state {args.x0} lies outside the state set")
    seed = resolve_seed(args.seed)
    policy = _build_policy(qp, args, seed)
    traj = closed_loop(spec.sys, policy, x0, args.steps, state_set=spec.X, input_set=spec.U)
    out = ensure_dir(args.output_dir)
    path = os.path.join(out, "trajectory.csv")
    export_dataset(
        [traj],
        path,
        metadata={
            "command": "rollout",
            "policy": traj.policy_tag,
            "x0": [float(v) for v in x0],
            "steps": args.steps,
            "seed": seed,
            "problem": args.problem or "builtin double integrator",
        },
    )
    print(f"policy={traj.policy_tag}")
    print(f"steps={traj.n_steps}")
    print(f"final_state_norm={fmt(np.linalg.norm(traj.states[-1]))}")
    print(f"n_violations={traj.n_violations}")
    print(f"halted_early={str(traj.halted_early).lower()}")
    print(f"wrote {path}")
    return 0


def _sweep_worker(payload):
    (problem, kind, param, grid_n, frac, n_dirs, h_frac, h_param_frac,
     seed, samples, dist) = payload
    spec, qp = load_run(problem)
    grid = state_grid(spec, grid_n, frac=frac)
    if kind == "barrier":
        factory = barrier_family(qp)
    else:
        factory = randomized_family(qp, distribution=dist, n_samples=samples, seed=seed)
    [est] = smoothness_sweep(
        factory, [param], grid, n_random_directions=n_dirs, h_frac=h_frac,
        h_param_frac=h_param_frac, seed=seed,
    )
    return est


def cmd_sweep(args):
    if (args.etas is None) == (args.eps is None):
        raise ValueError("give exactly one of --etas or --eps")
    kind = "barrier" if args.etas is not None else "rs"
    params = parse_parameter_range(args.etas if kind == "barrier" else args.eps)
    seed = resolve_seed(args.seed)
    # Randomized smoothing defaults to a probe step proportional to epsilon,
    # matching the length scale its Jacobian actually varies on; pass
    # --h-param-frac 0 to force the fixed extent-scaled step.
    h_param_frac = args.h_param_frac
    if h_param_frac is None:
        h_param_frac = 0.05 if kind == "rs" else 0.0
    payloads = [
        (
            args.problem,
            kind,
            float(p),
            args.grid,
            args.frac,
            args.dirs,
            args.h_frac,
            h_param_frac,
            seed,
            args.samples,
            args.dist,
        )
        for p in params
    ]
    if args.jobs > 1:
        with multiprocessing.Pool(args.jobs) as pool:
            estimates = pool.map(_sweep_worker, payloads)
    else:
        estimates = [_sweep_worker(p) for p in payloads]
    out = ensure_dir(args.output_dir)
    path = os.path.join(out, f"sweep_{kind}.csv")
    sweep_to_csv(estimates, path)
    with open(path) as fh:
        sys.stdout.write(fh.read())
    print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_bounds(args):
    spec, qp = load_run(args.problem)
    x0 = (
        parse_state(args.x0, qp.d_x)
        if args.x0
        else np.zeros(qp.d_x)
    )
    grid = state_grid(spec, args.grid, frac=args.frac)
    census = enumerate_pieces(qp, grid)
    sigmas = [sigma_from_key(k) for k in sorted(census.pieces)]
    report = bounds_report(qp, args.eta, x0, sigmas)
    for name in ("nu", "res_lb", "subopt_ub", "L", "hess_ub", "C"):
        print(f"{name}={fmt(getattr(report, name))}")
    print(f"n_pieces={census.n_pieces}", file=sys.stderr)
    return 0


def _rollout_worker(payload):
    problem, policy_kind, eta, dist, eps, samples, seed, x0, steps = payload
    spec, qp = load_run(problem)

    class _Args:
        policy = policy_kind

    _Args.eta, _Args.dist, _Args.eps, _Args.samples = eta, dist, eps, samples
    policy = _build_policy(qp, _Args, seed)
    return closed_loop(spec.sys, policy, np.asarray(x0), steps, state_set=spec.X, input_set=spec.U)


def cmd_export_dataset(args):
    spec, qp = load_run(args.problem)
    seed = resolve_seed(args.seed)
    starts = sample_initial_states(qp, spec.X, args.n_traj, seed=seed, frac=args.frac)
    payloads = [
        (
            args.problem,
            args.policy,
            args.eta,
            args.dist,
            args.eps,
            args.samples,
            seed,
            [float(v) for v in x0],
            args.steps,
        )
        for x0 in starts
    ]
    if args.jobs > 1:
        with multiprocessing.Pool(args.jobs) as pool:
            trajectories = pool.map(_rollout_worker, payloads)
    else:
        trajectories = [_rollout_worker(p) for p in payloads]
    path = args.out or os.path.join(ensure_dir(args.output_dir), "dataset.csv")
    export_dataset(
        trajectories,
        path,
        metadata={
            "command": "export-dataset",
            "policy": trajectories[0].policy_tag,
            "n_trajectories": args.n_traj,
            "steps": args.steps,
            "initial_state_box_fraction": args.frac,
            "seed": seed,
            "problem": args.problem or "builtin double integrator",
        },
    )
    n_rows = sum(t.n_steps for t in trajectories)
    print(f"trajectories={len(trajectories)}")
    print(f"rows={n_rows}")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# verify


class _CheckSuite:
    def __init__(self):
        self.results = []

    def record(self, name, ok, detail):
        self.results.append((name, ok, detail))
        status = "ok  " if ok else "FAIL"
        print(f"{status} {name:32s} {detail}")

    def skip(self, name, reason):
        self.results.append((name, True, f"skipped: {reason}"))
        print(f"skip {name:32s} {reason}")

    @property
    def n_failed(self):
        return sum(1 for _, ok, _ in self.results if not ok)


def _verify_linalg(suite, rng):
    worst = 0.0
    witness = ""
    for _ in range(30):
        n = int(rng.integers(1, 7))
        M = rng.standard_normal((n, n))
        resid = float(np.abs(M @ adjugate(M) - np.linalg.det(M) * np.eye(n)).max())
        scale = max(1.0, float(np.abs(np.linalg.det(M))))
        if resid / scale > worst:
            worst, witness = resid / scale, f"n={n}"
    suite.record(
        "linalg-adjugate-identity",
        worst <= 1e-8,
        f"worst relative residual {worst:.3g} ({witness})"
        if worst > 1e-8
        else f"30 matrices, worst relative residual {worst:.3g}",
    )

    worst = 0.0
    for _ in range(30):
        n = int(rng.integers(1, 7))
        S = rng.standard_normal((n, n))
        A = S @ S.T
        lam = rng.uniform(0.1, 3.0, n)
        direct = float(np.linalg.det(A + np.diag(lam)))
        expanded = det_plus_diagonal(A, lam)
        worst = max(worst, abs(direct - expanded) / max(1.0, abs(direct)))
    suite.record(
        "linalg-determinant-expansion",
        worst <= 1e-8,
        f"30 matrices, worst relative error {worst:.3g}",
    )

    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(1, 7))
        S = rng.standard_normal((n, n))
        A = S @ S.T + 1e-3 * np.eye(n)
        lam = rng.uniform(0.1, 2.0, n)
        terms, _ = decompose_inverse_plus_diagonal(A, lam)
        direct = np.linalg.inv(A + np.diag(lam))
        worst = max(worst, float(np.abs(reconstruct_inverse(terms) - direct).max()))
    suite.record(
        "linalg-inverse-expansion",
        worst <= 1e-8,
        f"10 matrices, worst entry error {worst:.3g}",
    )


def _verify_condense(suite, spec, qp, rng, states):
    worst = 0.0
    Q, R = spec.Q, spec.R
    for x0 in states[:10]:
        u = 0.1 * rng.standard_normal(qp.n_u)
        xs = simulate(spec.sys, x0, u.reshape(qp.T, qp.d_u))
        stage = sum(
            xs[t + 1] @ Q[t] @ xs[t + 1] + u[t * qp.d_u : (t + 1) * qp.d_u] @ R[t] @ u[t * qp.d_u : (t + 1) * qp.d_u]
            for t in range(qp.T)
        )
        worst = max(worst, abs(stage - qp.total_cost(x0, u)) / max(1.0, abs(stage)))
    suite.record(
        "condense-cost-identity",
        worst <= 1e-10,
        f"10 rollouts, worst relative mismatch {worst:.3g}",
    )

    worst = 0.0
    h = 1e-6
    for x0 in states[:5]:
        u = 0.1 * rng.standard_normal(qp.n_u)
        grad = qp.gradient(x0, u)
        for i in range(min(qp.n_u, 4)):
            e = np.zeros(qp.n_u)
            e[i] = h
            fd = (qp.objective(x0, u + e) - qp.objective(x0, u - e)) / (2 * h)
            worst = max(worst, abs(fd - grad[i]) / max(1.0, abs(grad[i])))
    suite.record(
        "condense-gradient-fd",
        worst <= 1e-6,
        f"worst relative error {worst:.3g}",
    )


def _verify_explicit(suite, qp, rng, states):
    worst = 0.0
    witness = ""
    for x0 in states:
        sol = solve_qp(qp, x0)
        resid = max(sol.kkt_residuals(qp, x0))
        if resid > worst:
            worst, witness = resid, fmt_vector(x0)
    suite.record(
        "explicit-kkt-residuals",
        worst <= 1e-7,
        f"{len(states)} states, worst residual {worst:.3g}"
        + (f" at x0={witness}" if worst > 1e-7 else ""),
    )

    batch_states = np.array(states)
    U, infeasible = eval_explicit_batch(qp, batch_states)
    worst = 0.0
    for i, x0 in enumerate(batch_states):
        if infeasible[i]:
            continue
        worst = max(worst, float(np.abs(U[i] - solve_qp(qp, x0).u_star).max()))
    suite.record(
        "explicit-batch-consistency",
        worst <= 1e-8,
        f"batch vs per-state worst gap {worst:.3g}",
    )


def _verify_barrier(suite, spec, qp, rng, states):
    worst_dec = 0.0
    worst_phi = math.inf
    for eta in (1e-2, 1.0):
        cfg = BarrierConfig(eta=eta)
        for x0 in states[:5]:
            sol = solve_barrier(qp, cfg, x0)
            worst_dec = max(worst_dec, sol.decrement)
            worst_phi = min(worst_phi, float(sol.phi.min()))
    suite.record(
        "barrier-stationarity",
        worst_dec <= 1e-9 and worst_phi > 0,
        f"worst decrement {worst_dec:.3g}, min residual {worst_phi:.3g}",
    )

    if qp.residuals(np.zeros(qp.d_x), np.zeros(qp.n_u)).min() > 0:
        norms = [
            float(np.linalg.norm(solve_barrier(qp, BarrierConfig(eta=eta), np.zeros(qp.d_x)).u_eta))
            for eta in (1e-2, 1.0)
        ]
        suite.record(
            "barrier-origin-pinned",
            max(norms) <= 1e-8,
            f"recentered minimizer norm at the origin {max(norms):.3g}",
        )
    else:
        suite.skip("barrier-origin-pinned", "origin not strictly feasible")

    worst = 0.0
    for x0 in states[:5]:
        sol = solve_barrier(qp, BarrierConfig(eta=0.1), x0)
        direct = policy_jacobian(qp, 0.1, x0, sol.u_eta)
        wood = policy_jacobian_woodbury(qp, 0.1, x0, sol.u_eta)
        scale = max(1.0, float(np.abs(direct).max()))
        worst = max(worst, float(np.abs(direct - wood).max()) / scale)
    suite.record(
        "barrier-jacobian-woodbury",
        worst <= 1e-9,
        f"direct vs low-rank route, worst relative gap {worst:.3g}",
    )

    cfg = BarrierConfig(eta=0.1, newton_tol=1e-12)
    h = 1e-5
    worst = 0.0
    for x0 in states[:3]:
        sol = solve_barrier(qp, cfg, x0)
        scale = max(1.0, float(np.abs(sol.jacobian).max()))
        for i in range(qp.d_x):
            e = np.zeros(qp.d_x)
            e[i] = h
            up = solve_barrier(qp, cfg, x0 + e, warm_start=sol.u_eta).u_eta
            dn = solve_barrier(qp, cfg, x0 - e, warm_start=sol.u_eta).u_eta
            fd = (up - dn) / (2 * h)
            worst = max(worst, float(np.abs(fd - sol.jacobian[:, i]).max()) / scale)
    suite.record(
        "barrier-jacobian-fd",
        worst <= 1e-4,
        f"3 states, worst relative error {worst:.3g}",
    )

    small = condense(
        type(spec)(sys=spec.sys, T=2, Q=spec.Q[0], R=spec.R[0], X=spec.X, U=spec.U)
    )
    if small.m <= 12:
        worst_sum = 0.0
        worst_gap = 0.0
        for x0 in states[:5]:
            sol = solve_barrier(small, BarrierConfig(eta=0.5), x0)
            jac, weights = convex_combination_jacobian(small, 0.5, x0, sol.u_eta)
            worst_sum = max(worst_sum, abs(sum(weights.values()) - 1.0))
            scale = max(1.0, float(np.abs(sol.jacobian).max()))
            worst_gap = max(worst_gap, float(np.abs(jac - sol.jacobian).max()) / scale)
        suite.record(
            "barrier-convex-combination",
            worst_sum <= 1e-12 and worst_gap <= 1e-8,
            f"weight sum error {worst_sum:.3g}, expansion gap {worst_gap:.3g}",
        )
    else:
        suite.skip(
            "barrier-convex-combination",
            f"two-stage problem still has m={small.m} > 12 constraints",
        )

    eta = 1e-2
    worst_margin = math.inf
    witness = ""
    for x0 in states[:5]:
        sol = solve_barrier(qp, BarrierConfig(eta=eta), x0)
        floor = residual_lower_bound(qp, eta, geometry(qp, x0))
        margin = float(sol.phi.min()) - floor
        if margin < worst_margin:
            worst_margin, witness = margin, fmt_vector(x0)
    suite.record(
        "barrier-residual-floor",
        worst_margin >= 0,
        f"5 states, worst slack above the floor {worst_margin:.3g}"
        + (f" at x0={witness}" if worst_margin < 0 else ""),
    )

    worst = -math.inf
    for x0 in states[:5]:
        gap, bound = suboptimality_report(qp, eta, x0)
        worst = max(worst, gap - bound)
    suite.record(
        "barrier-suboptimality-bound",
        worst <= 0,
        f"5 states, worst (gap - bound) {worst:.3g}",
    )

    x0 = np.asarray(states[0])
    seen, floor = barrier_hessian_floor(
        qp, x0, [solve_barrier(qp, BarrierConfig(eta=e), x0).u_eta for e in (1e-2, 0.1, 1.0)]
    )
    suite.record(
        "barrier-hessian-floor",
        seen >= floor,
        f"min curvature {seen:.3g} vs floor {floor:.3g}",
    )

    seen, nu = inner_product_check(qp, x0, n_samples=100, rng=rng)
    suite.record(
        "barrier-gradient-inner-product",
        seen <= nu,
        f"max product {seen:.3g} vs nu {nu:.3g}",
    )


def _verify_smoothing(suite, qp, rng, states):
    worst = 0.0
    for dist in DISTRIBUTIONS:
        W = draw_noise(np.random.default_rng(0), dist, 4000, qp.d_x)
        worst = max(worst, float(np.linalg.norm(W.mean(axis=0))) * math.sqrt(4000))
    suite.record(
        "smoothing-zero-mean",
        worst <= 4.0,
        f"scaled mean norm {worst:.3g} over all distributions",
    )

    x0 = np.asarray(states[0])
    rs_spec = SmoothingSpec("uniform-ball", 0.3, 64, 7)
    a = randomized_policy(qp, rs_spec, x0)
    b = randomized_policy(qp, rs_spec, x0)
    identical = np.array_equal(a.u0_mean, b.u0_mean)
    suite.record(
        "smoothing-determinism",
        identical,
        "repeated evaluation is bit-identical" if identical else "repeat differs",
    )

    outside = np.array(states[:3]) * 50.0
    projected = project_feasible(qp, outside)
    ok = True
    for z in projected:
        try:
            solve_qp(qp, z)
        except InfeasibleError:
            ok = False
    suite.record(
        "smoothing-projection-feasible",
        ok,
        "projected states solve cleanly" if ok else "a projected state stayed infeasible",
    )


def _verify_rollout(suite, spec, qp, rng, states):
    policy = BarrierPolicy(qp, BarrierConfig(eta=1e-2))
    traj = closed_loop(spec.sys, policy, np.asarray(states[0]), 10, state_set=spec.X, input_set=spec.U)
    worst = 0.0
    x = traj.states[0]
    for t in range(traj.n_steps):
        x = spec.sys.step(x, traj.inputs[t])
        worst = max(worst, float(np.abs(x - traj.states[t + 1]).max()))
    suite.record(
        "rollout-dynamics-replay",
        worst <= 1e-12,
        f"replay error {worst:.3g} over {traj.n_steps} steps",
    )
    suite.record(
        "rollout-barrier-feasibility",
        traj.n_violations == 0,
        f"{traj.n_violations} constraint violations",
    )

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "roundtrip.csv")
        export_dataset([traj], path)
        _, _, x_back, u_back, _ = load_dataset(path)
        exact = np.array_equal(x_back, traj.states[:-1]) and np.array_equal(
            u_back, traj.inputs
        )
    suite.record(
        "rollout-dataset-roundtrip",
        exact,
        "17-digit export parses back bit-exactly" if exact else "round trip drifted",
    )


def cmd_verify(args):
    spec, qp = load_run(args.problem)
    seed = resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    states = list(sample_initial_states(qp, spec.X, 15, seed=seed))
    suite = _CheckSuite()
    _verify_linalg(suite, rng)
    _verify_condense(suite, spec, qp, rng, states)
    _verify_explicit(suite, qp, rng, states)
    _verify_barrier(suite, spec, qp, rng, states)
    _verify_smoothing(suite, qp, rng, states)
    _verify_rollout(suite, spec, qp, rng, states)
    n_ok = sum(1 for _, ok, d in suite.results if ok and not d.startswith("skipped"))
    n_skip = sum(1 for _, _, d in suite.results if d.startswith("skipped"))
    print(f"{n_ok} ok, {suite.n_failed} failed, {n_skip} skipped")
    return 3 if suite.n_failed else 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = _Parser(
        prog="barrier-mpc",
        description="Smoothed model predictive control reproduction toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--problem", help="JSON problem file (default: built-in double integrator)")
        p.add_argument("--output-dir", default=".", help="directory for file outputs")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to BARRIER_MPC_SEED, then 0)")
        return p

    p = common(sub.add_parser("condense", help="write the dense QP matrices"))
    p.set_defaults(func=cmd_condense)

    p = common(sub.add_parser("solve", help="smoothed minimizer at one state"))
    p.add_argument("--eta", type=float, required=True, help="barrier weight")
    p.add_argument("--x0", required=True, help="comma-separated state")
    p.add_argument("--newton-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_solve)

    p = common(sub.add_parser("explicit", help="exact minimizer at one state"))
    p.add_argument("--x0", required=True, help="comma-separated state")
    p.set_defaults(func=cmd_explicit)

    p = common(sub.add_parser("pieces", help="affine-piece census over a state grid"))
    p.add_argument("--grid", type=int, default=100, help="points per state axis")
    p.add_argument("--frac", type=float, default=1.0, help="fraction of the state box to span")
    p.add_argument("--out", help="also write the CSV here")
    p.set_defaults(func=cmd_pieces)

    p = common(sub.add_parser("rs-solve", help="Monte Carlo smoothed input at one state"))
    p.add_argument("--dist", choices=list(DISTRIBUTIONS), default="gaussian")
    p.add_argument("--eps", type=float, required=True, help="noise scale")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--x0", required=True, help="comma-separated state")
    p.add_argument("--jacobian", action="store_true", help="also print the smoothed Jacobian")
    p.set_defaults(func=cmd_rs_solve)

    p = common(sub.add_parser("rollout", help="one closed-loop run"))
    p.add_argument("--policy", choices=["barrier", "rs", "explicit"], default="barrier")
    p.add_argument("--eta", type=float, default=1e-2)
    p.add_argument("--dist", choices=list(DISTRIBUTIONS), default="gaussian")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--x0", required=True, help="comma-separated initial state")
    p.add_argument("--steps", type=int, default=20)
    p.set_defaults(func=cmd_rollout)

    p = common(sub.add_parser("sweep", help="smoothness estimates over a parameter range"))
    p.add_argument("--etas", help="barrier range, start:stop:logN or comma list")
    p.add_argument("--eps", help="randomized range, start:stop:logN or comma list")
    p.add_argument("--grid", type=int, default=25, help="points per state axis")
    p.add_argument("--frac", type=float, default=1.0, help="fraction of the state box to span")
    p.add_argument("--dirs", type=int, default=2, help="random probe directions beyond the axes")
    p.add_argument("--h-frac", type=float, default=1e-4, help="step as a fraction of the grid extent")
    p.add_argument(
        "--h-param-frac",
        type=float,
        default=None,
        help="step as a fraction of the swept parameter instead "
        "(default 0.05 for --eps sweeps, 0 for --etas)",
    )
    p.add_argument("--samples", type=int, default=300, help="noise draws per randomized evaluation")
    p.add_argument("--dist", choices=list(DISTRIBUTIONS), default="gaussian")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("bounds", help="certified constants of the smoothed policy"))
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--x0", help="comma-separated state (default: origin)")
    p.add_argument("--grid", type=int, default=9, help="census resolution for the gain hull")
    p.add_argument("--frac", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds)

    p = common(sub.add_parser("verify", help="run the module invariant suites"))
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("export-dataset", help="batch rollouts for imitation training"))
    p.add_argument("--policy", choices=["barrier", "rs", "explicit"], default="barrier")
    p.add_argument("--eta", type=float, default=1e-2)
    p.add_argument("--dist", choices=list(DISTRIBUTIONS), default="gaussian")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--n-traj", type=int, default=50)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--frac", type=float, default=0.8, help="initial-state box fraction")
    p.add_argument("--out", help="dataset path (default: <output-dir>/dataset.csv)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_export_dataset)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        InfeasibleError,
        OutsideDomainError,
        CyclingGuardError,
        DegenerateActiveSetError,
        PolicyFailure,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
