"""Command line front end: batch solves and self-verification.

Two subcommands:

``switchopt run``      solve a named (or user-supplied) problem with the
                       relaxed-embedding path, the mode-insertion baseline,
                       or both, and write plot-ready artifacts:
                       trajectory.csv, schedule.csv, summary.json, and a
                       comparison.json when both methods run.

``switchopt verify``   run the built-in invariant and property checks and
                       print a pass/fail table (``full`` adds the
                       brute-force enumeration oracle).

Configuration is a flat JSON file plus command-line flags; flags win.
Unknown config keys are rejected by name.  Runs are deterministic: the
same configuration and seed reproduce byte-identical summaries up to the
wall-clock timing block.  The ``SWITCHOPT_WORKERS`` environment variable
caps the worker fan-out of parallelizable loops (candidate scans in the
insertion baseline).
"""

from __future__ import annotations

import argparse
import importlib.util
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import bench, encoding, extract, mig, problem as prob, solver, transcribe
from .embed import EmbeddedSystem
from .exceptions import ConfigError, SwitchOptError

_FLOAT_FMT = "%.17g"


@dataclass
class RunConfig:
    problem: str = "three-tank"  # benchmark name or path to a problem module
    method: str = "meocp"  # meocp | mig | both
    nodes: int = 200
    scheme: str = "trapezoidal"
    alpha: float | None = None  # None -> problem default
    beta: float | None = None
    dt: float = 0.01
    grid: int = 100
    tf: float | None = None
    x0: list | None = None
    out: str = "results"
    seed: int = 0
    workers: int = 1
    resim_steps: int = 50
    # Solver overrides (config-file keys; None keeps the solver defaults).
    outer_iters: int | None = None
    inner_iters: int | None = None
    defect_tol: float | None = None
    stationarity_tol: float | None = None
    max_insertions: int | None = None

    def echo(self) -> dict:
        return asdict(self)


_KNOWN_KEYS = {f.name for f in fields(RunConfig)}


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge a JSON config file with flag overrides; flags win."""
    data: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a flat JSON object")
    for key in data:
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    for key in data:
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    cfg = RunConfig(**data)
    if cfg.method not in ("meocp", "mig", "both"):
        raise ConfigError(f"unknown method {cfg.method!r}")
    if cfg.scheme not in ("trapezoidal", "hermite-simpson"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    env_workers = os.environ.get("SWITCHOPT_WORKERS")
    if env_workers is not None and "workers" not in overrides:
        cfg.workers = int(env_workers)
    return cfg


def _load_problem(cfg: RunConfig):
    """Benchmark by name, or a Python file exporting ``make_problem()``."""
    if cfg.problem in bench.BENCHMARKS:
        return bench.get_benchmark(
            cfg.problem, x0=cfg.x0, tf=cfg.tf, alpha=cfg.alpha, beta=cfg.beta
        )
    path = Path(cfg.problem)
    if not path.exists():
        raise ConfigError(
            f"unknown problem {cfg.problem!r}: not a benchmark name "
            f"({', '.join(bench.BENCHMARKS)}) and no such file"
        )
    spec = importlib.util.spec_from_file_location("switchopt_user_problem", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not hasattr(module, "make_problem"):
        raise ConfigError(f"problem module {path} must define make_problem()")
    made = module.make_problem()
    if not isinstance(made, tuple) or len(made) != 2:
        raise ConfigError(
            "make_problem() must return (SwitchedProblem, EmbeddingConfig)"
        )
    return made


def _solver_config(cfg: RunConfig) -> solver.SolverConfig:
    kwargs = {}
    if cfg.outer_iters is not None:
        kwargs["outer_iters_max"] = cfg.outer_iters
    if cfg.inner_iters is not None:
        kwargs["inner_iters_max"] = cfg.inner_iters
    if cfg.defect_tol is not None:
        kwargs["defect_tol"] = cfg.defect_tol
    if cfg.stationarity_tol is not None:
        kwargs["stationarity_tol"] = cfg.stationarity_tol
    return solver.SolverConfig(**kwargs)


# ---------------------------------------------------------------------------
# Artifact writers
# ---------------------------------------------------------------------------


def _write_trajectory_csv(path, times, x, v, q, running):
    n, b = x.shape[1], v.shape[1]
    header = (
        "t,"
        + ",".join(f"x{i}" for i in range(n))
        + ","
        + ",".join(f"v{i}" for i in range(b))
        + ",q,running_cost"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for j in range(times.size):
            row = [_FLOAT_FMT % times[j]]
            row += [_FLOAT_FMT % val for val in x[j]]
            row += [_FLOAT_FMT % val for val in v[j]]
            row.append(str(int(q[j])))
            row.append(_FLOAT_FMT % running[j])
            fh.write(",".join(row) + "\n")


def _write_schedule_csv(path, schedule):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tau_start,tau_end,q\n")
        for k, q in enumerate(schedule.modes):
            fh.write(
                f"{_FLOAT_FMT % schedule.times[k]},"
                f"{_FLOAT_FMT % schedule.times[k + 1]},{q}\n"
            )


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _running_cost_rows(problem, times, x, q):
    out = np.empty(times.size)
    for j in range(times.size):
        u = np.zeros(problem.control_dim)
        out[j] = prob.eval_running_cost(problem, int(q[j]), times[j], x[j], u)
    return out


# ---------------------------------------------------------------------------
# Method drivers
# ---------------------------------------------------------------------------


def _run_meocp(problem, emb_cfg, cfg: RunConfig):
    sys_ = EmbeddedSystem(problem=problem, cfg=emb_cfg)
    mesh = transcribe.Mesh.uniform(problem.t0, problem.tf, cfg.nodes)
    t_start = time.perf_counter()
    sol = solver.solve_meocp(sys_, mesh, scheme=cfg.scheme, cfg=_solver_config(cfg))
    wall = time.perf_counter() - t_start
    traj = extract.EmbeddedTrajectory.from_decision_vector(sol.nlp, sol.z)
    schedule = extract.extract_schedule(traj, emb_cfg)
    resim = prob.evaluate_schedule_cost(
        problem, schedule, steps_per_interval=cfg.resim_steps
    )
    # One CSV row per mesh node; interval quantities repeat on the last row.
    q_int = extract.round_nodes(traj.v, emb_cfg)
    q_nodes = np.append(q_int, q_int[-1])
    v_nodes = np.vstack([traj.v, traj.v[-1]])
    summary = {
        "problem": cfg.problem,
        "method": "meocp",
        "objective": sol.result.objective,
        "penalty_residual": sol.nlp.penalty_integral(sol.z),
        "bang_bang_fraction": extract.bang_bang_fraction(traj, eps=0.01),
        "resimulated_cost": resim,
        "solver_status": sol.result.status,
        "defect_norm": sol.result.defect_norm,
        "q_values": sorted({int(q) for q in schedule.modes}),
        "switch_count": len(schedule.modes) - 1,
    }
    artifacts = {
        "trajectory": (
            traj.times,
            traj.x,
            v_nodes,
            q_nodes,
            _running_cost_rows(problem, traj.times, traj.x, q_nodes),
        ),
        "schedule": schedule,
    }
    return summary, artifacts, wall


def _run_mig(problem, cfg: RunConfig):
    mig_cfg = mig.MigConfig(
        dt=cfg.dt,
        grid_count=cfg.grid,
        workers=cfg.workers,
        **(
            {"max_insertions": cfg.max_insertions}
            if cfg.max_insertions is not None
            else {}
        ),
    )
    t_start = time.perf_counter()
    result = mig.mig_solve(problem, mig_cfg)
    wall = time.perf_counter() - t_start
    times, states = prob.simulate_schedule(problem, result.schedule, dt=cfg.dt)
    q_rows = np.array([result.schedule.mode_at(t) for t in times])
    b = encoding.num_bits(problem.mode_count)
    v_rows = np.array([encoding.encode(q, b) for q in q_rows], dtype=float)
    summary = {
        "problem": cfg.problem,
        "method": "mig",
        "objective": result.cost,
        "penalty_residual": 0.0,
        "bang_bang_fraction": 1.0,
        "resimulated_cost": result.cost,
        "solver_status": "converged",
        "insertions": result.insertions,
        "cost_trace": result.trace,
        "q_values": sorted({int(q) for q in result.schedule.modes}),
        "switch_count": len(result.schedule.modes) - 1,
    }
    artifacts = {
        "trajectory": (
            times,
            states,
            v_rows,
            q_rows,
            _running_cost_rows(problem, times, states, q_rows),
        ),
        "schedule": result.schedule,
    }
    return summary, artifacts, wall


def run(cfg: RunConfig) -> dict:
    """Execute a configured run; returns the paths of written artifacts."""
    problem, emb_cfg = _load_problem(cfg)
    diags = prob.validate(problem)
    if diags:
        raise ConfigError("invalid problem: " + "; ".join(diags))
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    paths: dict = {}

    def emit(name, writer, *args):
        path = out_dir / name
        writer(path, *args)
        written.append(path)
        paths[name] = path

    try:
        results = {}
        if cfg.method in ("meocp", "both"):
            results["meocp"] = _run_meocp(problem, emb_cfg, cfg)
        if cfg.method in ("mig", "both"):
            results["mig"] = _run_mig(problem, cfg)

        primary = "meocp" if "meocp" in results else "mig"
        summary, artifacts, wall = results[primary]
        summary["config"] = cfg.echo()
        summary["timing"] = {"wall_time_s": wall}
        emit("trajectory.csv", _write_trajectory_csv, *artifacts["trajectory"])
        emit("schedule.csv", _write_schedule_csv, artifacts["schedule"])
        emit("summary.json", _write_json, summary)
        if cfg.method == "both":
            mig_summary, mig_artifacts, mig_wall = results["mig"]
            comparison = {
                "problem": cfg.problem,
                "meocp": {
                    "cost": results["meocp"][0]["resimulated_cost"],
                    "objective": results["meocp"][0]["objective"],
                    "status": results["meocp"][0]["solver_status"],
                },
                "mig": {
                    "cost": mig_summary["objective"],
                    "insertions": mig_summary["insertions"],
                },
                "timing": {
                    "meocp_wall_s": results["meocp"][2],
                    "mig_wall_s": mig_wall,
                },
                "config": cfg.echo(),
            }
            emit("mig_schedule.csv", _write_schedule_csv, mig_artifacts["schedule"])
            emit("comparison.json", _write_json, comparison)
        return paths
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


# ---------------------------------------------------------------------------
# Verification suite
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _toy_system(seed: int = 0) -> EmbeddedSystem:
    """Small smooth 3-mode, 2-state system for derivative and concavity checks."""
    rng = np.random.default_rng(seed)
    mats = [rng.normal(size=(2, 2)) * 0.5 for _ in range(3)]
    offs = [rng.normal(size=2) * 0.3 for _ in range(3)]

    def make_f(A, c):
        def f(t, x, u):
            x = np.asarray(x, dtype=float)
            base = x @ A.T + np.sin(x) * 0.1 + c
            return base

        return f

    def make_l(w):
        def l(t, x, u):
            x = np.asarray(x, dtype=float)
            return np.sum(x**2, axis=-1) * w + np.sum(np.cos(x), axis=-1) * 0.05

        return l

    problem = prob.SwitchedProblem(
        mode_count=3,
        state_dim=2,
        control_dim=0,
        dynamics=[make_f(A, c) for A, c in zip(mats, offs)],
        running_costs=[make_l(w) for w in (1.0, 1.3, 0.7)],
        t0=0.0,
        tf=1.0,
        x0=np.array([0.4, -0.2]),
        batched=True,
        name="toy",
    )
    cfg = encoding.EmbeddingConfig.for_modes(3, alpha=0.8, beta=0.6)
    return EmbeddedSystem(problem=problem, cfg=cfg)


def _fd_gradient(fn, z, step=1e-6):
    g = np.empty_like(z)
    for i in range(z.size):
        s = step * (1.0 + abs(z[i]))
        hi, lo = z.copy(), z.copy()
        hi[i] += s
        lo[i] -= s
        g[i] = (fn(hi) - fn(lo)) / (hi[i] - lo[i])
    return g


def _rel_err(a, b):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


def check_partition_of_unity(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for b in (1, 2, 3, 4):
        v = rng.uniform(size=(1000, b))
        s = encoding.vertex_weights(v, b).sum(axis=1)
        worst = max(worst, float(np.max(np.abs(s - 1.0))))
    ok = worst <= 1e-12
    return ok, f"max |sum V_k - 1| = {worst:.3e}"


def check_vertex_selection(seed=0):
    for b in (1, 2, 3, 4):
        for k in range(2**b):
            w = encoding.vertex_weights(encoding.encode(k, b).astype(float), b)
            expected = np.zeros(2**b)
            expected[k] = 1.0
            if not np.array_equal(w, expected):
                return False, f"vertex weights not exact at b={b}, k={k}"
    return True, "one-hot at every vertex, exactly"


def check_penalty_signs(seed=0):
    rng = np.random.default_rng(seed)
    for M in (3, 4, 5):
        cfg = encoding.EmbeddingConfig.for_modes(M, alpha=1.0, beta=1.0)
        b = cfg.bit_count
        for q in range(M):
            if abs(encoding.penalty(encoding.encode(q, b).astype(float), cfg)) != 0.0:
                return False, f"penalty nonzero on valid vertex q={q}, M={M}"
        for k in range(M, 2**b):
            if encoding.penalty(encoding.encode(k, b).astype(float), cfg) <= 0.0:
                return False, f"penalty not positive on invalid vertex k={k}, M={M}"
        v = np.clip(rng.uniform(0.05, 0.95, size=(200, b)), 0.0, 1.0)
        if np.min(encoding.penalty(v, cfg)) <= 0.0:
            return False, f"penalty not positive on fractional points, M={M}"
    return True, "zero exactly on valid vertices, positive elsewhere"


def check_encoding_gradients(seed=0, points=100):
    rng = np.random.default_rng(seed)
    cfg = encoding.EmbeddingConfig.for_modes(5, alpha=0.7, beta=0.9)
    worst = 0.0
    for _ in range(points):
        v = rng.uniform(0.05, 0.95, size=3)
        k = int(rng.integers(0, 8))
        g = encoding.vertex_weight_gradient(k, v)
        g_fd = _fd_gradient(lambda vv: encoding.vertex_weight(k, vv), v.copy())
        worst = max(worst, _rel_err(g, g_fd))
        gp = encoding.penalty_gradient(v, cfg)
        gp_fd = _fd_gradient(lambda vv: encoding.penalty(vv, cfg), v.copy())
        worst = max(worst, _rel_err(gp, gp_fd))
    ok = worst <= 1e-6
    return ok, f"max rel err vs finite differences = {worst:.3e}"


def check_embedding_gradients(seed=0, points=50):
    from . import embed as emb

    sys_ = _toy_system(seed)
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(points):
        x = rng.uniform(-1, 1, size=2)
        U = rng.uniform(0.05, 0.95, size=sys_.aug_control_dim)
        t = float(rng.uniform(0, 1))
        fe_x, fe_U, le_x, le_U = emb.jacobians(sys_, t, x, U)
        for i in range(2):
            g_fd = _fd_gradient(
                lambda xx, _i=i: emb.embedded_dynamics(sys_, t, xx, U)[_i], x.copy()
            )
            worst = max(worst, _rel_err(fe_x[i], g_fd))
        g_fd = _fd_gradient(
            lambda UU: emb.embedded_running_cost(sys_, t, x, UU), U.copy()
        )
        worst = max(worst, _rel_err(le_U, g_fd))
    ok = worst <= 1e-6
    return ok, f"max rel err vs finite differences = {worst:.3e}"


def check_nlp_gradients(seed=0):
    sys_ = _toy_system(seed)
    rng = np.random.default_rng(seed + 2)
    worst = 0.0
    for scheme in ("trapezoidal", "hermite-simpson"):
        nlp = transcribe.build_nlp(sys_, transcribe.Mesh.uniform(0.0, 1.0, 8), scheme)
        z = nlp.initial_guess()
        z += rng.uniform(-0.2, 0.2, size=z.size)
        x, u, v = nlp.unpack(z)
        z = nlp.pack(x, u, np.clip(v, 0.1, 0.9))
        g = nlp.objective_gradient(z)
        g_fd = _fd_gradient(nlp.objective, z.copy())
        worst = max(worst, _rel_err(g, g_fd))
        jac = nlp.defect_jacobian(z).toarray()
        for r in range(0, nlp.constraint_count, 5):
            row_fd = _fd_gradient(lambda zz, _r=r: nlp.defects(zz)[_r], z.copy())
            worst = max(worst, _rel_err(jac[r], row_fd))
    ok = worst <= 1e-6
    return ok, f"max rel err vs finite differences = {worst:.3e}"


def check_hamiltonian_concavity(seed=0, samples=1000):
    from . import embed as emb

    sys_ = _toy_system(seed)
    rng = np.random.default_rng(seed + 3)
    worst = -np.inf
    b = sys_.bit_count
    for _ in range(samples):
        t = float(rng.uniform(0, 1))
        x = rng.uniform(-1, 1, size=2)
        p = rng.uniform(-2, 2, size=2)
        v = rng.uniform(size=b)
        i = int(rng.integers(0, b))
        va, vb = rng.uniform(size=2)

        def H(vi):
            vv = v.copy()
            vv[i] = vi
            return emb.hamiltonian(sys_, t, x, p, vv)

        gap = 0.5 * (H(va) + H(vb)) - H(0.5 * (va + vb))
        worst = max(worst, gap)
    ok = worst <= 1e-10
    return ok, f"max concavity violation = {worst:.3e}"


def check_quadrature_orders(seed=0):
    ok_rk4, slope_rk4 = _measure_rk4_order()
    ok_trapz, slope_trapz = _measure_trapz_order()
    ok = ok_rk4 and ok_trapz
    return ok, f"rk4 slope = {slope_rk4:.2f}, trapezoid slope = {slope_trapz:.2f}"


def _single_mode_pair():
    """Two identical smooth modes so the embedding reduces to one field."""

    def f(t, x, u):
        x = np.asarray(x, dtype=float)
        return -x + 0.25 * np.sin(x)

    def l(t, x, u):
        x = np.asarray(x, dtype=float)
        return np.sum(x**2, axis=-1)

    return prob.SwitchedProblem(
        mode_count=2,
        state_dim=1,
        control_dim=0,
        dynamics=[f, f],
        running_costs=[l, l],
        t0=0.0,
        tf=1.0,
        x0=np.array([1.0]),
        batched=True,
        name="smooth-single",
    )


def _measure_rk4_order():
    problem = _single_mode_pair()
    errs = []
    steps_list = (8, 16, 32, 64)
    ref_sched = prob.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
    _, ref = prob.simulate_schedule(problem, ref_sched, steps_per_interval=4096)
    x_ref = ref[-1]
    for steps in steps_list:
        _, xs = prob.simulate_schedule(problem, ref_sched, steps_per_interval=steps)
        errs.append(abs(float(xs[-1][0] - x_ref[0])))
    slope = -np.polyfit(np.log(steps_list), np.log(errs), 1)[0]
    return abs(slope - 4.0) <= 0.3, slope


def _measure_trapz_order():
    problem = _single_mode_pair()
    cfg = encoding.EmbeddingConfig.for_modes(2, alpha=0.5)
    sys_ = EmbeddedSystem(problem=problem, cfg=cfg)
    sched = prob.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
    ref_cost = prob.evaluate_schedule_cost(problem, sched, steps_per_interval=8192)
    # One fine simulation whose grid contains every mesh below.
    times, xs = prob.simulate_schedule(problem, sched, steps_per_interval=4096)
    errs = []
    nodes_list = (8, 16, 32, 64)
    for n_int in nodes_list:
        nlp = transcribe.build_nlp(sys_, transcribe.Mesh.uniform(0.0, 1.0, n_int))
        # Sample the accurate trajectory on the mesh; bits sit at mode 0.
        x_mesh = np.interp(nlp.mesh.times, times, xs[:, 0])[:, None]
        u = np.zeros((nlp.N, 2, 0))
        v = np.zeros((nlp.N, 1))
        z = nlp.pack(x_mesh, u, v)
        errs.append(abs(nlp.objective(z) - ref_cost))
    slope = -np.polyfit(np.log(nodes_list), np.log(errs), 1)[0]
    return abs(slope - 2.0) <= 0.2, slope


def check_brute_force_oracle(seed=0):
    """Tiny two-mode instance: relaxed solve vs exhaustive enumeration."""
    problem = _tiny_two_mode_problem()
    cfg = encoding.EmbeddingConfig.for_modes(2, alpha=0.05)
    sys_ = EmbeddedSystem(problem=problem, cfg=cfg)
    mesh = transcribe.Mesh.uniform(problem.t0, problem.tf, 60)
    sol = solver.solve_meocp(sys_, mesh, cfg=solver.SolverConfig())
    traj = extract.EmbeddedTrajectory.from_decision_vector(sol.nlp, sol.z)
    schedule = extract.extract_schedule(traj, cfg)
    got = prob.evaluate_schedule_cost(problem, schedule, steps_per_interval=50)
    best = brute_force_best_cost(problem, intervals=6, steps_per_interval=50)
    ok = got <= best * 1.01 + 1e-9
    return ok, f"extracted cost {got:.6f} vs enumerated best {best:.6f}"


def _tiny_two_mode_problem():
    def f0(t, x, u):
        return -np.asarray(x, dtype=float)

    def f1(t, x, u):
        x = np.asarray(x, dtype=float)
        return -2.0 * x + 1.0

    def l(t, x, u):
        x = np.asarray(x, dtype=float)
        return np.sum(x**2, axis=-1)

    return prob.SwitchedProblem(
        mode_count=2,
        state_dim=1,
        control_dim=0,
        dynamics=[f0, f1],
        running_costs=[l, l],
        t0=0.0,
        tf=1.0,
        x0=np.array([1.0]),
        batched=True,
        name="tiny-two-mode",
    )


def brute_force_best_cost(problem, intervals: int, steps_per_interval: int = 50):
    """Exhaustive minimum over all mode sequences on a uniform grid."""
    times = np.linspace(problem.t0, problem.tf, intervals + 1)
    best = np.inf
    for code in range(problem.mode_count**intervals):
        modes = []
        c = code
        for _ in range(intervals):
            modes.append(c % problem.mode_count)
            c //= problem.mode_count
        sched = prob.SwitchSchedule(modes=modes, times=times)
        cost = prob.evaluate_schedule_cost(
            problem, sched, steps_per_interval=steps_per_interval
        )
        best = min(best, cost)
    return best


FAST_CHECKS = [
    ("partition-of-unity", check_partition_of_unity),
    ("vertex-selection", check_vertex_selection),
    ("penalty-signs", check_penalty_signs),
    ("encoding-gradients", check_encoding_gradients),
    ("embedding-gradients", check_embedding_gradients),
    ("nlp-gradients", check_nlp_gradients),
    ("hamiltonian-concavity", check_hamiltonian_concavity),
    ("quadrature-orders", check_quadrature_orders),
]

FULL_CHECKS = FAST_CHECKS + [
    ("brute-force-oracle", check_brute_force_oracle),
]


def run_checks(checks, seed: int = 0, stream=None) -> list:
    """Run named checks and print a pass/fail table."""
    stream = stream or sys.stdout
    results = []
    width = max(len(name) for name, _ in checks) + 2
    for name, fn in checks:
        try:
            passed, detail = fn(seed)
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, detail))
        status = "PASS" if passed else "FAIL"
        stream.write(f"{status}  {name:<{width}} {detail}\n")
    return results


def verify(suite: str = "fast", seed: int = 0, stream=None) -> bool:
    checks = FAST_CHECKS if suite == "fast" else FULL_CHECKS
    results = run_checks(checks, seed=seed, stream=stream)
    return all(r.passed for r in results)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchopt",
        description="Switched optimal control via binary mode embedding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve a problem and write artifacts")
    p_run.add_argument("--config", default=None, help="JSON config file")
    p_run.add_argument("--problem", default=None)
    p_run.add_argument("--method", default=None, choices=["meocp", "mig", "both"])
    p_run.add_argument("--nodes", type=int, default=None)
    p_run.add_argument(
        "--scheme", default=None, choices=["trapezoidal", "hermite-simpson"]
    )
    p_run.add_argument("--alpha", type=float, default=None)
    p_run.add_argument("--beta", type=float, default=None)
    p_run.add_argument("--dt", type=float, default=None)
    p_run.add_argument("--grid", type=int, default=None)
    p_run.add_argument("--tf", type=float, default=None)
    p_run.add_argument("--x0", default=None, help="comma-separated initial state")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)

    p_verify = sub.add_parser("verify", help="run the built-in property checks")
    p_verify.add_argument("suite", nargs="?", default="fast", choices=["fast", "full"])
    p_verify.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            overrides = {
                "problem": args.problem,
                "method": args.method,
                "nodes": args.nodes,
                "scheme": args.scheme,
                "alpha": args.alpha,
                "beta": args.beta,
                "dt": args.dt,
                "grid": args.grid,
                "tf": args.tf,
                "x0": (
                    [float(s) for s in args.x0.split(",")]
                    if args.x0 is not None
                    else None
                ),
                "out": args.out,
                "seed": args.seed,
            }
            cfg = load_config(args.config, overrides)
            paths = run(cfg)
            for name, path in paths.items():
                print(f"wrote {path}")
            return 0
        if args.command == "verify":
            ok = verify(args.suite, seed=args.seed)
            return 0 if ok else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SwitchOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
