"""Augmented-Lagrangian solver for the transcribed box-constrained NLP.

Outer loop: classic method of multipliers on the equality defects,
    merit(z) = objective(z) + lambda^T c(z) + (rho / 2) ||c(z)||^2,
with multiplier updates ``lambda += rho * c`` after inner solves that
reduce the constraint norm enough, and a tenfold penalty increase when
they do not.

Inner loop: projected gradient on the box, with a Barzilai-Borwein
spectral step as the trial length and monotone Armijo backtracking along
the projected arc.  Accepted steps never increase the merit function, and
the whole solve is deterministic for fixed inputs and configuration.

The high-level :func:`solve_meocp` driver adds two remedies for the local
minima the concave switching penalty creates at every hypercube vertex:
a continuation sweep over the fractionality weight (solving with the
user's weight scaled by 0.1, 0.5, 1.0, warm-starting each stage), and a
deterministic perturbation that nudges bits stuck at the 0.5 stationary
point before the final stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import numpy as np

from . import encoding
from .exceptions import ConfigError
from .transcribe import Mesh, NlpProblem, build_nlp


@dataclass(frozen=True)
class SolverConfig:
    outer_iters_max: int = 30
    inner_iters_max: int = 500
    penalty_initial: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e6
    constraint_decrease: float = 0.25
    defect_tol: float = 1e-6
    stationarity_tol: float = 1e-5
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 40
    bb_step_min: float = 1e-10
    bb_step_max: float = 1e8
    continuation_stages: tuple = (0.1, 0.5, 1.0)
    tie_break_step: float = 1e-3
    # A feasible iterate whose objective moves less than this (relative)
    # over consecutive outer iterations ends the solve early.
    stagnation_tol: float = 1e-9
    stagnation_outers: int = 3
    record_inner: bool = False

    def __post_init__(self):
        if min(self.defect_tol, self.stationarity_tol) <= 0:
            raise ConfigError("tolerances must be positive")
        if self.penalty_growth <= 1:
            raise ConfigError("penalty growth factor must exceed 1")


@dataclass
class SolveResult:
    z: np.ndarray
    objective: float
    defect_norm: float
    stationarity: float
    status: str  # converged | max-iters | line-search-failure | diverged
    trace: list = field(default_factory=list)
    inner_merits: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def project_box(z, lo, hi) -> np.ndarray:
    """Componentwise clamp onto ``[lo, hi]``; idempotent."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ConfigError("box has lo > hi in some component")
    return np.minimum(np.maximum(np.asarray(z, dtype=float), lo), hi)


def _merit_and_parts(nlp, z, lam, rho):
    ev = nlp.eval_all(z, order=0)
    c = ev.defects
    merit = ev.objective + lam @ c + 0.5 * rho * (c @ c)
    return merit, ev.objective, c


def _merit_gradient(nlp, z, lam, rho):
    ev = nlp.eval_all(z, order=1)
    c = ev.defects
    merit = ev.objective + lam @ c + 0.5 * rho * (c @ c)
    grad = ev.gradient + ev.jacobian.T @ (lam + rho * c)
    return merit, grad, ev.objective, c, ev.jacobian


def solve(
    nlp: NlpProblem,
    cfg: SolverConfig = SolverConfig(),
    z_init=None,
    trace_sink=None,
) -> SolveResult:
    """Minimize the transcribed objective subject to defects and the box.

    ``trace_sink`` may be a callable or a file-like object; it receives one
    formatted line per outer iteration.
    """
    lo, hi = nlp.lb, nlp.ub
    z = project_box(
        nlp.initial_guess() if z_init is None else np.array(z_init, dtype=float),
        lo,
        hi,
    )
    lam = np.zeros(nlp.constraint_count)
    rho = cfg.penalty_initial
    trace = []
    inner_merits = []
    status = "max-iters"
    prev_cnorm = np.inf
    stationarity = np.inf
    obj = math.inf
    cnorm = math.inf
    stagnant = 0

    for outer in range(cfg.outer_iters_max):
        # Loose subproblem tolerance early on, tightening geometrically.
        inner_tol = max(cfg.stationarity_tol, 1e-2 * 0.3**outer)
        z, stationarity, inner_status, merits = _inner_projected_gradient(
            nlp, z, lam, rho, cfg, inner_tol
        )
        if cfg.record_inner:
            inner_merits.append(merits)
        ev = nlp.eval_all(z, order=0)
        prev_obj = obj
        obj, c = ev.objective, ev.defects
        cnorm = float(np.max(np.abs(c))) if c.size else 0.0
        trace.append(
            {
                "outer": outer,
                "objective": obj,
                "defect_norm": cnorm,
                "rho": rho,
                "stationarity": stationarity,
                "inner_status": inner_status,
            }
        )
        if trace_sink is not None:
            line = (
                f"outer {outer:3d}  obj {obj: .8e}  defect {cnorm: .3e}  "
                f"rho {rho: .1e}  stat {stationarity: .3e}\n"
            )
            sink = getattr(trace_sink, "write", trace_sink)
            sink(line)
        if inner_status == "diverged":
            status = "diverged"
            break
        if cnorm <= cfg.defect_tol and stationarity <= cfg.stationarity_tol:
            status = "converged"
            break
        if (
            inner_status == "line-search-failure"
            and stationarity > 10 * cfg.stationarity_tol
            and rho >= cfg.penalty_max
        ):
            status = "line-search-failure"
            break
        # Feasible but no longer moving: spend the budget elsewhere.
        if cnorm <= cfg.defect_tol and np.isfinite(prev_obj):
            if abs(prev_obj - obj) <= cfg.stagnation_tol * (1.0 + abs(obj)):
                stagnant += 1
                if stagnant >= cfg.stagnation_outers:
                    break
            else:
                stagnant = 0
        if cnorm <= max(cfg.defect_tol, cfg.constraint_decrease * prev_cnorm):
            lam = lam + rho * c
            prev_cnorm = cnorm
        else:
            rho = min(rho * cfg.penalty_growth, cfg.penalty_max)
            # Over-penalization freezes progress; keep multipliers moving too
            # once the penalty is capped.
            if rho >= cfg.penalty_max:
                lam = lam + rho * c
                prev_cnorm = cnorm
    return SolveResult(z, obj, cnorm, stationarity, status, trace, inner_merits)


def _curvature_scaling(jac, rho) -> np.ndarray:
    """Per-variable diagonal of ``rho * J^T J``, floored at one.

    Scaling the gradient step by this diagonal tames the mesh-induced
    ill-conditioning of the quadratic constraint penalty.
    """
    colsq = np.asarray(jac.multiply(jac).sum(axis=0)).ravel()
    return 1.0 + rho * colsq


def _inner_projected_gradient(nlp, z, lam, rho, cfg, tol):
    """Diagonally scaled spectral projected gradient with monotone Armijo."""
    lo, hi = nlp.lb, nlp.ub
    merit, grad, _, _, jac = _merit_gradient(nlp, z, lam, rho)
    merits = [merit]
    if not np.isfinite(merit):
        return z, np.inf, "diverged", merits
    diag = _curvature_scaling(jac, rho)
    step = 1.0
    status = "stationary"
    stall_window = 30
    for it in range(cfg.inner_iters_max):
        pg = z - project_box(z - grad, lo, hi)
        pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
        if pg_norm <= tol:
            status = "stationary"
            break
        direction = grad / diag
        t = float(np.clip(step, cfg.bb_step_min, cfg.bb_step_max))
        accepted = False
        for _bt in range(cfg.max_backtracks):
            z_trial = project_box(z - t * direction, lo, hi)
            dz = z_trial - z
            gd = float(grad @ dz)
            if gd >= 0.0:
                break
            merit_trial, _, _ = _merit_and_parts(nlp, z_trial, lam, rho)
            if np.isfinite(merit_trial) and merit_trial <= merit + cfg.armijo_c1 * gd:
                accepted = True
                break
            t *= cfg.backtrack_factor
        if not accepted:
            status = "line-search-failure"
            break
        merit_new, grad_new, _, _, jac = _merit_gradient(nlp, z_trial, lam, rho)
        s = z_trial - z
        y = grad_new - grad
        sy = float(s @ y)
        if sy > 1e-30:
            # BB1 step in the metric induced by the diagonal scaling.
            step = float(s @ (diag * s)) / sy
        else:
            step = min(10.0 * t, cfg.bb_step_max)
        diag = _curvature_scaling(jac, rho)
        z, grad, merit = z_trial, grad_new, merit_new
        merits.append(merit)
        if merit < -1e100:
            return z, np.inf, "diverged", merits
        if (
            it >= stall_window
            and merits[-stall_window - 1] - merit
            <= 1e-13 * (1.0 + abs(merit))
        ):
            status = "stalled"
            break
    else:
        status = "max-inner-iters"
    pg = z - project_box(z - grad, lo, hi)
    return z, float(np.max(np.abs(pg))) if pg.size else 0.0, status, merits


# ---------------------------------------------------------------------------
# Reduced-space path: eliminate states through the defects, descend on the
# interval controls only
# ---------------------------------------------------------------------------


class _ReducedProblem:
    """States eliminated through the defect chain; controls stay boxed.

    The defect system is block bidiagonal in the node states, so for fixed
    interval controls the states follow from a damped global Newton march
    (warm-started across evaluations).  Objective gradients with respect to
    the controls come from the discrete adjoint recursion over the same
    blocks.  Eliminating the equality constraints removes the stiff
    quadratic-penalty valley that slows the full-space method on problems
    with neutrally stable dynamics.
    """

    def __init__(self, nlp: NlpProblem):
        self.nlp = nlp
        self.lb = nlp.lb[nlp.x_len :].copy()
        self.ub = nlp.ub[nlp.x_len :].copy()
        self._x_warm = None
        self._inv_dx1 = None  # cached block inverses for the modified Newton
        self._dx0 = None
        self.march_tol = 1e-10

    def initial_controls(self, z: np.ndarray) -> np.ndarray:
        x, u, v = self.nlp.unpack(z)
        self._x_warm = np.asarray(x, dtype=float).copy()
        return np.asarray(z[self.nlp.x_len :], dtype=float).copy()

    def _assemble(self, x, U_flat):
        z = np.empty(self.nlp.dim)
        z[: self.nlp.x_len] = x.ravel()
        z[self.nlp.x_len :] = U_flat
        return z

    def _refresh_blocks(self, x, U_flat):
        blk = self.nlp.eval_blocks(self._assemble(x, U_flat))
        self._inv_dx1 = np.linalg.inv(blk["Dx1"])
        self._dx0 = blk["Dx0"]
        return blk

    def _newton_sweep(self, c):
        """One block-bidiagonal Newton step from cached blocks."""
        nlp = self.nlp
        dx = np.zeros((nlp.J, nlp.n))
        for j in range(nlp.N):
            dx[j + 1] = self._inv_dx1[j] @ (-c[j] - self._dx0[j] @ dx[j])
        return dx

    def march(self, U_flat: np.ndarray):
        """Modified Newton on the stacked defects, warm-started.

        The defect Jacobian blocks are refreshed only when convergence
        slows; a sequential per-interval march is the robust fallback.
        Returns the node states and an order-0 evaluation there.
        """
        nlp = self.nlp
        x = (
            self._x_warm.copy()
            if self._x_warm is not None
            else np.tile(nlp.sys.problem.x0, (nlp.J, 1))
        )
        x[0] = nlp.sys.problem.x0
        if self._inv_dx1 is None:
            self._refresh_blocks(x, U_flat)
        refreshed = False
        cnorm_prev = np.inf
        for _ in range(40):
            ev = nlp.eval_all(self._assemble(x, U_flat), order=0)
            c = ev.defects.reshape(nlp.N, nlp.n)
            cnorm = float(np.max(np.abs(c)))
            if cnorm < self.march_tol:
                return x, ev
            if not np.isfinite(cnorm):
                break
            if cnorm > 0.5 * cnorm_prev:
                if refreshed:
                    break
                self._refresh_blocks(x, U_flat)
                refreshed = True
            cnorm_prev = cnorm
            x = x + self._newton_sweep(c)
        # Robust fallback: solve interval by interval.
        x = _march_states(nlp, U_flat.reshape(nlp.N, nlp.p))
        return x, nlp.eval_all(self._assemble(x, U_flat), order=0)

    def objective(self, U_flat: np.ndarray) -> float:
        from .exceptions import DivergenceError, EvaluationError

        try:
            x, ev = self.march(U_flat)
        except (DivergenceError, EvaluationError, np.linalg.LinAlgError):
            return np.inf
        self._x_warm = x
        return ev.objective

    def objective_gradient(self, U_flat: np.ndarray):
        """Objective, control gradient, and the assembled decision vector."""
        x, _ = self.march(U_flat)
        self._x_warm = x
        nlp = self.nlp
        blk = self._refresh_blocks(x, U_flat)
        Gx, GU = blk["Gx"], blk["GU"]
        Dx0, Dx1, DU = blk["Dx0"], blk["Dx1"], blk["DU"]
        mu = np.empty((nlp.N, nlp.n))
        rhs = -Gx[nlp.N]
        for j in range(nlp.N - 1, -1, -1):
            mu[j] = np.linalg.solve(Dx1[j].T, rhs)
            if j > 0:
                rhs = -Gx[j] - Dx0[j].T @ mu[j]
        grad = GU + np.einsum("jnp,jn->jp", DU, mu)
        return blk["objective"], grad.ravel(), self._assemble(x, U_flat)


def _solve_reduced_stage(nlp: NlpProblem, z_init: np.ndarray, cfg: SolverConfig,
                         max_iters: int | None = None,
                         trace_sink=None) -> SolveResult:
    """Quasi-Newton descent on the reduced (state-eliminated) problem.

    The reduced objective couples every interval's controls through the
    marched states, which conditions it far beyond what a first-order
    method handles in reasonable time; bound-constrained L-BFGS takes it
    to stationarity in a few hundred evaluations.
    """
    from scipy.optimize import minimize

    rp = _ReducedProblem(nlp)
    U0 = rp.initial_controls(z_init)
    budget = 2 * cfg.inner_iters_max if max_iters is None else max_iters

    def fun(U_flat):
        from .exceptions import DivergenceError, EvaluationError

        try:
            obj, grad, _ = rp.objective_gradient(U_flat)
        except (DivergenceError, EvaluationError, np.linalg.LinAlgError):
            return 1e20, np.zeros_like(U_flat)
        if not np.isfinite(obj):
            return 1e20, np.zeros_like(U_flat)
        return obj, grad

    res = minimize(
        fun,
        project_box(U0, rp.lb, rp.ub),
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(rp.lb, rp.ub)),
        options={
            "maxiter": budget,
            "maxfun": 4 * budget,
            "ftol": 1e-14,
            "gtol": 0.1 * cfg.stationarity_tol,
            "maxcor": 20,
        },
    )
    U = project_box(res.x, rp.lb, rp.ub)
    obj_final, grad, z = rp.objective_gradient(U)
    pg = U - project_box(U - grad, rp.lb, rp.ub)
    stat = float(np.max(np.abs(pg))) if pg.size else 0.0
    ev = nlp.eval_all(z, order=0)
    cnorm = float(np.max(np.abs(ev.defects)))
    solver_status = (
        "converged"
        if stat <= cfg.stationarity_tol and cnorm <= cfg.defect_tol
        else "max-iters"
    )
    trace = [{
        "outer": 0,
        "objective": obj_final,
        "defect_norm": cnorm,
        "rho": 0.0,
        "stationarity": stat,
        "inner_status": f"reduced:{res.status}:{res.nit}",
    }]
    if trace_sink is not None:
        sink = getattr(trace_sink, "write", trace_sink)
        sink(
            f"reduced  obj {obj_final: .8e}  defect {cnorm: .3e}  "
            f"stat {stat: .3e}  iters {res.nit}\n"
        )
    return SolveResult(z, obj_final, cnorm, stat, solver_status, trace)


# ---------------------------------------------------------------------------
# High-level relaxed-problem driver: continuation plus tie-break nudging
# ---------------------------------------------------------------------------


@dataclass
class MeocpSolution:
    """Final (bang-bang) solution plus the NLP stages that produced it."""

    nlp: NlpProblem
    result: SolveResult
    stage_results: list
    polish_costs: list = field(default_factory=list)

    @property
    def z(self) -> np.ndarray:
        return self.result.z

    @property
    def objective(self) -> float:
        return self.result.objective


def _nudge_half_bits(nlp: NlpProblem, z: np.ndarray, eps: float) -> np.ndarray:
    """Push bits resting at the 0.5 penalty stationary point.

    For each interval whose bit block contains a value within ``eps`` of
    0.5, the bit with the largest objective-gradient magnitude is moved by
    ``+eps`` so the next solve starts off the ridge.
    """
    g = nlp.objective_gradient(z)
    z = z.copy()
    vsl = slice(nlp.M * nlp.m, nlp.p)
    v = z[nlp.x_len :].reshape(nlp.N, nlp.p)[:, vsl]
    Gv = g[nlp.x_len :].reshape(nlp.N, nlp.p)[:, vsl]
    stuck = np.abs(v - 0.5) < eps
    rows = np.where(stuck.any(axis=1))[0]
    for j in rows:
        masked = np.where(stuck[j], np.abs(Gv[j]), -np.inf)
        i = int(np.argmax(masked))
        v[j, i] = min(1.0, v[j, i] + eps)
    return z


def _schedule_from_interval_modes(times: np.ndarray, q_int: np.ndarray):
    from .problem import SwitchSchedule

    modes = [int(q_int[0])]
    taus = [times[0]]
    for j in range(1, q_int.size):
        if q_int[j] != modes[-1]:
            modes.append(int(q_int[j]))
            taus.append(times[j])
    taus.append(times[-1])
    return SwitchSchedule(modes=modes, times=np.asarray(taus))


def _impulse_snap(nlp: NlpProblem, v: np.ndarray) -> np.ndarray:
    """Node-aligned interval modes preserving each activation's impulse.

    Fractional bits encode sub-interval activation durations; rounding
    intervals independently can double or erase a short activation.
    Instead, each contiguous stretch of positive mode weight is replaced
    by a whole number of mesh intervals matching its integrated weight,
    centered at its weight centroid.  Stretches are painted onto a mode-0
    canvas in decreasing order of integrated weight.
    """
    W = encoding.vertex_weights(np.clip(v, 0.0, 1.0), nlp.b)[:, : nlp.M]
    h = nlp.mesh.widths
    n_int = h.size
    # Integrated weight of mode k over each mesh interval.
    mass = h[:, None] * W
    q_int = np.zeros(n_int, dtype=int)
    claimed = np.zeros(n_int, dtype=bool)
    pulses = []
    thresh = 1e-3
    for k in range(1, nlp.M):
        active = mass[:, k] > thresh * h
        j = 0
        while j < n_int:
            if not active[j]:
                j += 1
                continue
            a = j
            while j < n_int and active[j]:
                j += 1
            seg = slice(a, j)
            impulse = float(mass[seg, k].sum())
            idx = np.arange(a, j)
            centroid = float((idx + 0.5) @ mass[seg, k] / impulse)
            pulses.append((impulse, k, centroid))
    for impulse, k, centroid in sorted(pulses, key=lambda p: -p[0]):
        width = int(round(impulse / float(np.mean(h))))
        if width == 0:
            continue
        start = int(np.clip(round(centroid - 0.5 * width), 0, n_int - width))
        sub = np.arange(start, start + width)[~claimed[start : start + width]]
        q_int[sub] = k
        claimed[sub] = True
    return q_int


class _SchedulePolisher:
    """Deterministic 1-opt descent over node-aligned interval modes.

    Every move repaints one mesh interval with one alternative mode and is
    scored by re-simulating the tail of the horizon from cached prefix
    states (RK4 sub-steps of roughly half an interval, trapezoidal running
    cost, terminal cost, and a large penalty for leaving the state box).
    The best strictly improving move is applied per sweep.  Repainting
    subsumes switch-edge shifts, pulse deletion, and the insertion of
    single-interval corrective activations.
    """

    def __init__(self, problem, times, substeps: int = 2, box_weight: float = 1e6):
        self.problem = problem
        self.times = np.asarray(times, dtype=float)
        self.substeps = int(substeps)
        self.box_weight = float(box_weight)
        self._u = np.zeros(problem.control_dim)

    def _interval_pass(self, j, x, q):
        """One interval of RK4 plus trapezoidal running cost."""
        from . import problem as prob

        p = self.problem
        ta, tb = self.times[j], self.times[j + 1]
        grid = np.linspace(ta, tb, self.substeps + 1)
        cost = 0.0
        lk = prob.eval_running_cost(p, q, ta, x, self._u)

        def f(t, xx):
            return prob.eval_dynamics(p, q, t, xx, self._u)

        for s in range(self.substeps):
            hh = grid[s + 1] - grid[s]
            x = prob.rk4_step(f, grid[s], x, hh)
            lk_next = prob.eval_running_cost(p, q, grid[s + 1], x, self._u)
            cost += 0.5 * hh * (lk + lk_next)
            lk = lk_next
        return x, cost

    def _box_violation(self, x):
        if self.problem.state_bounds is None:
            return 0.0
        lo, hi = self.problem.state_bounds
        return float(
            np.maximum(0.0, np.maximum(lo - x, x - hi)).max(initial=0.0)
        )

    def prefix(self, q_int):
        """Node states, cumulative costs, and running box violation."""
        n_int = q_int.size
        xs = np.empty((n_int + 1, self.problem.state_dim))
        cs = np.zeros(n_int + 1)
        vs = np.zeros(n_int + 1)
        xs[0] = self.problem.x0
        vs[0] = self._box_violation(xs[0])
        for j in range(n_int):
            xs[j + 1], dc = self._interval_pass(j, xs[j], int(q_int[j]))
            cs[j + 1] = cs[j] + dc
            vs[j + 1] = max(vs[j], self._box_violation(xs[j + 1]))
        return xs, cs, vs

    def _tail_score(self, j, x_start, viol0, q_int, k):
        """Score of the whole schedule with interval ``j`` repainted to ``k``."""
        x, cost = self._interval_pass(j, x_start, k)
        viol = max(viol0, self._box_violation(x))
        p = self.problem
        for jj in range(j + 1, q_int.size):
            x, dc = self._interval_pass(jj, x, int(q_int[jj]))
            cost += dc
            viol = max(viol, self._box_violation(x))
        if p.terminal_cost is not None:
            cost += float(p.terminal_cost(p.t0, p.x0, p.tf, x))
        return cost + self.box_weight * viol

    def total_score(self, q_int):
        xs, cs, vs = self.prefix(q_int)
        p = self.problem
        total = cs[-1]
        if p.terminal_cost is not None:
            total += float(p.terminal_cost(p.t0, p.x0, p.tf, xs[-1]))
        return total + self.box_weight * vs[-1]

    def polish(self, q_int, max_sweeps: int = 40):
        q = np.asarray(q_int).copy()
        costs = [self.total_score(q)]
        M = self.problem.mode_count
        for _ in range(max_sweeps):
            xs, cs, vs = self.prefix(q)
            best_gain = max(1e-12, 1e-12 * abs(costs[-1]))
            best = None
            for j in range(q.size):
                for k in range(M):
                    if k == q[j]:
                        continue
                    trial = cs[j] + self._tail_score(j, xs[j], vs[j], q, k)
                    gain = costs[-1] - trial
                    if gain > best_gain:
                        best_gain = gain
                        best = (j, k, trial)
            if best is None:
                break
            j, k, trial = best
            q[j] = k
            costs.append(trial)
        return q, costs


def _march_states(nlp: NlpProblem, U_int: np.ndarray) -> np.ndarray:
    """States satisfying the collocation defects for fixed interval controls.

    Marches interval by interval, solving each implicit defect equation for
    the next state with a Newton iteration (finite-difference Jacobian of
    the residual; the state dimension is small).
    """
    from . import embed as emb

    times = nlp.mesh.times
    h = nlp.mesh.widths
    n = nlp.n
    x = np.empty((nlp.J, n))
    x[0] = nlp.sys.problem.x0

    def residual(j, x0, x1):
        f0, _ = emb.node_values(nlp.sys, times[j], x0, U_int[j])
        f1, _ = emb.node_values(nlp.sys, times[j + 1], x1, U_int[j])
        if nlp.scheme == "trapezoidal":
            return x1 - x0 - 0.5 * h[j] * (f0 + f1)
        xm = 0.5 * (x0 + x1) + (h[j] / 8.0) * (f0 - f1)
        fm, _ = emb.node_values(
            nlp.sys, 0.5 * (times[j] + times[j + 1]), xm, U_int[j]
        )
        return x1 - x0 - (h[j] / 6.0) * (f0 + 4.0 * fm + f1)

    for j in range(nlp.J - 1):
        # Explicit predictor, implicit corrector.
        f0, _ = emb.node_values(nlp.sys, times[j], x[j], U_int[j])
        x1 = x[j] + h[j] * f0
        for _ in range(25):
            r = residual(j, x[j], x1)
            if np.max(np.abs(r)) < 1e-13:
                break
            Jr = np.empty((n, n))
            for i in range(n):
                step = 1e-7 * (1.0 + abs(x1[i]))
                xp = x1.copy()
                xm_ = x1.copy()
                xp[i] += step
                xm_[i] -= step
                Jr[:, i] = (residual(j, x[j], xp) - residual(j, x[j], xm_)) / (
                    xp[i] - xm_[i]
                )
            x1 = x1 - np.linalg.solve(Jr, r)
        x[j + 1] = x1
    return x


def _bang_bang_finalize(nlp: NlpProblem, z: np.ndarray, cfg: SolverConfig):
    """Snap bits to valid vertices, polish switch placement, re-feasibilize.

    Returns ``(z_final, result, polish_costs)``.  The finalized iterate has
    exactly binary bits; its states satisfy the collocation defects for
    that fixed schedule, so the reported solve is of the bit-pinned
    problem, which for control-free modes it solves exactly.
    """
    from . import extract as _extract

    problem = nlp.sys.problem
    x, u, v = nlp.unpack(z)
    times = nlp.mesh.times
    polisher = _SchedulePolisher(problem, times)

    # Two deterministic bang-bang candidates: per-interval nearest vertex,
    # and impulse-preserving pulse placement.  Start the local search from
    # the cheaper one.
    q_round = _extract.round_nodes(np.clip(v, 0.0, 1.0), nlp.sys.cfg)
    q_pulse = _impulse_snap(nlp, v)
    candidates = [q_round, q_pulse]
    scores = [polisher.total_score(q) for q in candidates]
    q_start = candidates[int(np.argmin(scores))]
    q_int, polish_costs = polisher.polish(q_start)
    v_bits = encoding.bit_matrix(nlp.b)[q_int].astype(float)
    z_final = z.copy()
    U_int = z_final[nlp.x_len :].reshape(nlp.N, nlp.p)
    U_int[:, nlp.M * nlp.m :] = v_bits
    x_new = _march_states(nlp, U_int)
    z_final[: nlp.x_len] = x_new.ravel()
    ev = nlp.eval_all(z_final, order=0)
    cnorm = float(np.max(np.abs(ev.defects)))
    status = "converged" if cnorm <= cfg.defect_tol else "max-iters"
    result = SolveResult(
        z=z_final,
        objective=ev.objective,
        defect_norm=cnorm,
        stationarity=0.0,
        status=status,
        trace=[{
            "outer": 0,
            "objective": ev.objective,
            "defect_norm": cnorm,
            "rho": 0.0,
            "stationarity": 0.0,
            "inner_status": "bit-pinned",
        }],
    )
    return z_final, result, polish_costs


def solve_meocp(
    sys,
    mesh: Mesh,
    scheme: str = "trapezoidal",
    cfg: SolverConfig = SolverConfig(),
    x_target=None,
    trace_sink=None,
    polish: bool = True,
) -> MeocpSolution:
    """Solve the relaxed switching problem with penalty continuation.

    Builds one NLP per continuation stage (fractionality weight scaled by
    ``cfg.continuation_stages``), warm-starting each stage from the last
    and nudging half-way bits before the final stage.  For problems whose
    modes carry no continuous control, a final deterministic polish snaps
    the bits to valid vertices, locally improves node-aligned switch
    positions against re-simulated cost, and rebuilds the states to
    satisfy the defects exactly; first-order steps alone tend to stall
    with a few bits mid-slide between vertices.
    """
    stage_results = []
    z = None
    nlp = None
    stages = cfg.continuation_stages or (1.0,)
    # Pure switching problems are best solved in the reduced control space;
    # continuous controls go through the full augmented-Lagrangian path.
    reduced = sys.m == 0
    for idx, factor in enumerate(stages):
        stage_sys = replace(sys, cfg=sys.cfg.scaled_alpha(factor))
        nlp = build_nlp(stage_sys, mesh, scheme)
        if z is None:
            z = nlp.initial_guess(x_target=x_target)
        if idx == len(stages) - 1 and len(stages) > 1:
            z = _nudge_half_bits(nlp, z, cfg.tie_break_step)
        if reduced:
            result = _solve_reduced_stage(nlp, z, cfg, trace_sink=trace_sink)
        else:
            result = solve(nlp, cfg, z_init=z, trace_sink=trace_sink)
        stage_results.append(result)
        z = result.z
    polish_costs: list = []
    final = stage_results[-1]
    if polish and sys.m == 0:
        z, final, polish_costs = _bang_bang_finalize(nlp, z, cfg)
    return MeocpSolution(
        nlp=nlp,
        result=final,
        stage_results=stage_results,
        polish_costs=polish_costs,
    )
