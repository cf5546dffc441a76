"""Minimum-cost release plans by direct shooting.

Decision variables are the N release sizes at t = tau, 2 tau, ..., N tau.  The
cost is C * sum(u) and the only path constraint is the terminal one,
S1(T) < Kb - margin, evaluated by forward simulation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from allee_release.errors import (
    BoxViolation,
    BudgetExhausted,
    GridTooFine,
    InfeasibleAtCap,
    TooManyReleases,
)
from allee_release.model import ModelParams, State
from allee_release.periodic import eta_max as _eta_max
from allee_release import _kernels
from allee_release.simulate import DEFAULT_DT, final_states, make_grid

DEFAULT_SEED = 20240611
DEFAULT_C = 1.0 / 200.0
MAX_ORACLE_POINTS = 10_000_000


@dataclass(frozen=True)
class ControlProblem:
    """One finite-horizon release problem.

    Unset fields take the standard defaults: ``N = floor(T / tau)``,
    ``ic = (K1, 0)``, ``margin = 0.01 * Kb`` and ``u_max`` equal to the
    whole-day maximum of eta.  The cap must be at least that maximum unless
    ``enforce_cap_floor`` is switched off (small verification instances need
    tighter boxes).
    """

    params: ModelParams
    tau: float
    T: float
    N: int | None = None
    C: float = DEFAULT_C
    u_max: float | None = None
    ic: State | None = None
    margin: float | None = None
    dt: float = DEFAULT_DT
    include_t0: bool = False
    enforce_cap_floor: bool = True

    def __post_init__(self):
        if not (self.tau > 0.0 and self.T > 0.0):
            raise ValueError(f"need tau > 0 and T > 0, got tau={self.tau!r}, T={self.T!r}")
        if not self.C > 0.0:
            raise ValueError(f"cost coefficient must be positive, got {self.C!r}")
        first = 0 if self.include_t0 else 1
        n_fit = int(math.floor(self.T / self.tau + 1e-9)) - first + 1
        n = n_fit if self.N is None else int(self.N)
        if n < 1 or n > n_fit:
            raise ValueError(f"N={n} releases do not fit in [0, {self.T}] with tau={self.tau}")
        object.__setattr__(self, "N", n)
        if self.ic is None:
            object.__setattr__(self, "ic", State(self.params.K1, 0.0))
        else:
            object.__setattr__(self, "ic", State(float(self.ic[0]), float(self.ic[1])))
        if self.margin is None:
            object.__setattr__(self, "margin", 0.01 * self.params.Kb)
        if not self.margin >= 0.0:
            raise ValueError(f"margin must be non-negative, got {self.margin!r}")
        floor = _eta_max(self.params).eta_max
        if self.u_max is None:
            object.__setattr__(self, "u_max", floor)
        if not self.u_max > 0.0:
            raise ValueError(f"u_max must be positive, got {self.u_max!r}")
        if self.enforce_cap_floor and self.u_max < floor:
            raise ValueError(f"u_max={self.u_max} is below the eta maximum {floor}")

    @property
    def target(self) -> float:
        """Largest admissible S1(T) (exclusive)."""
        return self.params.Kb - self.margin

    def release_times(self) -> list[float]:
        first = 0 if self.include_t0 else 1
        return [(k + first) * self.tau for k in range(self.N)]

    def with_dt(self, dt: float) -> ControlProblem:
        return ControlProblem(
            self.params, self.tau, self.T, self.N, self.C, self.u_max, self.ic, self.margin,
            dt, self.include_t0, self.enforce_cap_floor,
        )

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "T": self.T,
            "N": self.N,
            "C": self.C,
            "u_max": self.u_max,
            "ic": list(self.ic),
            "margin": self.margin,
            "dt": self.dt,
            "include_t0": self.include_t0,
        }


@dataclass(frozen=True)
class Evaluation:
    J: float
    s1_final: float
    feasible: bool


@dataclass
class OptimizationResult:
    u_star: tuple[float, ...]
    J: float
    s1_final: float
    feasible: bool
    evaluations: int
    method: str
    history: list[tuple[float, float]] = field(default_factory=list)
    starts: list[dict] = field(default_factory=list)

    @property
    def total_release(self) -> float:
        return math.fsum(self.u_star)

    def as_dict(self) -> dict:
        return {
            "u_star": list(self.u_star),
            "J": self.J,
            "total_release": self.total_release,
            "s1_final": self.s1_final,
            "feasible": self.feasible,
            "evaluations": self.evaluations,
            "method": self.method,
            "history": [list(h) for h in self.history],
            "starts": self.starts,
        }


class _Counter:
    """Batch objective evaluation with an evaluation budget.

    ``checkpoints`` records the pre-release states of a base vector so that
    vectors differing from it only from release ``i`` onward can be integrated
    from that release time (``from_release``); the result is bit-identical to
    a full run.  Every integrated vector counts as one evaluation.
    """

    def __init__(self, problem: ControlProblem, budget: int | None = None):
        self.problem = problem
        self.count = 0
        self.budget = budget
        self.grid = make_grid(problem.tau, problem.T, problem.dt)
        self.p = problem.params.as_array()
        self.first_k = 0 if problem.include_t0 else 1

    def exhausted(self) -> bool:
        return self.budget is not None and self.count >= self.budget

    def __call__(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        U = np.atleast_2d(U)
        self.count += U.shape[0]
        p = self.problem
        s1, _, _ = final_states(p.params, p.tau, U, p.ic, p.T, p.dt, p.include_t0)
        J = p.C * U.sum(axis=1)
        return J, s1

    def checkpoints(self, u: np.ndarray) -> np.ndarray:
        """Pre-release (S1, S2) at each release time of ``u``, shape [N, 2]."""
        g = self.grid
        self.count += 1
        _, s1, s2, tag, _, _ = _kernels.K.integrate_path(
            self.p, float(self.problem.ic[0]), float(self.problem.ic[1]),
            np.ascontiguousarray(u, dtype=np.float64), self.first_k, g.steps_per_period,
            float(self.problem.tau), g.dt, g.n_steps, g.tail, g.n_steps + 1,
        )
        pre = tag == _kernels.TAG_PRE
        return np.column_stack([s1[pre], s2[pre]])

    def from_release(self, i: int, state: np.ndarray, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        U = np.ascontiguousarray(np.atleast_2d(U), dtype=np.float64)
        b = U.shape[0]
        self.count += b
        g = self.grid
        s1, _, _ = _kernels.K.integrate_final(
            self.p, np.full(b, state[0]), np.full(b, state[1]), U, self.first_k,
            g.steps_per_period, g.dt, g.n_steps, g.tail, (i + self.first_k) * g.steps_per_period,
        )
        return self.problem.C * U.sum(axis=1), s1


def cost(u, C: float) -> float:
    return C * math.fsum(float(x) for x in u)


def evaluate(u, problem: ControlProblem) -> Evaluation:
    """Cost, terminal S1 and feasibility of one release vector."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.shape[0] != problem.N:
        raise BoxViolation(f"expected {problem.N} releases, got {u.shape[0]}")
    if np.any(~(u >= 0.0)) or np.any(u > problem.u_max):
        raise BoxViolation(f"releases must lie in [0, {problem.u_max}]")
    s1, _, _ = final_states(problem.params, problem.tau, u[None, :], problem.ic, problem.T,
                            problem.dt, problem.include_t0)
    s1_final = float(s1[0])
    return Evaluation(cost(u, problem.C), s1_final, bool(s1_final < problem.target))


@dataclass(frozen=True)
class SolverOptions:
    seed: int = DEFAULT_SEED
    n_starts: int = 8
    rho0: float = 1.0
    rho_growth: float = 10.0
    rho_max: float = 1e8
    max_sweeps: int = 40
    probe: float | None = None  # finite-difference step; default max(1, 1e-4 u_max)
    max_evaluations: int = 400_000
    single_release_starts: bool = True

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _violation(s1, target):
    return np.maximum(s1 - target, 0.0)


def _penalized(J, s1, target, rho):
    v = _violation(s1, target)
    return J + rho * v * v


class _Descent:
    """Projected coordinate descent on the exterior-penalty objective."""

    def __init__(self, ev: _Counter, opts: SolverOptions):
        self.ev = ev
        self.opts = opts
        p = ev.problem
        self.target = p.target
        self.umax = p.u_max
        self.h = opts.probe if opts.probe is not None else max(1.0, 1e-4 * p.u_max)
        self.history: list[tuple[float, float]] = []

    def run(self, u0: np.ndarray) -> tuple[np.ndarray, float, float]:
        u = np.clip(np.asarray(u0, dtype=np.float64), 0.0, self.umax)
        J, s1 = self.ev(u[None, :])
        J, s1 = float(J[0]), float(s1[0])
        step = np.full(u.shape, max(self.h, 0.25 * float(np.max(u, initial=self.h))))
        rho = self.opts.rho0
        while True:
            u, J, s1 = self._sweeps(u, J, s1, rho, step)
            v = max(s1 - self.target, 0.0)
            if v < self.ev.problem.margin / 10.0 or rho >= self.opts.rho_max or self.ev.exhausted():
                break
            rho *= self.opts.rho_growth
        return u, J, s1

    def _sweeps(self, u, J, s1, rho, step):
        n = u.shape[0]
        F = float(_penalized(J, s1, self.target, rho))
        ck = self.ev.checkpoints(u)
        for _ in range(self.opts.max_sweeps):
            improved = False
            for i in range(n):
                if self.ev.exhausted():
                    return u, J, s1
                up = min(u[i] + self.h, self.umax)
                dn = max(u[i] - self.h, 0.0)
                if up == dn:
                    continue
                # a probe that lands on the current point reuses its value
                cand_u, cand_J, cand_s = [], [], []
                for val in (up, dn):
                    row = u.copy()
                    row[i] = val
                    cand_u.append(row)
                fresh = [k for k, val in enumerate((up, dn)) if val != u[i]]
                Jp = np.full(2, J)
                s1p = np.full(2, s1)
                if fresh:
                    Jf, sf = self.ev.from_release(i, ck[i], np.array([cand_u[k] for k in fresh]))
                    Jp[fresh] = Jf
                    s1p[fresh] = sf
                Fp = _penalized(Jp, s1p, self.target, rho)
                slope = (Fp[0] - Fp[1]) / (up - dn)
                if slope == 0.0:
                    continue
                cand_J.extend(Jp)
                cand_s.extend(s1p)
                direction = -1.0 if slope > 0.0 else 1.0
                ladder = step[i] * 2.0 ** np.arange(-4, 3)
                vals = np.unique(np.clip(u[i] + direction * ladder, 0.0, self.umax))
                vals = vals[(vals != u[i]) & (vals != up) & (vals != dn)]
                if vals.size:
                    trial = np.repeat(u[None, :], vals.size, axis=0)
                    trial[:, i] = vals
                    Jt, st = self.ev.from_release(i, ck[i], trial)
                    cand_u.extend(trial)
                    cand_J.extend(Jt)
                    cand_s.extend(st)
                Fc = _penalized(np.array(cand_J), np.array(cand_s), self.target, rho)
                best = int(np.argmin(Fc))
                if Fc[best] < F - 1e-12 * max(abs(F), 1.0):
                    moved = abs(cand_u[best][i] - u[i])
                    u = np.array(cand_u[best])
                    J, s1, F = float(cand_J[best]), float(cand_s[best]), float(Fc[best])
                    step[i] = max(moved, self.h)
                    improved = True
                    ck = self.ev.checkpoints(u)
                else:
                    step[i] = max(step[i] * 0.25, self.h)
            self.history.append((J, max(s1 - self.target, 0.0)))
            if not improved:
                break
        return u, J, s1


def _restore(ev: _Counter, u: np.ndarray, anchor: np.ndarray, iters: int = 40) -> tuple[np.ndarray, float, float]:
    """Smallest move from ``u`` toward the feasible ``anchor`` that is feasible."""
    target = ev.problem.target
    lo, hi = 0.0, 1.0
    best = anchor
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        cand = u + mid * (anchor - u)
        _, s1 = ev(cand[None, :])
        if s1[0] < target:
            hi, best = mid, cand
        else:
            lo = mid
    J, s1 = ev(best[None, :])
    return best, float(J[0]), float(s1[0])


def _trim(ev: _Counter, u: np.ndarray, tol: float) -> tuple[np.ndarray, float, float]:
    """Lower each positive release to its feasibility boundary, one at a time."""
    target = ev.problem.target
    u = u.copy()
    order = np.argsort(u)  # smallest first: those are the likeliest to vanish
    for i in order:
        if u[i] <= 0.0:
            continue
        trial = u.copy()
        trial[i] = 0.0
        _, s1 = ev(trial[None, :])
        if s1[0] < target:
            u = trial
            continue
        lo, hi = 0.0, u[i]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            trial[i] = mid
            _, s1 = ev(trial[None, :])
            if s1[0] < target:
                hi = mid
            else:
                lo = mid
        u[i] = hi
    J, s1 = ev(u[None, :])
    return u, float(J[0]), float(s1[0])


def _single_release_candidates(ev: _Counter, tol: float) -> list[np.ndarray]:
    """Cheapest single release at each release time (where one suffices)."""
    p = ev.problem
    n = p.N
    caps = np.eye(n) * p.u_max
    _, s1 = ev(caps)
    out = []
    for k in np.flatnonzero(s1 < p.target):
        lo, hi = 0.0, p.u_max
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            trial = np.zeros((1, n))
            trial[0, k] = mid
            _, s = ev(trial)
            if s[0] < p.target:
                hi = mid
            else:
                lo = mid
        u = np.zeros(n)
        u[k] = hi
        out.append(u)
    return out


def _better(a: tuple, b: tuple | None) -> bool:
    """Order (feasible, J, u): feasible first, then lower J, then lexicographic u."""
    if b is None:
        return True
    fa, Ja, ua, va = a
    fb, Jb, ub, vb = b
    if fa != fb:
        return fa
    if not fa:
        return va < vb or (va == vb and tuple(ua) < tuple(ub))
    if Ja != Jb:
        return Ja < Jb
    return tuple(ua) < tuple(ub)


def solve(problem: ControlProblem, options: SolverOptions | None = None) -> OptimizationResult:
    """Search for the cheapest feasible release vector.

    Starts: the uniform warm start u = min(eta_max, u_max), ``n_starts``
    uniform random box points from a seeded generator and, if enabled, the
    cheapest single release at each release time.  Each start runs projected
    coordinate descent on J + rho * max(0, S1(T) - target)^2 with rho raised
    geometrically until the violation drops under margin/10; an infeasible
    end point is pulled back toward the warm start, then every release is
    trimmed to its feasibility boundary.  The best feasible point wins, or the
    least violating one with ``feasible=False`` when none is found.
    """
    opts = options or SolverOptions()
    ev = _Counter(problem, opts.max_evaluations)
    rng = np.random.default_rng(opts.seed)
    n = problem.N
    tol = 1e-3

    warm = np.full(n, min(_eta_max(problem.params).eta_max, problem.u_max))
    starts: list[tuple[str, np.ndarray]] = [("warm", warm)]
    starts += [(f"random{k}", rng.uniform(0.0, problem.u_max, n)) for k in range(opts.n_starts)]
    if opts.single_release_starts:
        starts += [(f"single{int(np.argmax(u))}", u) for u in _single_release_candidates(ev, tol)]

    _, s1w = ev(warm[None, :])
    warm_ok = bool(s1w[0] < problem.target)

    best = None
    history: list[tuple[float, float]] = []
    summaries = []
    for name, u0 in starts:
        if ev.exhausted():
            break
        descent = _Descent(ev, opts)
        u, J, s1 = descent.run(u0)
        history.extend(descent.history)
        if s1 >= problem.target and warm_ok:
            u, J, s1 = _restore(ev, u, warm)
        if s1 < problem.target:
            u, J, s1 = _trim(ev, u, tol)
        feasible = bool(s1 < problem.target)
        v = max(s1 - problem.target, 0.0)
        summaries.append({"start": name, "J": J, "s1_final": s1, "feasible": feasible})
        cand = (feasible, J, u, v)
        if _better(cand, best):
            best = cand
    if best is None:
        raise BudgetExhausted("evaluation budget exhausted before any start completed")

    feasible, _, u, _ = best
    u = np.clip(u, 0.0, problem.u_max)
    final = evaluate(u, problem)
    return OptimizationResult(
        u_star=tuple(float(x) for x in u),
        J=cost(u, problem.C),
        s1_final=final.s1_final,
        feasible=final.feasible,
        evaluations=ev.count,
        method="penalty-coordinate-descent+multistart",
        history=history,
        starts=summaries,
    )


def brute_force_oracle(problem: ControlProblem, grid_step: float) -> OptimizationResult:
    """Exhaustive search over the grid {0, step, 2 step, ..., u_max}^N."""
    if problem.N > 3:
        raise TooManyReleases(f"oracle handles N <= 3, got {problem.N}")
    if not grid_step > 0.0:
        raise ValueError(f"grid step must be positive, got {grid_step!r}")
    levels = np.arange(0.0, problem.u_max + 0.5 * grid_step, grid_step)
    levels = levels[levels <= problem.u_max]
    if levels[-1] < problem.u_max:
        levels = np.append(levels, problem.u_max)
    total = levels.size ** problem.N
    if total > MAX_ORACLE_POINTS:
        raise GridTooFine(f"{total} grid points exceed the limit of {MAX_ORACLE_POINTS}")

    ev = _Counter(problem)
    best = None
    chunk = 20_000
    points = itertools.product(levels, repeat=problem.N)
    while True:
        block = np.array(list(itertools.islice(points, chunk)), dtype=np.float64)
        if block.size == 0:
            break
        block = block.reshape(-1, problem.N)
        J, s1 = ev(block)
        v = _violation(s1, problem.target)
        ok = s1 < problem.target
        if ok.any():
            idx = np.flatnonzero(ok)
            # lowest cost, ties to the lexicographically smallest vector (product order)
            i = int(idx[np.argmin(J[idx])])
            cand = (True, float(J[i]), block[i], 0.0)
        else:
            i = int(np.argmin(v))
            cand = (False, float(J[i]), block[i], float(v[i]))
        if _better(cand, best):
            best = cand
    feasible, _, u, _ = best
    final = evaluate(u, problem)
    return OptimizationResult(
        u_star=tuple(float(x) for x in u),
        J=cost(u, problem.C),
        s1_final=final.s1_final,
        feasible=feasible,
        evaluations=ev.count,
        method=f"grid-enumeration(step={grid_step})",
    )


def min_single_release(problem: ControlProblem, tol: float = 0.01, n_check: int = 21) -> float:
    """Smallest single release (N = 1) that meets the terminal constraint.

    Feasibility is first sampled at ``n_check`` evenly spaced sizes; a pattern
    other than infeasible-then-feasible aborts, since bisection would then be
    meaningless.
    """
    if problem.N != 1:
        raise ValueError(f"single-release search needs N = 1, got N = {problem.N}")
    ev = _Counter(problem)
    grid = np.linspace(0.0, problem.u_max, n_check)
    _, s1 = ev(grid[:, None])
    ok = s1 < problem.target
    if ok[0]:
        return 0.0
    if not ok[-1]:
        raise InfeasibleAtCap(f"S1(T)={s1[-1]:.6g} even with the full cap u_max={problem.u_max}")
    first = int(np.argmax(ok))
    if not ok[first:].all():
        raise ValueError("feasibility is not monotone in the release size")
    lo, hi = float(grid[first - 1]), float(grid[first])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        _, s = ev(np.array([[mid]]))
        if s[0] < problem.target:
            hi = mid
        else:
            lo = mid
    return hi
