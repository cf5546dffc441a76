"""Reproduction harness for the published scenarios, plus parameter sweeps.

``reproduce`` reruns a named group of published results and compares each
one with its reference value at a stated tolerance.  A mismatch is recorded
in the report and never raised.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from allee_release.errors import IoError, SingularPeriod
from allee_release.io import provenance, write_result_json, write_trajectory_csv
from allee_release.model import ModelParams, derive_params
from allee_release.optimize import ControlProblem, SolverOptions, evaluate, solve
from allee_release.periodic import eta, eta_max
from allee_release.simulate import DEFAULT_DT, ReleaseSchedule, classify_elimination, simulate

FIGURE_HORIZON = 180.0
TABLE_C = 1.0 / 200.0
TABLE_TOLERANCE = 0.25
SINGLE_RELEASE_TOLERANCE = 0.05

# (panel, figure, tau, u, eliminated according to the caption)
FIGURE_CASES = (
    ("a", 1, 7.0, 100.0, False),
    ("b", 1, 14.0, 200.0, False),
    ("c", 2, 7.0, 300.0, True),
    ("d", 2, 14.0, 43760.0, True),
    ("e", 3, 3.0, 80.0, True),
    ("f", 3, 7.0, 80.0, False),
    ("g", 4, 7.0, 200.0, True),
    ("h", 4, 14.0, 600.0, True),
)

# Extra initial conditions simulated for each figure scenario; only (K1, 0)
# enters the verdict.
FIGURE_ICS = ((374.0, 0.0), (374.0, 50.0), (200.0, 0.0), (100.0, 0.0))

# case -> (table, tau); T -> (sum of releases, min J)
TABLE_CASES = {
    1: ("Table 2", 7.0),
    2: ("Table 3", 14.0),
    3: ("Table 4", 21.0),
    4: ("Table 5", 30.0),
}
TABLE_VALUES = {
    1: {300.0: (2949.52, 14.75), 180.0: (1243.07, 6.22), 100.0: (1126.62, 5.63), 70.0: (908.66, 4.54)},
    2: {300.0: (3604.23, 18.02), 180.0: (1677.15, 8.39), 100.0: (1109.34, 5.55), 70.0: (1110.13, 5.55)},
    3: {300.0: (2918.42, 14.59), 180.0: (2283.66, 11.42), 100.0: (1294.69, 6.47), 70.0: (1106.70, 5.53)},
    4: {300.0: (3788.17, 18.94), 180.0: (2081.34, 10.41), 100.0: (1256.42, 6.28), 70.0: (873.47, 4.37)},
}
CASE4_SINGLE_RELEASE = 873.47

ETA_BANDS = {3.0: (54.0, 66.0), 7.0: (270.0, 330.0)}
ETA_MAX_REFERENCE = 43759.89
ETA_MAX_TOLERANCE = 0.01

TARGETS = ("figures_1_4", "tables_2_5", "thresholds")


@dataclass
class CaseRecord:
    case_id: str
    anchor: str  # figure panel or table cell the reference value comes from
    reference_value: object
    computed_value: object
    tolerance: str
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ReproReport:
    target: str
    records: list[CaseRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "passed": self.passed,
            "n_pass": sum(r.passed for r in self.records),
            "n_cases": len(self.records),
            "records": [r.as_dict() for r in self.records],
        }


def _within(computed: float, reference: float, rel: float) -> bool:
    return abs(computed - reference) <= rel * abs(reference)


# ---------------------------------------------------------------------------
# figures


def figure_case(params: ModelParams, tau: float, u: float, dt: float = DEFAULT_DT, ic=None):
    schedule = ReleaseSchedule.constant(tau, u, FIGURE_HORIZON, include_t0=True)
    traj = simulate(params, schedule, ic or (params.K1, 0.0), FIGURE_HORIZON, dt)
    return traj, classify_elimination(traj)


def _figures(params: ModelParams, out: Path | None, dt: float) -> list[CaseRecord]:
    records = []
    for panel, fig, tau, u, expected in FIGURE_CASES:
        traj, verdict = figure_case(params, tau, u, dt)
        name = f"fig{fig}{panel}_tau{tau:g}_u{u:g}"
        if out is not None:
            write_trajectory_csv(traj, out / f"{name}.csv")
            for ic in FIGURE_ICS[1:]:
                extra, _ = figure_case(params, tau, u, dt, ic)
                write_trajectory_csv(extra, out / f"{name}_ic{ic[0]:g}_{ic[1]:g}.csv")
        records.append(CaseRecord(
            case_id=name,
            anchor=f"Fig. {fig}({panel})",
            reference_value="eliminate" if expected else "persist",
            computed_value="eliminate" if verdict else "persist",
            tolerance="exact verdict",
            passed=verdict == expected,
            note=f"S1(180)={traj.final.s1:.6g}",
        ))
    return records


# ---------------------------------------------------------------------------
# thresholds


def _thresholds(params: ModelParams) -> list[CaseRecord]:
    records = []
    for tau, (lo, hi) in ETA_BANDS.items():
        v = eta(tau, params)
        records.append(CaseRecord(
            f"eta_{tau:g}", "Sec. 5.1", f"[{lo:g}, {hi:g}]", v, "band", lo <= v <= hi,
        ))
    try:
        v14 = eta(14.0, params)
    except SingularPeriod:
        v14 = math.nan
    records.append(CaseRecord("eta_14", "Sec. 5.1", "< 0", v14, "sign", v14 < 0.0))
    sc = eta_max(params)
    records.append(CaseRecord(
        "eta_max", "Sec. 5.1", ETA_MAX_REFERENCE, sc.eta_max, "1% relative",
        _within(sc.eta_max, ETA_MAX_REFERENCE, ETA_MAX_TOLERANCE), note=f"tau_max={sc.tau_max:g}",
    ))
    return records


# ---------------------------------------------------------------------------
# optimisation tables


def table_problem(params: ModelParams, tau: float, T: float, dt: float = DEFAULT_DT) -> ControlProblem:
    return ControlProblem(params, tau, T, C=TABLE_C, dt=dt)


def _solve_case(args):
    raw, case, T, dt, seed = args
    params = derive_params(raw)
    problem = table_problem(params, TABLE_CASES[case][1], T, dt)
    result = solve(problem, SolverOptions(seed=seed))
    check = evaluate(result.u_star, problem.with_dt(dt / 2.0))
    return case, T, problem, result, check


def table_cases() -> list[tuple[int, float]]:
    return [(case, T) for case in TABLE_CASES for T in TABLE_VALUES[case]]


def _tables(params: ModelParams, out: Path | None, dt: float, seed: int, workers: int) -> list[CaseRecord]:
    jobs = [(params.raw, case, T, dt, seed) for case, T in table_cases()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(_solve_case, jobs))
    else:
        solved = [_solve_case(j) for j in jobs]

    records = []
    for case, T, problem, result, check in solved:
        table, tau = TABLE_CASES[case]
        ref_sum, ref_J = TABLE_VALUES[case][T]
        name = f"case{case}_tau{tau:g}_T{T:g}"
        if out is not None:
            schedule = ReleaseSchedule(tau, result.u_star, include_t0=problem.include_t0)
            write_trajectory_csv(simulate(params, schedule, problem.ic, T, dt), out / f"{name}.csv")
            write_result_json(result, out / f"{name}.json", provenance(seed=seed, dt=dt))
        feasible = result.feasible and check.feasible
        note = f"S1(T)={result.s1_final:.6g}, S1(T) at dt/2={check.s1_final:.6g}"
        records.append(CaseRecord(
            f"{name}_feasible", f"{table}, T={T:g}", True, feasible, "S1(T) < Kb - margin at dt and dt/2",
            feasible, note,
        ))
        records.append(CaseRecord(
            f"{name}_J", f"{table}, T={T:g}", ref_J, result.J, "25% relative",
            _within(result.J, ref_J, TABLE_TOLERANCE),
        ))
        records.append(CaseRecord(
            f"{name}_sum_u", f"{table}, T={T:g}", ref_sum, result.total_release, "25% relative",
            _within(result.total_release, ref_sum, TABLE_TOLERANCE),
        ))
        if case == 4 and T == 70.0:
            u = np.asarray(result.u_star)
            single = int(np.count_nonzero(u > 0.0)) == 1
            records.append(CaseRecord(
                f"{name}_single_release", f"{table}, T=70 (Sec. 5.2)", CASE4_SINGLE_RELEASE, float(u.max()),
                "single release, 5% relative",
                single and _within(float(u.max()), CASE4_SINGLE_RELEASE, SINGLE_RELEASE_TOLERANCE),
                note=f"{int(np.count_nonzero(u > 0.0))} nonzero releases",
            ))
    return records


def reproduce(
    target: str,
    out_dir: str | Path | None = None,
    params: ModelParams | None = None,
    dt: float = DEFAULT_DT,
    seed: int = 20240611,
    workers: int = 1,
) -> ReproReport:
    """Rerun one group of published results (``"all"`` runs every group).

    With ``out_dir`` set, per-case CSV files and ``report_<target>.json`` are
    written there.
    """
    params = params or derive_params()
    if target == "all":
        report = ReproReport("all")
        for t in TARGETS:
            report.records.extend(reproduce(t, out_dir, params, dt, seed, workers).records)
        if out_dir is not None:
            write_result_json(report, Path(out_dir) / "report_all.json", provenance(seed=seed, dt=dt))
        return report
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; choose from {', '.join(TARGETS + ('all',))}")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create {out}: {exc.strerror or exc}") from None
    report = ReproReport(target)
    if target == "figures_1_4":
        report.records = _figures(params, out, dt)
    elif target == "thresholds":
        report.records = _thresholds(params)
    else:
        report.records = _tables(params, out, dt, seed, workers)
    if out is not None:
        write_result_json(report, out / f"report_{target}.json", provenance(seed=seed, dt=dt))
    return report


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepPoint:
    tau: float
    u: float
    T: float
    ic: tuple[float, float]


def sweep_grid(
    taus: Iterable[float],
    us: Iterable[float],
    Ts: Iterable[float] = (FIGURE_HORIZON,),
    ics: Iterable[tuple[float, float]] = ((374.0, 0.0),),
) -> list[SweepPoint]:
    """Cartesian product in (tau, u, T, ic) order."""
    return [
        SweepPoint(float(t), float(u), float(T), (float(ic[0]), float(ic[1])))
        for t, u, T, ic in itertools.product(taus, us, Ts, ics)
    ]


def _sweep_one(args) -> dict:
    raw, pt, dt, include_t0 = args
    params = derive_params(raw)
    schedule = ReleaseSchedule.constant(pt.tau, pt.u, pt.T, include_t0=include_t0)
    traj = simulate(params, schedule, pt.ic, pt.T, dt)
    try:
        e = eta(pt.tau, params)
    except SingularPeriod:
        e = math.nan
    return {
        "tau": pt.tau,
        "u": pt.u,
        "T": pt.T,
        "s1_0": pt.ic[0],
        "s2_0": pt.ic[1],
        "eliminated": classify_elimination(traj),
        "s1_final": traj.final.s1,
        "s2_final": traj.final.s2,
        "s1_min": float(traj.s1.min()),
        "s1_max": float(traj.s1.max()),
        "eta": e,
        "above_eta": bool(e > 0.0 and pt.u > e),
        "clamped": traj.clamped,
    }


def sweep(
    grid: Sequence[SweepPoint],
    params: ModelParams | None = None,
    dt: float = DEFAULT_DT,
    include_t0: bool = True,
    workers: int = 1,
) -> list[dict]:
    """Simulate every grid point; records come back in grid order."""
    params = params or derive_params()
    jobs = [(params.raw, pt, dt, include_t0) for pt in grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]


SWEEP_COLUMNS = (
    "tau", "u", "T", "s1_0", "s2_0", "eliminated", "s1_final", "s2_final", "s1_min", "s1_max", "eta",
    "above_eta", "clamped",
)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_sweep_csv(records: Sequence[dict], path: str | Path) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for r in records:
                w.writerow([_cell(r[c]) for c in SWEEP_COLUMNS])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None
