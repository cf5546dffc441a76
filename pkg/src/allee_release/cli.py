"""Command-line entry point: ``allee-release <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 a reproduction
report with failing cases, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from allee_release import io
from allee_release.errors import AlleeReleaseError, ConfigError, IoError, SchemaViolation
from allee_release.model import derive_params, steady_states
from allee_release.optimize import ControlProblem, SolverOptions, min_single_release, solve
from allee_release.periodic import Interval, eta, eta_max, stability_sufficient
from allee_release.repro import reproduce, sweep, sweep_grid, write_sweep_csv
from allee_release.simulate import ReleaseSchedule, classify_elimination, simulate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REPORT = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--out", help="directory for CSV/JSON outputs")
    p.add_argument("--seed", type=int, help="RNG seed for the optimizer")
    p.add_argument("--dt", type=float, help="integration step in days")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="allee-release", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common], argument_default=argparse.SUPPRESS)

    add("steady-states", "thresholds and equilibria of the uncontrolled system")

    p = add("simulate", "integrate one release schedule")
    p.add_argument("--tau", type=float)
    p.add_argument("--u", type=float, help="constant release size")
    p.add_argument("--amounts", type=float, nargs="+", help="explicit release sequence")
    p.add_argument("--horizon", type=float)
    p.add_argument("--ic", type=float, nargs=2, metavar=("S1", "S2"))
    p.add_argument("--no-t0", dest="include_t0", action="store_false", help="skip the release at t = 0")
    p.add_argument("--stride", type=int)

    p = add("eta", "release threshold for one or more periods")
    p.add_argument("--tau", type=float, nargs="+")

    p = add("eta-max", "largest threshold over a set of periods")
    p.add_argument("--periods", type=float, nargs="+")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--n-grid", dest="n_grid", type=int)

    p = add("stability-check", "does the S1-free orbit stay above K1")
    p.add_argument("--tau", type=float)
    p.add_argument("--u", type=float)

    for name, help_ in (("optimize", "cheapest feasible release plan"),
                        ("min-single-release", "smallest single release that suffices")):
        p = add(name, help_)
        p.add_argument("--tau", type=float)
        p.add_argument("--T", type=float)
        p.add_argument("--C", type=float)
        p.add_argument("--u-max", dest="u_max", type=float)
        p.add_argument("--margin", type=float)
        p.add_argument("--ic", type=float, nargs=2, metavar=("S1", "S2"))
        p.add_argument("--include-t0", dest="include_t0", action="store_true")
        if name == "optimize":
            p.add_argument("--N", type=int)
            p.add_argument("--n-starts", dest="n_starts", type=int)
            p.add_argument("--max-evaluations", dest="max_evaluations", type=int)
        else:
            p.add_argument("--tol", type=float)

    p = add("sweep", "simulate a grid of (tau, u, T, ic)")
    p.add_argument("--tau", type=float, nargs="+")
    p.add_argument("--u", type=float, nargs="+")
    p.add_argument("--T", type=float, nargs="+")
    p.add_argument("--workers", type=int)

    p = add("reproduce", "rerun published figures, tables or thresholds")
    p.add_argument("target", nargs="?", choices=io.REPRO_TARGETS)
    p.add_argument("--workers", type=int)
    return parser


_GLOBAL = ("config", "out", "seed", "dt", "quiet", "command")


def resolve_config(args: argparse.Namespace) -> io.RunConfig:
    """Config file (if any), then command-line overrides, both validated."""
    scenario = args.command.replace("-", "_")
    if getattr(args, "config", None):
        cfg = io.load_config(args.config, scenario)
    else:
        cfg = io.parse_config("", scenario)
    top = {}
    if getattr(args, "seed", None) is not None:
        top["seed"] = io._seed("seed", args.seed)
    if getattr(args, "dt", None) is not None:
        top["dt"] = io._positive("dt", args.dt)
    if getattr(args, "out", None) is not None:
        top["out"] = args.out
    settings = dict(cfg.settings)
    allowed = io.SCHEMA[scenario]
    for key, value in vars(args).items():
        if key in _GLOBAL:
            continue
        if scenario == "eta" and key == "tau":
            key = "taus"  # the eta subcommand takes several periods at once
        settings[key] = allowed[key][0](f"{scenario}.{key}", value)
    return cfg.replace(settings=settings, **top)


def _problem(params, s, dt, single=False) -> ControlProblem:
    return ControlProblem(
        params, s["tau"], s["T"], N=1 if single else s["N"], C=s["C"], u_max=s["u_max"], ic=s["ic"],
        margin=s["margin"], dt=dt, include_t0=s["include_t0"], enforce_cap_floor=not single,
    )


def run(cfg: io.RunConfig) -> tuple[dict, int, dict]:
    """Execute a scenario; returns (summary, exit code, files to write)."""
    params = derive_params(cfg.params)
    s = cfg.settings
    files: dict[str, object] = {}
    code = EXIT_OK
    if cfg.scenario == "steady_states":
        summary = steady_states(params)
    elif cfg.scenario == "simulate":
        if s["amounts"] is not None:
            schedule = ReleaseSchedule(s["tau"], s["amounts"], include_t0=s["include_t0"])
        else:
            schedule = ReleaseSchedule.constant(s["tau"], s["u"], s["horizon"], include_t0=s["include_t0"])
        ic = s["ic"] or (params.K1, 0.0)
        traj = simulate(params, schedule, ic, s["horizon"], cfg.dt, s["stride"])
        summary = {
            "tau": s["tau"],
            "amounts": list(schedule.amounts),
            "ic": list(ic),
            "horizon": s["horizon"],
            "dt_used": traj.dt,
            "s1_final": traj.final.s1,
            "s2_final": traj.final.s2,
            "eliminated": classify_elimination(traj),
            "clamped": traj.clamped,
            "backend": traj.backend,
        }
        files["trajectory.csv"] = traj
    elif cfg.scenario == "eta":
        taus = s["taus"] or (s["tau"],)
        summary = {"values": [{"tau": t, "eta": eta(t, params)} for t in taus]}
    elif cfg.scenario == "eta_max":
        if s["lo"] is not None:
            summary = eta_max(params, Interval(s["lo"], s["hi"]), s["n_grid"]).as_dict()
        else:
            summary = eta_max(params, s["periods"], s["n_grid"]).as_dict()
    elif cfg.scenario == "stability_check":
        summary = stability_sufficient(s["u"], s["tau"], params).as_dict()
    elif cfg.scenario == "optimize":
        opts = SolverOptions(seed=cfg.seed, n_starts=s["n_starts"], max_evaluations=s["max_evaluations"])
        problem = _problem(params, s, cfg.dt)
        result = solve(problem, opts)
        summary = {"problem": problem.as_dict(), **result.as_dict()}
        schedule = ReleaseSchedule(problem.tau, result.u_star, include_t0=problem.include_t0)
        files["trajectory.csv"] = simulate(params, schedule, problem.ic, problem.T, cfg.dt)
    elif cfg.scenario == "min_single_release":
        problem = _problem(params, s, cfg.dt, single=True)
        u = min_single_release(problem, s["tol"])
        summary = {"problem": problem.as_dict(), "u_min": u, "J": problem.C * u}
    elif cfg.scenario == "sweep":
        ics = s["ic"] or ((params.K1, 0.0),)
        records = sweep(sweep_grid(s["tau"], s["u"], s["T"], ics), params, cfg.dt, s["include_t0"], s["workers"])
        summary = {"n_records": len(records), "records": records}
        files["sweep.csv"] = records
    elif cfg.scenario == "reproduce":
        out = Path(cfg.out) if cfg.out else None
        report = reproduce(s["target"], out, params, cfg.dt, cfg.seed, s["workers"])
        summary = report.as_dict()
        code = EXIT_OK if report.passed else EXIT_REPORT
    else:  # pragma: no cover - parse_config guards the scenario name
        raise SchemaViolation("scenario", f"unknown scenario {cfg.scenario!r}")
    return summary, code, files


def _write_outputs(cfg: io.RunConfig, summary: dict, files: dict) -> None:
    out = Path(cfg.out)
    prov = io.provenance(cfg)
    for name, obj in files.items():
        if name == "sweep.csv":
            write_sweep_csv(obj, out / name)
        else:
            io.write_trajectory_csv(obj, out / name)
    if cfg.scenario != "reproduce":  # the report writes its own JSON
        io.write_result_json(summary, out / f"{cfg.scenario}.json", prov)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        summary, code, files = run(cfg)
        if cfg.out:
            _write_outputs(cfg, summary, files)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, AlleeReleaseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not getattr(args, "quiet", False):
        print(json.dumps(io.to_jsonable(summary), indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
