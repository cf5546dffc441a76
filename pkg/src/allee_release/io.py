"""Run configuration, trajectory CSV files and result JSON files.

Configuration documents are TOML::

    scenario = "optimize"       # optional when the CLI subcommand names it
    seed = 20240611
    dt = 0.01
    out = "results"

    [params]                    # any subset; missing fields keep the defaults
    K0 = 30.0

    [optimize]
    tau = 7
    T = 70

Each scenario reads its own table (``[simulate]``, ``[eta_max]``, ...).  The
accepted keys and their defaults are listed in ``SCHEMA``; anything else is
rejected with ``SchemaViolation``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from allee_release.errors import IoError, ParseError, SchemaViolation
from allee_release.model import RawParams, TABLE1
from allee_release.simulate import TAG_NAMES, Trajectory

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "SCENARIOS",
    "SCHEMA",
    "RunConfig",
    "parse_config",
    "load_config",
    "config_hash",
    "provenance",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_result_json",
    "to_jsonable",
]

SCENARIOS = (
    "simulate",
    "steady_states",
    "eta",
    "eta_max",
    "stability_check",
    "optimize",
    "min_single_release",
    "sweep",
    "reproduce",
)
REPRO_TARGETS = ("figures_1_4", "tables_2_5", "thresholds", "all")
CSV_HEADER = ("t", "s1", "s2", "tag", "u_applied")
DEFAULT_SEED = 20240611
DEFAULT_DT = 0.01


# ---------------------------------------------------------------------------
# field validators: each takes (name, value) and returns the normalised value


def _number(name, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaViolation(name, f"expected a number, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise SchemaViolation(name, "must be finite")
    return v


def _positive(name, v) -> float:
    v = _number(name, v)
    if not v > 0.0:
        raise SchemaViolation(name, f"must be positive, got {v!r}")
    return v


def _nonneg(name, v) -> float:
    v = _number(name, v)
    if not v >= 0.0:
        raise SchemaViolation(name, f"must be non-negative, got {v!r}")
    return v


def _count(name, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise SchemaViolation(name, f"expected a positive integer, got {v!r}")
    return v


def _count0(name, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise SchemaViolation(name, f"expected a non-negative integer, got {v!r}")
    return v


def _seed(name, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 2**64:
        raise SchemaViolation(name, f"expected an unsigned 64-bit integer, got {v!r}")
    return v


def _flag(name, v) -> bool:
    if not isinstance(v, bool):
        raise SchemaViolation(name, f"expected true or false, got {v!r}")
    return v


def _text(name, v) -> str:
    if not isinstance(v, str):
        raise SchemaViolation(name, f"expected a string, got {v!r}")
    return v


def _list_of(item: Callable) -> Callable:
    def check(name, v):
        if not isinstance(v, list):
            raise SchemaViolation(name, f"expected a list, got {type(v).__name__}")
        return tuple(item(f"{name}[{i}]", x) for i, x in enumerate(v))

    return check


def _pair(name, v) -> tuple[float, float]:
    if not isinstance(v, list) or len(v) != 2:
        raise SchemaViolation(name, f"expected [s1, s2], got {v!r}")
    return (_nonneg(f"{name}[0]", v[0]), _nonneg(f"{name}[1]", v[1]))


def _choice(options) -> Callable:
    def check(name, v):
        v = _text(name, v)
        if v not in options:
            raise SchemaViolation(name, f"must be one of {', '.join(options)}; got {v!r}")
        return v

    return check


_IC = (_pair, None)  # None: the initial condition defaults to (K1, 0)

# scenario table -> key -> (validator, default)
SCHEMA: dict[str, dict[str, tuple[Callable, Any]]] = {
    "steady_states": {},
    "simulate": {
        "tau": (_positive, 7.0),
        "u": (_nonneg, 300.0),
        "amounts": (_list_of(_nonneg), None),
        "horizon": (_positive, 180.0),
        "ic": _IC,
        "include_t0": (_flag, True),
        "stride": (_count, 1),
    },
    "eta": {
        "tau": (_positive, 7.0),
        "taus": (_list_of(_positive), None),
    },
    "eta_max": {
        "periods": (_list_of(_positive), None),
        "lo": (_positive, None),
        "hi": (_positive, None),
        "n_grid": (_count, 4000),
    },
    "stability_check": {
        "tau": (_positive, 7.0),
        "u": (_nonneg, 300.0),
    },
    "optimize": {
        "tau": (_positive, 7.0),
        "T": (_positive, 70.0),
        "N": (_count, None),
        "C": (_positive, 1.0 / 200.0),
        "u_max": (_positive, None),
        "margin": (_nonneg, None),
        "ic": _IC,
        "include_t0": (_flag, False),
        "n_starts": (_count0, 8),
        "max_evaluations": (_count, 400_000),
    },
    "min_single_release": {
        "tau": (_positive, 30.0),
        "T": (_positive, 70.0),
        "C": (_positive, 1.0 / 200.0),
        "u_max": (_positive, None),
        "margin": (_nonneg, None),
        "ic": _IC,
        "include_t0": (_flag, False),
        "tol": (_positive, 0.01),
    },
    "sweep": {
        "tau": (_list_of(_positive), ()),
        "u": (_list_of(_nonneg), ()),
        "T": (_list_of(_positive), (180.0,)),
        "ic": (_list_of(_pair), None),
        "include_t0": (_flag, True),
        "workers": (_count, 1),
    },
    "reproduce": {
        "target": (_choice(REPRO_TARGETS), "all"),
        "workers": (_count, 1),
    },
}

_TOP = {
    "scenario": _choice(SCENARIOS),
    "seed": _seed,
    "dt": _positive,
    "out": _text,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run description.  ``settings`` holds the scenario table."""

    params: RawParams = TABLE1
    scenario: str = "steady_states"
    seed: int = DEFAULT_SEED
    dt: float = DEFAULT_DT
    out: str | None = None
    settings: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "scenario": self.scenario,
            "seed": self.seed,
            "dt": self.dt,
            "out": self.out,
            "settings": to_jsonable(self.settings),
        }

    def replace(self, **changes) -> RunConfig:
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(changes)
        return RunConfig(**current)


def _fill_section(name: str, table: dict) -> dict:
    allowed = SCHEMA[name]
    if not isinstance(table, dict):
        raise SchemaViolation(name, "expected a table")
    for key in table:
        if key not in allowed:
            raise SchemaViolation(f"{name}.{key}", "unknown key")
    out = {}
    for key, (check, default) in allowed.items():
        out[key] = check(f"{name}.{key}", table[key]) if key in table else default
    return out


def _check_section(name: str, s: dict) -> None:
    """Cross-field rules that a single validator cannot express."""
    if name == "eta_max":
        has_interval = s["lo"] is not None or s["hi"] is not None
        if has_interval and s["periods"] is not None:
            raise SchemaViolation("eta_max", "give either periods or lo/hi, not both")
        if has_interval and (s["lo"] is None or s["hi"] is None or not s["hi"] > s["lo"]):
            raise SchemaViolation("eta_max", "lo and hi must both be set with hi > lo")


def _params(table) -> RawParams:
    if not isinstance(table, dict):
        raise SchemaViolation("params", "expected a table")
    known = {f.name for f in fields(RawParams)}
    for key in table:
        if key not in known:
            raise SchemaViolation(f"params.{key}", "unknown key")
    values = TABLE1.as_dict()
    values.update({k: _positive(f"params.{k}", v) for k, v in table.items()})
    return RawParams(**values)


def _decode(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = getattr(exc, "msg", str(exc))
        raise ParseError(msg, line, col) from None


def parse_config(text: str, scenario: str | None = None) -> RunConfig:
    """Validate a TOML document and fill every default.

    ``scenario`` (e.g. from a CLI subcommand) takes precedence over the
    document's own ``scenario`` key.  Every scenario table present is
    validated, not only the selected one.
    """
    doc = _decode(text)
    top = {}
    for key, value in doc.items():
        if key == "params" or key in SCHEMA:
            continue
        if key not in _TOP:
            raise SchemaViolation(key, "unknown key")
        top[key] = _TOP[key](key, value)
    if scenario is not None:
        top["scenario"] = _choice(SCENARIOS)("scenario", scenario)
    if "scenario" not in top:
        raise SchemaViolation("scenario", "no scenario selected")
    sections = {}
    for name in SCHEMA:
        sections[name] = _fill_section(name, doc.get(name, {}))
        _check_section(name, sections[name])
    return RunConfig(
        params=_params(doc.get("params", {})),
        scenario=top["scenario"],
        seed=top.get("seed", DEFAULT_SEED),
        dt=top.get("dt", DEFAULT_DT),
        out=top.get("out"),
        settings=sections[top["scenario"]],
    )


def load_config(path: str | Path, scenario: str | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, scenario)


# ---------------------------------------------------------------------------
# serialisation


def to_jsonable(obj):
    """Convert results, numpy values and enums into plain JSON types."""
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enum
        return obj.value
    return obj


def config_hash(config: RunConfig | dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace).

    The output directory is left out: where results go does not change them.
    """
    doc = config.as_dict() if isinstance(config, RunConfig) else to_jsonable(config)
    doc.pop("out", None)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _versions() -> dict:
    from allee_release import __version__
    from allee_release import _kernels

    out = {"allee_release": __version__, "python": platform.python_version(), "numpy": np.__version__}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:
        out["numba"] = None
    out["backend"] = _kernels.K.name
    return out


def provenance(config: RunConfig | None = None, seed: int | None = None, dt: float | None = None) -> dict:
    return {
        "config_hash": config_hash(config) if config is not None else None,
        "seed": seed if seed is not None else (config.seed if config is not None else None),
        "dt": dt if dt is not None else (config.dt if config is not None else None),
        "versions": _versions(),
    }


def write_result_json(result, path: str | Path, prov: dict | None = None) -> None:
    """One JSON object: the result's fields plus a ``provenance`` block."""
    doc = to_jsonable(result)
    if not isinstance(doc, dict):
        doc = {"result": doc}
    doc["provenance"] = prov if prov is not None else provenance()
    text = json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"
    _write_text(path, text)


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """Header ``t,s1,s2,tag,u_applied`` then one row per sample.

    Floats carry 17 significant digits, enough to read back the same double.
    """
    names = [TAG_NAMES[int(c)] for c in traj.tag]
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for i in range(len(traj)):
                w.writerow((_fmt(traj.t[i]), _fmt(traj.s1[i]), _fmt(traj.s2[i]), names[i], _fmt(traj.u_applied[i])))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from None


def read_trajectory_csv(path: str | Path) -> Trajectory:
    """Inverse of ``write_trajectory_csv``; schedule and step are not stored."""
    codes = {name: i for i, name in enumerate(TAG_NAMES)}
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from None
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ParseError(f"{path}: expected header {','.join(CSV_HEADER)}", 1, 1)
    body = rows[1:]
    for n, row in enumerate(body, start=2):
        if len(row) != 5 or row[3] not in codes:
            raise ParseError(f"{path}: malformed row", n, 1)
    cols = list(zip(*body)) if body else [(), (), (), (), ()]
    return Trajectory(
        t=np.array(cols[0], dtype=np.float64),
        s1=np.array(cols[1], dtype=np.float64),
        s2=np.array(cols[2], dtype=np.float64),
        tag=np.array([codes[c] for c in cols[3]], dtype=np.int8),
        u_applied=np.array(cols[4], dtype=np.float64),
        schedule=None,
        dt=math.nan,
    )
