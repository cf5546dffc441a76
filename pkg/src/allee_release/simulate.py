"""Event-exact integration of the impulsive system.

Releases happen at t = k*tau.  The RK4 step is snapped to tau/ceil(tau/dt) so
every release time is a grid node.  At each one the pre-release state is
recorded, the release is added to S2 by plain addition, and the post-release
state is recorded with the same time stamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from allee_release import _kernels
from allee_release.errors import (
    EmptyTrajectory,
    HorizonNonPositive,
    InvalidStep,
    NegativeRelease,
)
from allee_release.model import ModelParams, State

DEFAULT_DT = 0.01

INTERIOR = "interior"
PRE_IMPULSE = "pre_impulse"
POST_IMPULSE = "post_impulse"
TAG_NAMES = (INTERIOR, PRE_IMPULSE, POST_IMPULSE)


@dataclass(frozen=True)
class ReleaseSchedule:
    """Periodic release plan.

    ``amounts[j]`` is released at t = (j + k0) * tau where k0 = 0 when
    ``include_t0`` is set and 1 otherwise.  Releases past the end of
    ``amounts`` are zero.
    """

    tau: float
    amounts: tuple[float, ...]
    u_max: float = math.inf
    include_t0: bool = True

    def __post_init__(self):
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise InvalidStep(f"release period must be positive, got {self.tau!r}")
        amounts = tuple(float(u) for u in self.amounts)
        object.__setattr__(self, "amounts", amounts)
        for u in amounts:
            if not u >= 0.0:
                raise NegativeRelease(f"release amounts must be non-negative, got {u!r}")
            if u > self.u_max:
                raise NegativeRelease(f"release {u!r} exceeds cap u_max={self.u_max!r}")

    @classmethod
    def constant(
        cls, tau: float, u: float, horizon: float, include_t0: bool = True, u_max: float = math.inf
    ) -> ReleaseSchedule:
        """Same amount at every release time up to and including ``horizon``."""
        first = 0 if include_t0 else 1
        count = int(math.floor(horizon / tau + 1e-9)) - first + 1
        return cls(tau, (u,) * max(count, 0), u_max=u_max, include_t0=include_t0)

    @property
    def first_k(self) -> int:
        return 0 if self.include_t0 else 1

    def release_times(self) -> list[float]:
        return [(j + self.first_k) * self.tau for j in range(len(self.amounts))]


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    tag: np.ndarray  # int8 codes indexing TAG_NAMES
    u_applied: np.ndarray
    schedule: ReleaseSchedule | None
    dt: float
    clamped: bool = False
    backend: str = field(default="", compare=False)

    def __post_init__(self):
        for name in ("t", "s1", "s2", "tag", "u_applied"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def final(self) -> State:
        if len(self) == 0:
            raise EmptyTrajectory("trajectory has no samples")
        return State(float(self.s1[-1]), float(self.s2[-1]))

    def tags(self) -> list[str]:
        return [TAG_NAMES[int(c)] for c in self.tag]

    def impulse_pairs(self) -> list[tuple[int, int]]:
        """Indices of (pre, post) sample pairs, in time order."""
        pre = np.flatnonzero(self.tag == _kernels.TAG_PRE)
        return [(int(i), int(i) + 1) for i in pre]

    def value_at(self, t: float, side: str = "post") -> State:
        """State at a recorded time; ``side`` picks pre/post at a release time."""
        hits = np.flatnonzero(self.t == t)
        if hits.size == 0:
            raise KeyError(f"no sample recorded at t={t!r}")
        i = hits[-1] if side == "post" else hits[0]
        return State(float(self.s1[i]), float(self.s2[i]))


def apply_impulse(state: State | tuple[float, float], u: float) -> State:
    if not u >= 0.0:
        raise NegativeRelease(f"release must be non-negative, got {u!r}")
    s1, s2 = state
    return State(s1, s2 + u)


@dataclass(frozen=True)
class Grid:
    """Integration grid aligned with the release period."""

    steps_per_period: int
    dt: float
    n_steps: int
    tail: float


def make_grid(tau: float, horizon: float, dt: float = DEFAULT_DT) -> Grid:
    if not (dt > 0.0 and math.isfinite(dt)):
        raise InvalidStep(f"dt must be positive, got {dt!r}")
    if not (tau > 0.0 and math.isfinite(tau)):
        raise InvalidStep(f"release period must be positive, got {tau!r}")
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise HorizonNonPositive(f"horizon must be positive, got {horizon!r}")
    m = max(1, math.ceil(tau / dt * (1.0 - 1e-12)))
    h = tau / m
    n = int(math.floor(horizon / h + 1e-9))
    k, r = divmod(n, m)
    tail = horizon - (k * tau + r * h)
    if tail <= 1e-9 * h:
        tail = 0.0
    return Grid(m, h, n, tail)


def simulate(
    params: ModelParams,
    schedule: ReleaseSchedule,
    ic: State | tuple[float, float],
    horizon: float,
    dt: float = DEFAULT_DT,
    stride: int = 1,
) -> Trajectory:
    """Integrate from ``ic`` over [0, horizon] with the releases in ``schedule``.

    ``dt`` is the requested step; the step actually used is snapped down so that
    ``tau`` is an integer number of steps and is stored on the result.  Every
    ``stride``-th node is recorded, plus all pre/post release pairs and the
    final state.
    """
    s1_0, s2_0 = (float(x) for x in ic)
    if not (s1_0 >= 0.0 and s2_0 >= 0.0):
        raise ValueError(f"initial condition must be non-negative, got {ic!r}")
    if stride < 1:
        raise InvalidStep(f"stride must be >= 1, got {stride!r}")
    grid = make_grid(schedule.tau, horizon, dt)
    amounts = np.asarray(schedule.amounts, dtype=np.float64)
    t, s1, s2, tag, u, clamped = _kernels.K.integrate_path(
        params.as_array(),
        s1_0,
        s2_0,
        amounts,
        schedule.first_k,
        grid.steps_per_period,
        float(schedule.tau),
        grid.dt,
        grid.n_steps,
        grid.tail,
        int(stride),
    )
    return Trajectory(
        t=t, s1=s1, s2=s2, tag=tag, u_applied=u, schedule=schedule, dt=grid.dt,
        clamped=bool(clamped), backend=_kernels.K.name,
    )


def final_states(
    params: ModelParams,
    tau: float,
    amounts: np.ndarray,
    ic: State | tuple[float, float],
    horizon: float,
    dt: float = DEFAULT_DT,
    include_t0: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Final (S1, S2, clamped) for each row of ``amounts`` (shape [B, N])."""
    amounts = np.atleast_2d(np.asarray(amounts, dtype=np.float64))
    if np.any(amounts < 0.0):
        raise NegativeRelease("release amounts must be non-negative")
    grid = make_grid(tau, horizon, dt)
    b = amounts.shape[0]
    return _kernels.K.integrate_final(
        params.as_array(),
        np.full(b, float(ic[0])),
        np.full(b, float(ic[1])),
        np.ascontiguousarray(amounts),
        0 if include_t0 else 1,
        grid.steps_per_period,
        grid.dt,
        grid.n_steps,
        grid.tail,
    )


def classify_elimination(
    traj: Trajectory, threshold: float = 1.0, window_fraction: float = 0.1, strict: bool = False
) -> bool:
    """True when S1 ends below ``threshold`` and has not grown over the final window.

    The window covers the last ``window_fraction`` of the time span.  By default
    "not grown" compares the window's end points, since releases make S1 wiggle
    inside each period even while it declines; ``strict`` requires every
    consecutive sample in the window to be non-increasing.
    """
    if len(traj) == 0:
        raise EmptyTrajectory("cannot classify an empty trajectory")
    if not traj.s1[-1] < threshold:
        return False
    t0, t1 = traj.t[0], traj.t[-1]
    start = t1 - window_fraction * (t1 - t0)
    tail = traj.s1[traj.t >= start]
    if strict:
        return bool(np.all(np.diff(tail) <= 0.0))
    return bool(tail[-1] <= tail[0])
