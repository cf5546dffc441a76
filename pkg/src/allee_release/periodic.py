"""The S1-free periodic regime and the release threshold eta(tau).

With S1 absent, S2 follows a logistic law between releases, so its
post-release values obey the stroboscopic map

    h(z) = K2 z E / (z (E - 1) + K2) + u,        E = exp(r2 tau),

whose unique positive fixed point Z2+ fixes the tau-periodic orbit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from allee_release.errors import (
    InvalidTau,
    NonPositiveState,
    NoPositiveBranch,
    OffsetOutOfRange,
    SingularPeriod,
)
from allee_release.model import ModelParams

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Releases are planned in whole days; the default eta search runs over these.
WHOLE_DAY_PERIODS = tuple(float(d) for d in range(1, 366))
SINGULAR_WINDOW = 1e-6


def _check_tau(tau: float) -> None:
    if not (tau > 0.0 and math.isfinite(tau)):
        raise InvalidTau(f"release period must be positive and finite, got {tau!r}")


def z2_plus(u: float, tau: float, params: ModelParams) -> float:
    """Post-release value of the S1-free periodic orbit."""
    _check_tau(tau)
    if not u >= 0.0:
        raise ValueError(f"release must be non-negative, got {u!r}")
    em1 = math.expm1(params.r2 * tau)
    b = u + params.K2
    return 0.5 * (b + math.sqrt(b * b + 4.0 * u * params.K2 / em1))


def recursion_map(z: float, u: float, tau: float, params: ModelParams) -> float:
    """One period of logistic decay/growth followed by a release of ``u``."""
    if not z > 0.0:
        raise NonPositiveState(f"state must be positive, got {z!r}")
    _check_tau(tau)
    em1 = math.expm1(params.r2 * tau)
    return params.K2 * z * (em1 + 1.0) / (z * em1 + params.K2) + u


@dataclass(frozen=True)
class PeriodicOrbit:
    tau: float
    u: float
    z2_plus: float
    params: ModelParams

    @classmethod
    def build(cls, u: float, tau: float, params: ModelParams) -> PeriodicOrbit:
        return cls(tau=float(tau), u=float(u), z2_plus=z2_plus(u, tau, params), params=params)

    def __call__(self, t_in_period):
        return orbit_eval(self, t_in_period)

    @property
    def period_end(self) -> float:
        """Value just before the next release, S2(tau-)."""
        return orbit_eval(self, self.tau)

    @property
    def period_min(self) -> float:
        # logistic is monotone between releases, so the extremes sit at the ends
        return min(self.z2_plus, self.period_end)

    @property
    def period_max(self) -> float:
        return max(self.z2_plus, self.period_end)


def orbit_eval(orbit: PeriodicOrbit, t_in_period):
    """S2 on the periodic orbit, ``t_in_period`` after the last release.

    Accepts a scalar or an array with every entry in (0, tau].
    """
    t = np.asarray(t_in_period, dtype=np.float64)
    if np.any(~(t > 0.0)) or np.any(t > orbit.tau):
        raise OffsetOutOfRange(f"offset must lie in (0, {orbit.tau}], got {t_in_period!r}")
    k2 = orbit.params.K2
    z = orbit.z2_plus
    em1 = np.expm1(orbit.params.r2 * t)
    out = k2 * z * (em1 + 1.0) / (z * em1 + k2)
    return float(out) if out.ndim == 0 else out


def phi(tau: float, params: ModelParams) -> float:
    _check_tau(tau)
    em1 = math.expm1(params.r2 * tau)
    den = params.K2 - (params.K1 - params.K2) * em1
    if abs(den) <= 1e-12 * params.K1:
        raise SingularPeriod(f"tau={tau!r} sits on the pole at {params.tau_singular!r}")
    return params.K1 * params.K2 / den


def eta(tau: float, params: ModelParams) -> float:
    """Release size above which the orbit stays over K1 for the whole period.

    Negative beyond the pole ``params.tau_singular``: for such periods the
    end-of-period value is capped by K2 E/(E - 1) < K1 however large the
    release, so no amount satisfies the condition.
    """
    f = phi(tau, params)
    em1 = math.expm1(params.r2 * tau)
    return em1 * f * (f - params.K2) / (params.K2 + f * em1)


@dataclass(frozen=True)
class Interval:
    """Continuous search range (lo, hi] for the eta maximisation."""

    lo: float
    hi: float


@dataclass(frozen=True)
class SufficientCondition:
    tau_max: float
    eta_max: float
    search_domain: dict
    # True when the maximiser sits against the excluded window of the pole,
    # i.e. eta grows without bound in the searched interval.
    unbounded: bool = False

    def as_dict(self) -> dict:
        return {
            "tau_max": self.tau_max,
            "eta_max": self.eta_max,
            "domain": self.search_domain,
            "unbounded": self.unbounded,
        }


def golden_section_max(f, a: float, b: float, tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    # endpoints are candidates too: the maximum may sit on the boundary
    candidates = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    best_f, best_x = max(candidates, key=lambda p: (p[0], -p[1]))
    return best_x, best_f


def _interval_grid(lo: float, hi: float, params: ModelParams, n: int) -> np.ndarray:
    ts = params.tau_singular
    pieces = [np.linspace(lo, hi, n)]
    if lo < ts < hi:
        # geometric clustering toward the pole from both sides
        gaps = np.geomspace(SINGULAR_WINDOW, max(ts - lo, hi - ts), n // 2)
        pieces.append(ts - gaps)
        pieces.append(ts + gaps)
    grid = np.unique(np.concatenate(pieces))
    grid = grid[(grid >= lo) & (grid <= hi) & (np.abs(grid - ts) >= SINGULAR_WINDOW)]
    return grid


def _eta_or_nan(t: float, params: ModelParams) -> float:
    try:
        return eta(float(t), params)
    except SingularPeriod:
        return math.nan


def eta_max(
    params: ModelParams,
    domain: Interval | Sequence[float] | None = None,
    n_grid: int = 4000,
) -> SufficientCondition:
    """Largest positive eta over a set of release periods.

    ``domain`` is either a sequence of candidate periods (default: whole days
    1..365), scanned exhaustively, or an ``Interval``, scanned on a
    grid clustered toward the pole and then refined by golden-section search
    on the bracket around the best node.  Ties go to the smaller period.
    """
    if domain is None:
        domain = WHOLE_DAY_PERIODS
    if isinstance(domain, Interval):
        return _eta_max_interval(params, float(domain.lo), float(domain.hi), n_grid)
    periods = [float(t) for t in domain]
    for t in periods:
        _check_tau(t)
    values = np.array([_eta_or_nan(t, params) for t in periods])
    if not np.any(values > 0.0):
        raise NoPositiveBranch("eta is non-positive on every candidate period")
    i = int(np.nanargmax(np.where(values > 0.0, values, -np.inf)))
    desc = {"kind": "periods", "min": min(periods), "max": max(periods), "count": len(periods)}
    return SufficientCondition(tau_max=periods[i], eta_max=float(values[i]), search_domain=desc)


def _eta_max_interval(params: ModelParams, lo: float, hi: float, n_grid: int) -> SufficientCondition:
    _check_tau(lo)
    if not hi > lo:
        raise InvalidTau(f"empty interval ({lo}, {hi}]")
    grid = _interval_grid(lo, hi, params, max(n_grid, 2000))
    values = np.array([_eta_or_nan(t, params) for t in grid])
    positive = values > 0.0
    if not positive.any():
        raise NoPositiveBranch(f"eta is non-positive on ({lo}, {hi}]")
    i = int(np.argmax(np.where(positive, values, -np.inf)))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    ts = params.tau_singular
    if a < ts < b:
        # never bracket across the pole
        if grid[i] < ts:
            b = ts - SINGULAR_WINDOW
        else:
            a = ts + SINGULAR_WINDOW
    x, fx = golden_section_max(lambda t: _eta_or_nan(t, params), a, b)
    if not fx >= values[i]:
        x, fx = float(grid[i]), float(values[i])
    unbounded = bool(abs(x - ts) <= 2.0 * SINGULAR_WINDOW and x < ts)
    desc = {"kind": "interval", "lo": lo, "hi": hi, "excluded": [ts - SINGULAR_WINDOW, ts + SINGULAR_WINDOW]}
    return SufficientCondition(tau_max=float(x), eta_max=float(fx), search_domain=desc, unbounded=unbounded)


class Verdict(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE_NEGATIVE_ETA = "inconclusive_negative_eta"


@dataclass(frozen=True)
class StabilityReport:
    verdict: Verdict  # orbit stays above K1 over the whole period
    eta_criterion: Verdict  # u > eta(tau), only meaningful where eta > 0
    period_min: float
    period_max: float
    eta: float | None
    orbit: PeriodicOrbit

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "eta_criterion": self.eta_criterion.value,
            "period_min": self.period_min,
            "period_max": self.period_max,
            "eta": self.eta,
            "z2_plus": self.orbit.z2_plus,
            "K1": self.orbit.params.K1,
            "tau": self.orbit.tau,
            "u": self.orbit.u,
        }


def stability_sufficient(u: float, tau: float, params: ModelParams) -> StabilityReport:
    """Check that the S1-free orbit for (u, tau) stays above K1 at all times."""
    orbit = PeriodicOrbit.build(u, tau, params)
    pmin = orbit.period_min
    verdict = Verdict.HOLDS if pmin > params.K1 else Verdict.FAILS
    try:
        e = eta(tau, params)
    except SingularPeriod:
        e = None
    if e is None or e <= 0.0:
        crit = Verdict.INCONCLUSIVE_NEGATIVE_ETA
    else:
        crit = Verdict.HOLDS if u > e else Verdict.FAILS
    return StabilityReport(verdict, crit, pmin, orbit.period_max, e, orbit)


def iterate_map(z0: float, u: float, tau: float, params: ModelParams, n: int) -> list[float]:
    """``n`` iterates of the stroboscopic map starting from ``z0`` (inclusive)."""
    out = [float(z0)]
    for _ in range(n):
        out.append(recursion_map(out[-1], u, tau, params))
    return out


def eta_curve(params: ModelParams, taus: Iterable[float]) -> list[tuple[float, float]]:
    return [(float(t), _eta_or_nan(t, params)) for t in taus]
