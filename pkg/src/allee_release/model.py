"""Two-species competition model with an Allee effect on the resident species.

The resident species S1 grows as

    dS1/dt = S1 (psi1 - r1/K1 (S1 + S2)) (S1/K0 - 1) - delta1 S1

and the released competitor S2 as

    dS2/dt = S2 (psi2 - r2/K2 (S1 + S2)) - delta2 S2

with r_i = psi_i - delta_i.  This module holds the parameter types, the
threshold/equilibrium formulas, the vector field, and the long-run outcome
classifier for the uncontrolled system.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from allee_release.errors import (
    AssumptionViolated,
    NegativeDiscriminant,
    NonPositiveParameter,
    OriginExcluded,
)


@dataclass(frozen=True)
class RawParams:
    """Biological rates (1/day) and capacities (individuals)."""

    psi1: float = 0.32667
    psi2: float = 0.21333
    delta1: float = 0.03333
    delta2: float = 0.06666
    K0: float = 30.0
    K1: float = 374.0
    K2: float = 300.0

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


TABLE1 = RawParams()


@dataclass(frozen=True)
class ModelParams:
    psi1: float
    psi2: float
    delta1: float
    delta2: float
    K0: float
    K1: float
    K2: float
    r1: float
    r2: float
    Kb: float
    Kstar: float
    S1_saddle: float
    S2_saddle: float

    @property
    def raw(self) -> RawParams:
        return RawParams(self.psi1, self.psi2, self.delta1, self.delta2, self.K0, self.K1, self.K2)

    @property
    def tau_singular(self) -> float:
        """Period at which the eta threshold has a pole, ln(K1/(K1-K2))/r2."""
        return math.log(self.K1 / (self.K1 - self.K2)) / self.r2

    def as_array(self) -> np.ndarray:
        """Packed vector consumed by the integration kernels."""
        return np.array(
            [self.psi1, self.psi2, self.delta1, self.delta2, self.K0, self.K1, self.K2, self.r1, self.r2],
            dtype=np.float64,
        )

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class State(NamedTuple):
    s1: float
    s2: float


class OutcomeClass(enum.Enum):
    S1_PERSISTS = "S1_persists"
    S2_PERSISTS = "S2_persists"
    SADDLE_BOUNDARY = "saddle_boundary"


def depensation_roots(raw: RawParams) -> tuple[float, float]:
    """Both positive roots of (psi1 - r1 y/K1)(y/K0 - 1) - delta1 = 0.

    The smaller root is the minimum viable population size Kb and the larger
    one the carrying capacity K*.  The small root is computed from Vieta's
    product so it does not lose digits to cancellation.
    """
    r1 = raw.psi1 - raw.delta1
    b = r1 * raw.K0 + raw.psi1 * raw.K1
    disc = b * b - 4.0 * r1 * raw.K0 * raw.K1 * (raw.psi1 + raw.delta1)
    if not disc > 0.0:
        raise NegativeDiscriminant(f"discriminant {disc!r} <= 0: no real MVPS threshold")
    kstar = (b + math.sqrt(disc)) / (2.0 * r1)
    kb = raw.K0 * raw.K1 * (raw.psi1 + raw.delta1) / (r1 * kstar)
    return kb, kstar


def derive_params(raw: RawParams = TABLE1) -> ModelParams:
    """Validate ``raw`` and attach growth rates, thresholds and the saddle.

    Raises:
        NonPositiveParameter: any field is not strictly positive.
        AssumptionViolated: births do not exceed deaths, S1 lacks the survival
            advantage over S2, or 0 < K0 < Kb < K2 < K1 < K* fails.
        NegativeDiscriminant: the depensation quadratic has no real roots.
    """
    for f in fields(raw):
        value = getattr(raw, f.name)
        if not (math.isfinite(value) and value > 0.0):
            raise NonPositiveParameter(f"{f.name} must be positive and finite, got {value!r}")

    r1 = raw.psi1 - raw.delta1
    r2 = raw.psi2 - raw.delta2
    if not (r1 > 0.0 and r2 > 0.0):
        raise AssumptionViolated("births_exceed_deaths", f"need psi_i > delta_i, got r1={r1}, r2={r2}")
    if not (raw.psi2 < raw.psi1 and raw.delta2 > raw.delta1 and r2 < r1):
        raise AssumptionViolated(
            "survival_advantage", "need psi2 < psi1, delta2 > delta1 and r2 < r1"
        )

    kb, kstar = depensation_roots(raw)
    if not (0.0 < raw.K0 < kb < raw.K2 < raw.K1 < kstar):
        raise AssumptionViolated(
            "threshold_ordering",
            f"need 0 < K0 < Kb < K2 < K1 < K*, got K0={raw.K0}, Kb={kb:.6g}, "
            f"K2={raw.K2}, K1={raw.K1}, K*={kstar:.6g}",
        )

    num = raw.K0 * (raw.psi1 * (raw.K1 - raw.K2) + raw.delta1 * (raw.K1 + raw.K2))
    den = raw.psi1 * (raw.K1 - raw.K2) + raw.delta1 * raw.K2
    s1_saddle = num / den
    s2_saddle = raw.K2 - s1_saddle
    if not (s1_saddle > 0.0 and s2_saddle > 0.0):
        raise AssumptionViolated("threshold_ordering", "coexistence saddle outside the positive quadrant")

    return ModelParams(
        psi1=raw.psi1,
        psi2=raw.psi2,
        delta1=raw.delta1,
        delta2=raw.delta2,
        K0=raw.K0,
        K1=raw.K1,
        K2=raw.K2,
        r1=r1,
        r2=r2,
        Kb=kb,
        Kstar=kstar,
        S1_saddle=s1_saddle,
        S2_saddle=s2_saddle,
    )


def vector_field(state: State | tuple[float, float], params: ModelParams) -> tuple[float, float]:
    """Right-hand side of the continuous dynamics (no impulses)."""
    s1, s2 = state
    total = s1 + s2
    ds1 = s1 * (params.psi1 - params.r1 / params.K1 * total) * (s1 / params.K0 - 1.0) - params.delta1 * s1
    ds2 = s2 * (params.psi2 - params.r2 / params.K2 * total) - params.delta2 * s2
    return ds1, ds2


def predict_outcome(ic: State | tuple[float, float], params: ModelParams) -> OutcomeClass:
    """Long-run winner of the uncontrolled system from ``ic``.

    The comparison with Kb is exact; callers that want a tolerance band must
    apply it themselves.  Initial conditions on the s2 = 0 axis follow the
    same rule (S1 > Kb grows to K*, S1 < Kb decays).
    """
    s1, s2 = ic
    if s1 < 0.0 or s2 < 0.0:
        raise ValueError(f"initial condition must be non-negative, got {ic!r}")
    if s1 == 0.0 and s2 == 0.0:
        raise OriginExcluded("the origin is excluded from the region of interest")
    if s1 == params.Kb:
        return OutcomeClass.SADDLE_BOUNDARY
    if s1 > params.Kb:
        return OutcomeClass.S1_PERSISTS
    return OutcomeClass.S2_PERSISTS


def steady_states(params: ModelParams) -> dict[str, object]:
    """Equilibria of the uncontrolled system, keyed by role."""
    return {
        "Kb": params.Kb,
        "Kstar": params.Kstar,
        "saddle": [params.S1_saddle, params.S2_saddle],
        "repeller": [params.Kb, 0.0],
        "attractors": [[0.0, params.K2], [params.Kstar, 0.0]],
        "r1": params.r1,
        "r2": params.r2,
    }
