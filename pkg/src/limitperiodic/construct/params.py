"""Parameter records for the start, induction and joining steps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

from ..errors import ParameterError


@dataclass(frozen=True)
class StartParams:
    """Gap-opening perturbation and constant-shift family at level ``K``.

    ``shift_range`` is the total constant shift spanned by the family;
    ``None`` selects ``4 pi M / n_K``.
    """

    M: float
    N1: int
    K: int
    N2: int | None = None
    shift_range: float | None = None

    def __post_init__(self):
        if not self.M >= 1.0:
            raise ParameterError(f"M must be >= 1, got {self.M}")
        if int(self.N1) != self.N1 or self.N1 < 1:
            raise ParameterError(f"N1 must be a positive integer, got {self.N1}")
        if self.N2 is not None and (int(self.N2) != self.N2 or self.N2 < 1):
            raise ParameterError(f"N2 must be a positive integer, got {self.N2}")
        if self.shift_range is not None and not self.shift_range > 0:
            raise ParameterError("shift_range must be positive")

    def shifts_total(self, n_K: int) -> float:
        if self.shift_range is not None:
            return float(self.shift_range)
        return 4.0 * math.pi * self.M / n_K


def required_N2(M: float, delta: float, shift_total: float) -> int:
    """Smallest shift count whose step, scaled by any ``|lam| <= M``, is below ``delta``."""
    if not delta > 0:
        raise ParameterError("delta must be positive")
    return int(math.floor(M * shift_total / delta)) + 1


@dataclass(frozen=True)
class InductionParams:
    """Block layout and staircase amplitudes.

    ``amp`` overrides ``r**-amp_exponent`` when set. ``theta_nice`` overrides
    ``r**-theta_exponent``. ``partition`` lists ``j_0 < ... < j_m`` in block
    units; ``order`` permutes the family members before laying them out.
    """

    r: int
    amp_exponent: float = 20.0
    amp: float | None = None
    order: tuple[int, ...] | None = None
    partition: tuple[int, ...] | None = None
    theta_exponent: float = 70.0
    theta_nice: float | None = None
    diameter_exponent: float = 10.0

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 2:
            raise ParameterError(f"r must be an integer >= 2, got {self.r}")
        if not self.amp_exponent > 0:
            raise ParameterError("amp_exponent must be positive")
        if self.amp is not None and not self.amp > 0:
            raise ParameterError("amp must be positive")
        if self.theta_nice is not None and not self.theta_nice > 0:
            raise ParameterError("theta_nice must be positive")
        if self.order is not None:
            object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        if self.partition is not None:
            object.__setattr__(self, "partition", tuple(int(i) for i in self.partition))

    @property
    def amplitude(self) -> float:
        if self.amp is not None:
            return float(self.amp)
        return float(self.r) ** (-self.amp_exponent)

    @property
    def angle_threshold(self) -> float:
        if self.theta_nice is not None:
            return float(self.theta_nice)
        return float(self.r) ** (-self.theta_exponent)


@dataclass(frozen=True)
class JoiningSettings:
    """Numerical knobs of one joining step.

    Defaults follow the asymptotic recipe where one exists; ``desk()``
    returns the overrides used for runs that must finish in minutes.
    """

    lambda_count: int = 9
    energy_step: float = 1e-3
    drift_energy_count: int = 251
    drift_lambda_count: int = 9
    drift_fraction: float = 0.25
    start_levels: int = 4
    n1_max_power: int = 40
    perturb_share: float = 0.25
    shift_policy: str = "paper"  # "paper" or "measured"
    shift_margin: float = 2.0
    start_bases: int = 2
    pool_shifts: int = 16
    pool_js: int = 3
    shift_sample: int = 257
    family_size_max: int = 32
    r_min: int = 2
    amp_exponent: float = 20.0
    diameter_exponent: float = 10.0
    ball_radius_factor: float = 2.0
    radius_decay: float = 0.1
    measure_share: float = 0.9
    family_limit: int = 4096
    member_sample: int = 64
    measure_lambda_count: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.shift_policy not in ("paper", "measured"):
            raise ParameterError("shift_policy must be 'paper' or 'measured'")
        if not self.energy_step > 0:
            raise ParameterError("energy_step must be positive")
        if self.lambda_count < 1 or self.drift_lambda_count < 1:
            raise ParameterError("lambda counts must be >= 1")
        if not 0 < self.drift_fraction <= 1:
            raise ParameterError("drift_fraction must lie in (0, 1]")
        if not self.ball_radius_factor > 1:
            raise ParameterError("ball_radius_factor must exceed 1 so the family is interior")
        if self.r_min < 2:
            raise ParameterError("r_min must be >= 2")

    @classmethod
    def desk(cls, **changes) -> "JoiningSettings":
        base = cls(diameter_exponent=1.0, amp_exponent=1.0)
        return replace(base, **changes)

    def with_overrides(self, **changes) -> "JoiningSettings":
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise ParameterError(f"unknown setting(s): {sorted(unknown)}")
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SchemeSettings:
    """Per-stage joining settings plus the coupling-window cap."""

    stages: tuple[JoiningSettings, ...] = field(default_factory=lambda: (JoiningSettings(),))
    M_cap: float = math.inf

    @classmethod
    def desk(cls, M_cap: float = 1.25, seed: int = 0) -> "SchemeSettings":
        """Overrides under which three stages from the zero potential finish in minutes."""
        first = JoiningSettings.desk(r_min=4, seed=seed)
        later = JoiningSettings.desk(
            shift_policy="measured",
            pool_shifts=8,
            lambda_count=3,
            measure_lambda_count=3,
            drift_energy_count=201,
            drift_lambda_count=5,
            seed=seed,
        )
        return cls(stages=(first, later), M_cap=M_cap)

    def for_stage(self, i: int) -> JoiningSettings:
        return self.stages[min(i, len(self.stages) - 1)]

    def to_dict(self) -> dict:
        return {
            "M_cap": self.M_cap if math.isfinite(self.M_cap) else "inf",
            "stages": [s.to_dict() for s in self.stages],
        }


__all__ = [
    "InductionParams",
    "JoiningSettings",
    "SchemeSettings",
    "StartParams",
    "required_N2",
]
