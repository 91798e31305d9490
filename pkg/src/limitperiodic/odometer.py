"""Finite quotients of an odometer and the algebra of periodic potentials.

The Cantor group is never represented directly. A :class:`GroupSchedule`
lists the periods ``n_0 | n_1 | n_2 | ...`` of the finite quotients, and a
potential defined on the quotient of index ``n`` is just a real array of
length ``n`` read cyclically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable

import numpy as np

from .errors import DivisibilityError, ScheduleError


@dataclass(frozen=True)
class GroupSchedule:
    """Tower of cyclic quotients; ``indices[k]`` is the period at level k."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(n) for n in self.indices)
        if not idx:
            raise ScheduleError("schedule must contain at least one level")
        if idx[0] < 1:
            raise ScheduleError("periods must be positive")
        for lo, hi in zip(idx, idx[1:]):
            if hi <= lo:
                raise ScheduleError(f"periods must increase strictly ({lo} -> {hi})")
            if hi % lo:
                raise ScheduleError(f"{lo} does not divide {hi}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def doubling(cls, levels: int = 24) -> "GroupSchedule":
        return cls(tuple(2**k for k in range(levels + 1)))

    @classmethod
    def geometric(cls, base: int, levels: int = 16) -> "GroupSchedule":
        if base < 2:
            raise ScheduleError("geometric schedule needs base >= 2")
        return cls(tuple(base**k for k in range(levels + 1)))

    def __len__(self):
        return len(self.indices)

    def period(self, level: int) -> int:
        if not 0 <= level < len(self.indices):
            raise ScheduleError(f"level {level} outside schedule of length {len(self)}")
        return self.indices[level]

    def level_of(self, period: int) -> int:
        try:
            return self.indices.index(int(period))
        except ValueError:
            raise ScheduleError(f"period {period} is not a level of the schedule") from None

    def first_level_at_least(self, period: float, above: int = -1) -> int:
        """Smallest level strictly above ``above`` whose period is >= ``period``."""
        for k in range(above + 1, len(self.indices)):
            if self.indices[k] >= period:
                return k
        raise ScheduleError(f"schedule too short to reach period {period}")


DEFAULT_SCHEDULE = GroupSchedule.doubling()


@dataclass(frozen=True, eq=False)
class PeriodicPotential:
    """Real sequence of period ``len(values)``; site i reads ``values[i % n]``."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if arr.size < 1:
            raise ValueError("a periodic potential needs period >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("potential values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zero(cls, period: int = 1) -> "PeriodicPotential":
        return cls(np.zeros(period))

    @classmethod
    def constant(cls, c: float, period: int = 1) -> "PeriodicPotential":
        return cls(np.full(period, float(c)))

    @property
    def period(self) -> int:
        return self.values.size

    def __call__(self, site):
        return self.values[np.asarray(site) % self.period]

    def __len__(self):
        return self.period

    def __eq__(self, other):
        if not isinstance(other, PeriodicPotential):
            return NotImplemented
        return sup_distance(self, other) == 0.0

    def __hash__(self):
        # hash of the minimal-period representative, so that equal sequences collide
        return hash(_minimal_period(self.values).tobytes())

    def __repr__(self):
        if self.period <= 8:
            return f"PeriodicPotential({self.values.tolist()})"
        return f"PeriodicPotential(period={self.period}, sup={self.sup_norm():.4g})"

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def scaled(self, lam: float) -> "PeriodicPotential":
        return PeriodicPotential(lam * self.values)

    def shifted(self, c: float) -> "PeriodicPotential":
        """Add the constant ``c`` at every site."""
        return PeriodicPotential(self.values + c)

    def rotated(self, s: int) -> "PeriodicPotential":
        """Cyclic shift: the result reads ``self(i + s)`` at site i."""
        return PeriodicPotential(np.roll(self.values, -s))

    def embedded(self, N: int) -> "PeriodicPotential":
        return embed(self, N)

    def to_text(self) -> str:
        return format_potential(self)


def _minimal_period(values: np.ndarray) -> np.ndarray:
    n = values.size
    for p in range(1, n + 1):
        if n % p == 0 and np.array_equal(values, np.tile(values[:p], n // p)):
            return values[:p]
    return values


def embed(v: PeriodicPotential, N: int) -> PeriodicPotential:
    """Regard ``v`` as a potential of period ``N`` (a multiple of its own)."""
    N = int(N)
    if N < 1 or N % v.period:
        raise DivisibilityError(f"period {v.period} does not divide {N}")
    return PeriodicPotential(np.tile(v.values, N // v.period))


def common_period(potentials: Iterable[PeriodicPotential]) -> int:
    return reduce(math.lcm, (p.period for p in potentials), 1)


def convolve_subgroup(
    v: PeriodicPotential, level: int, schedule: GroupSchedule = DEFAULT_SCHEDULE
) -> PeriodicPotential:
    """Average ``v`` over the cosets of the level-``level`` subgroup.

    The result has period ``n_level``; entry i is the mean of ``v`` over the
    sites congruent to i modulo ``n_level`` within one period of ``v``.
    """
    K = schedule.level_of(v.period)
    if not level < K:
        raise ScheduleError(f"level {level} is not below the level {K} of the potential")
    nk = schedule.period(level)
    return PeriodicPotential(v.values.reshape(-1, nk).mean(axis=0))


def sup_distance(v: PeriodicPotential, w: PeriodicPotential) -> float:
    n = math.lcm(v.period, w.period)
    return float(np.max(np.abs(np.tile(v.values, n // v.period) - np.tile(w.values, n // w.period))))


def residue_oscillation(v: PeriodicPotential, nk: int) -> float:
    """Largest spread of ``v`` inside a residue class modulo ``nk``."""
    blocks = v.values.reshape(-1, nk)
    return float(np.max(blocks.max(axis=0) - blocks.min(axis=0)))


@dataclass(frozen=True, eq=False)
class PotentialFamily:
    """Finite multiset of potentials, all stored at one common period."""

    members: tuple[PeriodicPotential, ...]
    period: int = field(init=False)

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a potential family needs at least one member")
        n = common_period(members)
        members = tuple(m if m.period == n else embed(m, n) for m in members)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "period", n)

    @property
    def count(self) -> int:
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def as_array(self) -> np.ndarray:
        return np.stack([m.values for m in self.members])

    def scaled(self, lam: float) -> "PotentialFamily":
        return PotentialFamily(tuple(m.scaled(lam) for m in self.members))

    def sup_norm(self) -> float:
        return max(m.sup_norm() for m in self.members)


def family_diameter(W: PotentialFamily) -> float:
    """Largest pairwise sup-distance between members."""
    arr = W.as_array()
    return float(np.max(arr.max(axis=0) - arr.min(axis=0)))


@dataclass(frozen=True)
class Ball:
    """Open sup-norm ball around a periodic potential."""

    center: PeriodicPotential
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("ball radius must be nonnegative")

    def distance_to_center(self, v: PeriodicPotential) -> float:
        return sup_distance(self.center, v)

    def contains(self, v: PeriodicPotential) -> bool:
        return self.distance_to_center(v) < self.radius

    def contains_family(self, W: PotentialFamily) -> bool:
        return self.max_distance(W) < self.radius

    def max_distance(self, W: PotentialFamily) -> float:
        c = embed(self.center, math.lcm(self.center.period, W.period)).values
        arr = W.as_array()
        arr = np.tile(arr, (1, c.size // W.period))
        return float(np.max(np.abs(arr - c)))

    def room(self, W: PotentialFamily) -> float:
        """How far every member can still move without leaving the ball."""
        return self.radius - self.max_distance(W)

    def closure_inside(self, other: "Ball") -> bool:
        return other.distance_to_center(self.center) + self.radius < other.radius


def format_potential(v: PeriodicPotential) -> str:
    return f"{v.period}\n" + " ".join(repr(float(x)) for x in v.values) + "\n"


def parse_potential(text: str) -> PeriodicPotential:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ValueError("expected two lines: period, then values")
    n = int(lines[0])
    vals = [float(tok) for tok in lines[1].split()]
    if len(vals) != n:
        raise ValueError(f"declared period {n} but found {len(vals)} values")
    return PeriodicPotential(np.array(vals))


def load_potential(path) -> PeriodicPotential:
    with open(path, encoding="utf-8") as fh:
        return parse_potential(fh.read())


def save_potential(v: PeriodicPotential, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_potential(v))


def as_potential(obj) -> PeriodicPotential:
    if isinstance(obj, PeriodicPotential):
        return obj
    return PeriodicPotential(np.asarray(obj, dtype=float))


def as_family(obj) -> PotentialFamily:
    if isinstance(obj, PotentialFamily):
        return obj
    if isinstance(obj, PeriodicPotential):
        return PotentialFamily((obj,))
    return PotentialFamily(tuple(as_potential(m) for m in obj))


__all__ = [
    "Ball",
    "DEFAULT_SCHEDULE",
    "GroupSchedule",
    "PeriodicPotential",
    "PotentialFamily",
    "as_family",
    "as_potential",
    "common_period",
    "convolve_subgroup",
    "embed",
    "family_diameter",
    "format_potential",
    "load_potential",
    "parse_potential",
    "residue_oscillation",
    "save_potential",
    "sup_distance",
]
