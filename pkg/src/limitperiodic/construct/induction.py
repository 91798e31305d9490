"""Block potentials, staircase families and the niceness analysis.

The block potential lays the members ``w^1..w^m`` (period ``n_k``) side by
side on ``n_K / n_k`` blocks, about ``r`` blocks each. The staircase member
``w^t`` raises the last block of segment i by ``amp * t_i``.

Over one period the monodromy factors as ``C_m B_m ... C_1 B_1`` where
``B_i`` is the unperturbed part of segment i and ``C_i`` its raised last
block. Niceness asks that the expanded image leaving one large factor is
not aligned with the direction the next large factor contracts.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import cocycle
from ..bands import compute_bands, verify_norm_measure_bound
from ..errors import ConditioningError, DivisibilityError, ParameterError
from ..odometer import (
    DEFAULT_SCHEDULE,
    GroupSchedule,
    PeriodicPotential,
    PotentialFamily,
    as_family,
    family_diameter,
)
from . import grids
from .params import InductionParams

UNDERFLOW_RATIO = 2.0**-400


@dataclass(frozen=True)
class BlockLayout:
    """Segment boundaries ``j_0 = 0 < j_1 < ... < j_m = n_K / n_k`` in block units."""

    n_k: int
    n_K: int
    r: int
    partition: tuple[int, ...]
    order: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.partition) - 1

    @property
    def blocks(self) -> int:
        return self.n_K // self.n_k

    def segment_of_block(self, j: int) -> int:
        """0-based segment index holding block ``j``."""
        return int(np.searchsorted(self.partition, j, side="right")) - 1

    def perturbed_blocks(self) -> list[int]:
        return [self.partition[i + 1] - 1 for i in range(self.m)]

    def segment_lengths(self) -> list[int]:
        return [b - a for a, b in zip(self.partition, self.partition[1:])]


def default_partition(blocks: int, m: int, r: int) -> tuple[int, ...]:
    """Longer segments first; every segment has ``r`` or ``r + 1`` blocks."""
    extra = blocks - m * r
    if not 0 <= extra <= m:
        raise ParameterError(f"cannot split {blocks} blocks into {m} segments of {r} or {r + 1}")
    sizes = [r + 1] * extra + [r] * (m - extra)
    return tuple(int(x) for x in np.concatenate([[0], np.cumsum(sizes)]))


def repetition_count(n_K: int, m: int, n_k: int) -> int:
    return n_K // (m * n_k)


def block_layout(m: int, n_k: int, n_K: int, params: InductionParams) -> BlockLayout:
    if n_K % n_k:
        raise DivisibilityError(f"{n_k} does not divide {n_K}")
    blocks = n_K // n_k
    if params.r != repetition_count(n_K, m, n_k):
        raise ParameterError(
            f"r={params.r} but floor(n_K/(m n_k)) = {repetition_count(n_K, m, n_k)}"
        )
    if params.partition is None:
        partition = default_partition(blocks, m, params.r)
    else:
        partition = tuple(params.partition)
        if len(partition) != m + 1 or partition[0] != 0 or partition[-1] != blocks:
            raise ParameterError(f"partition must run from 0 to {blocks} in {m} steps")
        for a, b in zip(partition, partition[1:]):
            if b - a - params.r not in (0, 1):
                raise ParameterError(f"segment [{a}, {b}) breaks the r or r+1 rule (r={params.r})")
    order = tuple(range(m)) if params.order is None else tuple(params.order)
    if sorted(order) != list(range(m)):
        raise ParameterError("order must be a permutation of the members")
    return BlockLayout(n_k, n_K, params.r, partition, order)


def _ordered_members(W, layout: BlockLayout) -> list[np.ndarray]:
    W = as_family(W)
    return [W[i].values for i in layout.order]


def build_block_potential(
    W,
    K: int,
    params: InductionParams,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
) -> PeriodicPotential:
    """Period-``n_K`` potential reading ``w^i`` on every block of segment i."""
    W = as_family(W)
    n_K = schedule.period(K)
    layout = block_layout(W.count, W.period, n_K, params)
    return _block_values(W, layout)


def _block_values(W, layout: BlockLayout) -> PeriodicPotential:
    members = _ordered_members(W, layout)
    tiles = [np.tile(members[i], n) for i, n in enumerate(layout.segment_lengths())]
    return PeriodicPotential(np.concatenate(tiles))


def staircase_member(base: PeriodicPotential, layout: BlockLayout, amp: float, t) -> PeriodicPotential:
    vals = base.values.copy()
    for i, j in enumerate(layout.perturbed_blocks()):
        if t[i]:
            vals[j * layout.n_k : (j + 1) * layout.n_k] += amp * t[i]
    return PeriodicPotential(vals)


def all_t(r: int, m: int):
    return itertools.product(range(r), repeat=m)


def sample_t(r: int, m: int, cap: int, seed: int = 0) -> list[tuple[int, ...]]:
    """Every t when ``r**m <= cap``; otherwise the two corners plus seeded draws."""
    if r**m <= cap:
        return [tuple(t) for t in all_t(r, m)]
    rng = np.random.default_rng(seed)
    chosen = {tuple([0] * m), tuple([r - 1] * m)}
    while len(chosen) < cap:
        chosen.add(tuple(int(x) for x in rng.integers(0, r, size=m)))
    return sorted(chosen)


def build_staircase_family(
    base: PeriodicPotential,
    layout: BlockLayout,
    params: InductionParams,
    t_values=None,
) -> PotentialFamily:
    """``{w^t}`` over ``t_values`` (default: all of ``{0..r-1}^m``, lexicographic)."""
    amp = params.amplitude
    scale = max(base.sup_norm(), 1.0)
    if amp < UNDERFLOW_RATIO * scale:
        warnings.warn(
            f"staircase amplitude {amp:.3g} is below 2**-400 of the potential scale;"
            " lower amp_exponent",
            RuntimeWarning,
            stacklevel=2,
        )
    ts = list(all_t(layout.r, layout.m)) if t_values is None else list(t_values)
    return PotentialFamily(tuple(staircase_member(base, layout, amp, t) for t in ts))


# niceness ---------------------------------------------------------------------------


def cutoff_exponent(log_norms, r: int) -> float:
    """``ln c`` omitted by every interval ``(lnln||B_i|| - ln r, ... + width]``.

    Uses the window ``[-m lnlnln r, -m lnlnln r + m lnlnlnln r]`` when
    ``lnlnlnln r > 0``; below that the window ``[-m ln 2, 0]`` with interval
    width ``ln 2``.
    """
    m = len(log_norms)
    lr = math.log(r)
    l3 = math.log(math.log(lr)) if lr > 1 else -math.inf
    l4 = math.log(l3) if l3 > 0 else -math.inf
    if l4 > 0:
        lo, width = -m * l3, l4
    else:
        lo, width = -m * math.log(2.0), math.log(2.0)
    hi = lo + m * width
    starts = []
    for ln_norm in log_norms:
        starts.append(math.log(ln_norm) - lr if ln_norm > 0 else -math.inf)
    candidates = [lo] + sorted(a for a in starts if lo <= a <= hi) + [hi]
    for x in candidates:
        if all(not (a < x <= a + width) for a in starts):
            return x
    raise ArithmeticError("cutoff window fully covered")  # impossible by counting


def _log_norm(P: np.ndarray, e: int) -> float:
    return float(math.log(np.linalg.norm(P, 2)) + e * math.log(2.0))


@dataclass
class NicenessContext:
    """Everything about ``(E, lam)`` that does not depend on ``t``."""

    E: float
    lam: float
    layout: BlockLayout
    amp: float
    theta: float
    members: list  # coupled block potentials, segment order
    B: list  # (P, e) per segment, unperturbed part
    log_norms: list
    log_cutoff: float
    good: list  # 0-based segment indices

    @property
    def d(self) -> int:
        return len(self.good)


def niceness_context(W, layout: BlockLayout, params: InductionParams, E: float, lam: float) -> NicenessContext:
    members = [lam * v for v in _ordered_members(W, layout)]
    B = []
    for u, length in zip(members, layout.segment_lengths()):
        B.append(cocycle.transfer_scaled(E, u, (length - 1) * layout.n_k, 0))
    log_norms = [_log_norm(P, e) for P, e in B]
    lnc = cutoff_exponent(log_norms, layout.r)
    c = math.exp(lnc)
    good = [i for i, ln in enumerate(log_norms) if ln >= c * layout.r]
    return NicenessContext(
        E, lam, layout, params.amplitude, params.angle_threshold, members, B, log_norms, lnc, good
    )


def _C(ctx: NicenessContext, i: int, t_i: int) -> np.ndarray:
    u = ctx.members[i]
    P, e = cocycle.transfer_scaled(ctx.E - ctx.lam * ctx.amp * t_i, u, ctx.layout.n_k, 0)
    return np.ldexp(P, e)


@dataclass(frozen=True)
class NicenessResult:
    t: tuple[int, ...]
    status: str  # "no-good-blocks" or "classified"
    good: tuple[int, ...]
    angles: tuple[float, ...]
    nice: tuple[bool | None, ...]
    log_cutoff: float
    tan_residual: float | None = None

    @property
    def very_nice(self) -> bool | None:
        if self.status == "no-good-blocks":
            return True
        if any(f is None for f in self.nice):
            return None if all(f is not False for f in self.nice) else False
        return all(self.nice)


def tan_identity_residual(B: np.ndarray, z: np.ndarray) -> float:
    """Relative residual of ``tan(theta') tan(theta) = ||B||**-2``.

    ``theta`` is the angle from z to the contracted direction of B and
    ``theta'`` the angle from ``B z`` to the expanded image.
    """
    sd = cocycle.singular_directions(B)
    th = cocycle.projective_angle(z, cocycle.direction_vector(sd.s))
    thp = cocycle.projective_angle(B @ z, cocycle.direction_vector(sd.u))
    lhs = math.tan(th) * math.tan(thp)
    rhs = sd.sigma**-2
    return abs(lhs - rhs) / rhs


def classify_niceness(t, ctx: NicenessContext) -> NicenessResult:
    """Per good index j, whether ``C_hat_j u_j`` is transverse to ``s_{j+1}``.

    The factor ``D_1`` is taken cyclically, so it also absorbs the factors
    after the last good index; this leaves the monodromy conjugate, not
    equal, to ``C_hat_d B_hat_d ... C_hat_1 B_hat_1``.
    """
    t = tuple(int(x) for x in t)
    m = ctx.layout.m
    if not ctx.good:
        return NicenessResult(t, "no-good-blocks", (), (), (), ctx.log_cutoff)
    d = ctx.d
    C = [_C(ctx, i, t[i]) for i in range(m)]
    Bm = [np.ldexp(P, e) for P, e in ctx.B]
    B_hat = []
    for jj, i in enumerate(ctx.good):
        prev = ctx.good[jj - 1] if jj > 0 else ctx.good[-1] - m
        D = np.eye(2)
        for q in range(prev + 1, i):
            qq = q % m
            D = C[qq] @ Bm[qq] @ D
        B_hat.append(Bm[i] @ D)
    dirs = []
    for Bh in B_hat:
        try:
            dirs.append(cocycle.singular_directions(Bh))
        except ConditioningError:
            dirs.append(None)
    angles: list[float] = []
    flags: list[bool | None] = []
    for jj in range(d):
        cur, nxt = dirs[jj], dirs[(jj + 1) % d]
        if cur is None or nxt is None or cur.degenerate or nxt.degenerate:
            angles.append(math.nan)
            flags.append(None)
            continue
        image = C[ctx.good[jj]] @ cocycle.direction_vector(cur.u)
        ang = cocycle.projective_angle(image, cocycle.direction_vector(nxt.s))
        angles.append(ang)
        flags.append(ang >= ctx.theta)
    resid = None
    for Bh, sd in zip(B_hat, dirs):
        if sd is not None and not sd.degenerate and sd.sigma < 1e4:
            z = cocycle.direction_vector(sd.s + 0.7)
            r_ = tan_identity_residual(Bh, z)
            resid = r_ if resid is None else max(resid, r_)
    return NicenessResult(t, "classified", tuple(ctx.good), tuple(angles), tuple(flags), ctx.log_cutoff, resid)


@dataclass
class NicenessCensus:
    E: float
    lam: float
    r: int
    m: int
    results: list[NicenessResult]

    @property
    def not_very_nice(self) -> int:
        return sum(1 for res in self.results if res.very_nice is not True)

    @property
    def bound(self) -> int:
        return self.m * self.r ** (self.m - 1)

    @property
    def within_bound(self) -> bool:
        return self.not_very_nice <= self.bound

    def to_csv(self) -> str:
        d = max((len(res.angles) for res in self.results), default=0)
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t"] + [f"angle_{j + 1}" for j in range(d)] + ["very_nice"])
        for res in self.results:
            vn = res.very_nice
            row = [";".join(str(x) for x in res.t)]
            row += [repr(a) for a in res.angles] + [""] * (d - len(res.angles))
            row.append("inconclusive" if vn is None else int(vn))
            wr.writerow(row)
        return buf.getvalue()


def niceness_census(W, layout: BlockLayout, params: InductionParams, E: float, lam: float) -> NicenessCensus:
    """Classify every ``t`` in ``{0..r-1}^m`` at one ``(E, lam)``."""
    ctx = niceness_context(W, layout, params, E, lam)
    results = [classify_niceness(t, ctx) for t in all_t(layout.r, layout.m)]
    return NicenessCensus(float(E), float(lam), layout.r, layout.m, results)


# the lemma ---------------------------------------------------------------------------


def explicit_log_bound(n_K: int, delta: float, m: int, r: int, n_k: int) -> float:
    """``log(4 pi n_K e^{-delta m (r-1) n_k**2})``."""
    return math.log(4.0 * math.pi * n_K) - delta * m * (r - 1) * n_k * n_k


@dataclass
class MemberMeasure:
    t: tuple[int, ...]
    lam: float
    log_measure: float
    log_certified_C: float
    route: str  # status of the norm-threshold route
    passed: bool
    weak_passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__, t=list(self.t))


@dataclass
class MeasureCheck:
    lam: float
    delta: float
    hypothesis_min: float
    hypothesis_needed: float
    applicable: bool
    log_bound: float | None = None
    log_weak_bound: float | None = None
    members: list = field(default_factory=list)

    @property
    def passed(self) -> bool | None:
        if not self.applicable:
            return None
        return all(mm.passed for mm in self.members)

    @property
    def weak_passed(self) -> bool | None:
        if not self.applicable:
            return None
        return all(mm.weak_passed for mm in self.members)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["members"] = [mm.to_dict() for mm in self.members]
        d["status"] = "not applicable" if not self.applicable else ("pass" if self.passed else "fail")
        d["weak_status"] = None if not self.applicable else ("pass" if self.weak_passed else "fail")
        return d


@dataclass
class InductionCertificate:
    K: int
    n_k: int
    n_K: int
    m: int
    r: int
    amp: float
    partition: list
    family_size: int
    sampled: bool
    drift: float
    drift_grid: dict
    diameter: float
    diameter_bound: float
    diameter_exponent: float
    amp_exponent: float
    measure_checks: list = field(default_factory=list)

    @property
    def diameter_ok(self) -> bool:
        return self.diameter <= self.diameter_bound

    @property
    def measure_ok(self) -> bool:
        return all(mc.passed is not False for mc in self.measure_checks)

    @property
    def passed(self) -> bool:
        return self.diameter_ok and self.measure_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["measure_checks"] = [mc.to_dict() for mc in self.measure_checks]
        d["diameter_ok"] = self.diameter_ok
        d["measure_ok"] = self.measure_ok
        d["passed"] = self.passed
        return d


@dataclass
class InductionResult:
    family: PotentialFamily
    t_values: list
    base: PeriodicPotential
    layout: BlockLayout
    certificate: InductionCertificate


def measure_check(
    family: PotentialFamily,
    t_values,
    layout: BlockLayout,
    lam: float,
    delta: float,
    hypothesis_min: float,
    members_to_check=None,
) -> MeasureCheck:
    """Compare member measures with the explicit and the weak bound at one coupling.

    The hypothesis is ``min_E L(E, lam W) >= delta * m * n_k``; the norm
    threshold passed to the measure check is ``delta m (r-1) n_k**2``, taken
    at the starts of the segments over ``(r-1) n_k`` steps.
    """
    m, r, n_k, n_K = layout.m, layout.r, layout.n_k, layout.n_K
    needed = delta * m * n_k
    check = MeasureCheck(float(lam), float(delta), float(hypothesis_min), needed, hypothesis_min >= needed)
    if not check.applicable:
        return check
    check.log_bound = explicit_log_bound(n_K, delta, m, r, n_k)
    check.log_weak_bound = -delta * n_K / 2.0
    log_C = delta * m * (r - 1) * n_k * n_k
    sites = [layout.partition[i] * n_k for i in range(m)]
    idx = range(family.count) if members_to_check is None else members_to_check
    for q in idx:
        w = family[q]
        rep = verify_norm_measure_bound(w, lam, log_C=log_C, sites=sites, steps=[(r - 1) * n_k])
        check.members.append(
            MemberMeasure(
                tuple(t_values[q]),
                float(lam),
                rep.log_measure,
                rep.log_certified_C,
                rep.status,
                bool(rep.log_measure <= check.log_bound + 1e-12),
                bool(rep.log_measure <= check.log_weak_bound),
            )
        )
    return check


def lemma_induction(
    W,
    K: int,
    params: InductionParams,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
    *,
    M: float = 1.0,
    hypotheses=(),
    drift_energy_count: int = 101,
    drift_lambda_count: int = 5,
    family_limit: int = 4096,
    measure_members: int | None = None,
    seed: int = 0,
) -> InductionResult:
    """Staircase family at level K and its certificate.

    ``hypotheses`` lists ``(lam, delta, hypothesis_min)`` triples, where
    ``hypothesis_min`` is a grid minimum of ``L(E, lam W)``. Families larger
    than ``family_limit`` are replaced by a seeded sample that keeps both
    corners of the staircase.
    """
    W = as_family(W)
    n_k = W.period
    if n_k < 2:
        raise ParameterError("the induction step needs members of period >= 2")
    n_K = schedule.period(K)
    layout = block_layout(W.count, n_k, n_K, params)
    base = _block_values(W, layout)
    ts = sample_t(layout.r, layout.m, family_limit, seed)
    sampled = len(ts) < layout.r**layout.m
    family = build_staircase_family(base, layout, params, ts)

    dgrid = grids.DriftGrid.square(M, drift_energy_count, drift_lambda_count)
    ref = grids.family_lyapunov_grid(dgrid.energies, dgrid.lams, W.members)
    pick = _spread(family.count, measure_members)
    new = grids.family_lyapunov_grid(dgrid.energies, dgrid.lams, [family[q] for q in pick])
    drift = grids.grid_sup_difference(new, ref)

    diam = family_diameter(family)
    cert = InductionCertificate(
        K=K,
        n_k=n_k,
        n_K=n_K,
        m=layout.m,
        r=layout.r,
        amp=params.amplitude,
        partition=list(layout.partition),
        family_size=layout.r**layout.m,
        sampled=sampled,
        drift=drift,
        drift_grid=dgrid.spec(),
        diameter=diam,
        diameter_bound=float(n_K) ** (-params.diameter_exponent),
        diameter_exponent=params.diameter_exponent,
        amp_exponent=params.amp_exponent,
    )
    for lam, delta, hmin in hypotheses:
        cert.measure_checks.append(measure_check(family, ts, layout, lam, delta, hmin, pick))
    return InductionResult(family, ts, base, layout, cert)


def _spread(total: int, count: int | None) -> list[int]:
    if count is None or count >= total:
        return list(range(total))
    return sorted(set(int(round(x)) for x in np.linspace(0, total - 1, count)))


def member_measure(w: PeriodicPotential, lam: float = 1.0) -> float:
    return compute_bands(w, lam).measure


__all__ = [
    "BlockLayout",
    "InductionCertificate",
    "InductionResult",
    "MeasureCheck",
    "NicenessCensus",
    "NicenessContext",
    "NicenessResult",
    "all_t",
    "block_layout",
    "build_block_potential",
    "build_staircase_family",
    "classify_niceness",
    "cutoff_exponent",
    "default_partition",
    "explicit_log_bound",
    "lemma_induction",
    "measure_check",
    "member_measure",
    "niceness_census",
    "niceness_context",
    "repetition_count",
    "sample_t",
    "staircase_member",
    "tan_identity_residual",
]
