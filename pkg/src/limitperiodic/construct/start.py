"""Gap-opening perturbations and constant-shift families.

A member ``w`` of period ``n_k`` is embedded at a longer period ``n_K`` and
its last site is raised by ``j / N1``. For some ``j <= 2 n_k + 1`` every gap
of the embedded spectrum opens. Shifting that candidate by
``l * S / N2`` for ``l = 0..N2`` then leaves no energy inside every
spectrum, which forces a positive family exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..bands import compute_bands
from ..errors import ConstructionError, ParameterError, ScheduleError
from ..odometer import (
    DEFAULT_SCHEDULE,
    Ball,
    GroupSchedule,
    PeriodicPotential,
    PotentialFamily,
    as_family,
    embed,
)
from . import grids
from .params import JoiningSettings, StartParams, required_N2

GAP_FLOOR = 1e-12  # gaps below this (relative to 1 + |E|) are not resolved in double precision


def build_start_candidates(
    w: PeriodicPotential,
    K: int | None,
    params: StartParams,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
) -> list[PeriodicPotential]:
    """``w`` embedded at level K with site ``n_K - 1`` raised by ``j / N1``, j = 1..2n_k+1."""
    K = params.K if K is None else K
    n_K = schedule.period(K)
    n_k = w.period
    if n_K % n_k or n_K <= n_k:
        raise ScheduleError(f"period {n_k} is not a proper divisor of n_K = {n_K}")
    base = embed(w, n_K).values
    out = []
    for j in range(1, 2 * n_k + 2):
        vals = base.copy()
        vals[-1] += j / params.N1
        out.append(PeriodicPotential(vals))
    return out


def _touch_points(spec) -> list[float]:
    pts = [b.hi for b in spec.bands[:-1] if b.touches_next]
    pts += [0.5 * (spec.bands[k - 1].hi + spec.bands[k].lo) for k in spec.near_touches]
    return sorted(pts)


def _min_gap(spec) -> float:
    gaps = spec.gaps()
    if not gaps:
        return math.inf
    return min(b - a for a, b in gaps)


@dataclass(frozen=True)
class GapSelection:
    """Least gap-opening candidate at one coupling."""

    lam: float
    j: int
    delta: float
    component_counts: tuple[int, ...]
    touching: tuple[tuple[float, ...], ...]

    @property
    def resolved(self) -> bool:
        return self.delta > GAP_FLOOR

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "j": self.j,
            "delta": self.delta,
            "resolved": self.resolved,
            "component_counts": list(self.component_counts),
        }


def select_gap_opening_j(candidates, lam: float) -> GapSelection:
    """Least ``j`` (1-based) whose spectrum at coupling ``lam`` has ``n_K`` components.

    ``delta`` is the smallest gap of that spectrum. Raises
    :class:`ConstructionError` listing touching energies when no candidate
    opens every gap.
    """
    counts: list[int] = []
    touching: list[tuple[float, ...]] = []
    for j, cand in enumerate(candidates, start=1):
        spec = compute_bands(cand, lam)
        counts.append(spec.component_count)
        touching.append(tuple(_touch_points(spec)))
        if spec.component_count == cand.period:
            return GapSelection(float(lam), j, _min_gap(spec), tuple(counts), tuple(touching))
    raise ConstructionError(
        f"no candidate opens every gap at lambda={lam}",
        {"lam": float(lam), "component_counts": counts, "touching": [list(t) for t in touching]},
    )


def build_shifted_family(w_j: PeriodicPotential, params: StartParams, delta: float) -> PotentialFamily:
    """``w_j + l * S / N2`` for ``l = 0..N2`` with ``S = params.shifts_total(n_K)``.

    The shift step scaled by any ``|lam| <= M`` must stay below ``delta``;
    that is ``N2 > M * S / delta``, which for the default ``S = 4 pi M / n_K``
    reads ``N2 > 4 pi M**2 / (delta n_K)``.
    """
    if params.N2 is None:
        raise ParameterError("N2 must be set to build the shifted family")
    S = params.shifts_total(w_j.period)
    if not delta > 0 or not params.N2 > params.M * S / delta:
        raise ParameterError(
            f"N2={params.N2} must exceed M*S/delta = {params.M * S / delta if delta > 0 else math.inf}"
        )
    return PotentialFamily(tuple(w_j.shifted(S * l / params.N2) for l in range(params.N2 + 1)))


def shift_witnesses(components, lam: float, shift_total: float, N2: int, energies) -> np.ndarray:
    """Per energy, whether some ``l`` puts ``E - lam * S * l / N2`` outside the spectrum.

    Only the gap directly below the component holding E is tried, which is
    enough whenever the shift step is smaller than every gap.
    """
    E = np.asarray(energies, dtype=float)
    comps = np.asarray(components, dtype=float).reshape(-1, 2)
    lo, hi = comps[:, 0], comps[:, 1]
    idx = np.searchsorted(lo, E, side="right") - 1
    inside = (idx >= 0) & (E <= hi[np.clip(idx, 0, None)])
    ok = ~inside
    if not np.any(inside):
        return ok
    k = idx[inside]
    e = E[inside]
    step = lam * shift_total / N2
    below = np.where(k > 0, hi[np.clip(k - 1, 0, None)], -np.inf)
    # smallest l with E - l*step < lo[k]
    l_first = np.floor((e - lo[k]) / step) + 1.0
    x = e - l_first * step
    ok[inside] = (l_first <= N2) & (x > below) & (x < lo[k])
    return ok


@dataclass(frozen=True, eq=False)
class ShiftedFamily:
    """The family ``{w^{K,j,l}}`` over all bases, all j and all shifts, kept lazy.

    Members are produced on demand; averages over all shifts use at most
    ``shift_cap`` evenly spaced shifts.
    """

    K: int
    n_K: int
    N1: int
    N2: int
    shift_total: float
    bases: tuple[PeriodicPotential, ...]

    @property
    def n_k(self) -> int:
        return self.bases[0].period

    @property
    def j_count(self) -> int:
        return 2 * self.n_k + 1

    @property
    def count(self) -> int:
        return len(self.bases) * self.j_count * (self.N2 + 1)

    def shift(self, l: int) -> float:
        return self.shift_total * l / self.N2

    def candidate(self, b: int, j: int) -> PeriodicPotential:
        vals = embed(self.bases[b], self.n_K).values.copy()
        vals[-1] += j / self.N1
        return PeriodicPotential(vals)

    def member(self, b: int, j: int, l: int) -> PeriodicPotential:
        return self.candidate(b, j).shifted(self.shift(l))

    def shift_indices(self, cap: int) -> np.ndarray:
        if self.N2 + 1 <= cap:
            return np.arange(self.N2 + 1)
        return np.unique(np.round(np.linspace(0, self.N2, cap)).astype(np.int64))

    def materialize(self, limit: int = 100_000) -> PotentialFamily:
        if self.count > limit:
            raise ParameterError(f"family of {self.count} members exceeds the limit {limit}")
        return PotentialFamily(
            tuple(
                self.member(b, j, l)
                for b in range(len(self.bases))
                for j in range(1, self.j_count + 1)
                for l in range(self.N2 + 1)
            )
        )

    def lyapunov_grid(self, energies, lams, *, bases=None, js=None, shift_cap: int = 257) -> np.ndarray:
        """Mean of ``L(E, lam w^{K,j,l})`` over the selected bases, j and shift sample."""
        energies = np.asarray(energies, dtype=float)
        bases = range(len(self.bases)) if bases is None else bases
        js = range(1, self.j_count + 1) if js is None else js
        ls = self.shift_indices(shift_cap)
        acc = np.zeros((len(lams), energies.size))
        count = 0
        for b in bases:
            for j in js:
                u = self.candidate(b, j).values
                for a, lam in enumerate(lams):
                    shifted = energies[None, :] - lam * (self.shift_total * ls / self.N2)[:, None]
                    L = grids.potential_lyapunov(shifted.ravel(), lam * u).reshape(shifted.shape)
                    acc[a] += L.sum(axis=0)
                count += ls.size
        return acc / count


@dataclass
class StartClaims:
    """Both start-step claims for one seed, level and coupling."""

    lam: float
    n_K: int
    selection: GapSelection
    components: list
    N2: int
    shift_total: float
    energies: np.ndarray
    witnessed: np.ndarray

    @property
    def claim1(self) -> bool:
        return len(self.components) == self.n_K

    @property
    def claim2(self) -> bool:
        return bool(self.witnessed.all())


def start_claims(
    w: PeriodicPotential,
    K: int,
    lam: float,
    params: StartParams,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
    energy_step: float = 1e-3,
) -> StartClaims:
    """Pick the gap-opening j at ``lam``, size the shifts and test both claims on the window grid."""
    n_K = schedule.period(K)
    cands = build_start_candidates(w, K, params, schedule)
    sel = select_gap_opening_j(cands, lam)
    spec = compute_bands(cands[sel.j - 1], lam)
    S = params.shifts_total(n_K)
    N2 = params.N2 if params.N2 is not None else required_N2(params.M, max(sel.delta, GAP_FLOOR), S)
    half = grids.window_half_width(w.sup_norm() + (2 * w.period + 1) / params.N1 + S, [lam])
    energies = grids.symmetric_grid(half, energy_step)
    comps = spec.components()
    ok = shift_witnesses(comps, lam, S, N2, energies)
    return StartClaims(float(lam), n_K, sel, comps, N2, S, energies, ok)


def evenly_spaced_indices(total: int, count: int) -> list[int]:
    if count >= total:
        return list(range(total))
    return sorted(set(int(round(x)) for x in np.linspace(0, total - 1, count)))


def search_N1(
    bases,
    n_K: int,
    K: int,
    drift_grid: grids.DriftGrid,
    max_perturbation: float,
    max_power: int = 40,
    drift_tol: float | None = None,
) -> tuple[int, float]:
    """Smallest ``N1 = 2**p`` keeping every candidate within ``1/K`` of its base.

    ``drift_tol`` tightens ``1/K`` when given.

    The drift is the grid sup of ``|L(E, lam w^{K,j}) - L(E, lam w)|``,
    checked for ``j`` = 1, n_k+1 and 2n_k+1. Candidates must also move
    their base by at most ``max_perturbation``.
    """
    n_k = bases[0].period
    js = sorted({1, n_k + 1, 2 * n_k + 1})
    refs = [grids.member_lyapunov_grid(drift_grid.energies, drift_grid.lams, w.values) for w in bases]
    last = math.inf
    for p in range(1, max_power + 1):
        N1 = 2**p
        if (2 * n_k + 1) / N1 > max_perturbation:
            continue
        worst = 0.0
        for w, ref in zip(bases, refs):
            emb = embed(w, n_K).values
            for j in js:
                vals = emb.copy()
                vals[-1] += j / N1
                L = grids.member_lyapunov_grid(drift_grid.energies, drift_grid.lams, vals)
                worst = max(worst, grids.grid_sup_difference(L, ref))
        last = worst
        if worst < (1.0 / K if drift_tol is None else min(1.0 / K, drift_tol)):
            return N1, worst
    raise ConstructionError(
        "N1 search exhausted",
        {"max_power": max_power, "last_drift": last, "max_perturbation": max_perturbation},
    )


@dataclass
class StartLevelReport:
    K: int
    n_K: int
    N1: int | None = None
    N1_drift: float | None = None
    N2: int | None = None
    shift_total: float | None = None
    shift_policy: str = "paper"
    delta: float | None = None
    delta_resolved: bool = True
    selections: list = field(default_factory=list)
    claim1: bool = False
    claim2: bool | None = None
    claim2_fraction: float | None = None
    perturbation: float | None = None
    room: float | None = None
    fits_ball: bool = False
    drift: float | None = None
    positive: bool | None = None
    min_lyapunov: dict = field(default_factory=dict)
    failure: str | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["selections"] = [s.to_dict() if hasattr(s, "to_dict") else s for s in self.selections]
        return d


@dataclass
class StartResult:
    family: ShiftedFamily | None
    level: int | None
    reports: list[StartLevelReport]
    selections: dict = field(default_factory=dict)  # (base index, lam) -> GapSelection

    @property
    def drifts(self) -> list[float]:
        return [r.drift for r in self.reports if r.drift is not None]

    def drift_decreasing(self, jitter: float = 0.1) -> bool:
        d = self.drifts
        return all(b <= a * (1.0 + jitter) for a, b in zip(d, d[1:]))

    def to_dict(self) -> dict:
        return {"level": self.level, "reports": [r.to_dict() for r in self.reports]}


def _measured_shift(selections, candidates_at, margin: float) -> float:
    worst = 0.0
    for (b, lam), sel in selections.items():
        spec = compute_bands(candidates_at(b, sel.j), lam)
        longest = max(hi - lo for lo, hi in spec.components())
        worst = max(worst, longest / lam)
    return margin * worst


def start_level(
    W: PotentialFamily,
    ball: Ball,
    M: float,
    K: int,
    settings: JoiningSettings,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
    *,
    convergence: bool = False,
    n1_drift: float | None = None,
) -> tuple[StartLevelReport, ShiftedFamily | None, dict]:
    """Run the start construction at one level and report on it."""
    W = as_family(W)
    n_K = schedule.period(K)
    report = StartLevelReport(K=K, n_K=n_K, shift_policy=settings.shift_policy)
    n_k = W.period
    if n_K % n_k or n_K <= n_k:
        report.failure = "level does not refine the family period"
        return report, None, {}
    base_idx = evenly_spaced_indices(W.count, settings.start_bases)
    bases = [W[b] for b in base_idx]
    room = ball.room(W)
    report.room = room
    if not room > 0:
        raise ConstructionError("family is not strictly inside the ball", {"room": room})

    dgrid = grids.DriftGrid.square(M, settings.drift_energy_count, settings.drift_lambda_count)
    try:
        N1, n1_drift = search_N1(
            bases, n_K, K, dgrid, settings.perturb_share * room, settings.n1_max_power, n1_drift
        )
    except ConstructionError as exc:
        report.failure = f"N1 search exhausted: {exc.diagnostics}"
        return report, None, {}
    report.N1 = N1
    report.N1_drift = n1_drift
    pert = (2 * n_k + 1) / N1
    report.perturbation = pert
    params = StartParams(M=max(M, 1.0), N1=N1, K=K)

    lams = grids.lambda_samples(M, settings.lambda_count)
    selections: dict = {}
    for b, w in zip(base_idx, bases):
        cands = build_start_candidates(w, K, params, schedule)
        for lam in lams:
            try:
                selections[(b, float(lam))] = select_gap_opening_j(cands, lam)
            except ConstructionError as exc:
                report.failure = f"Claim 1 failed: {exc.diagnostics}"
                return report, None, {}
    report.claim1 = True
    report.selections = [
        {"base": b, **sel.to_dict()} for (b, _), sel in sorted(selections.items())
    ]
    deltas = [sel.delta for sel in selections.values()]
    delta = min(deltas)
    report.delta_resolved = all(sel.resolved for sel in selections.values())
    delta_used = max(delta, GAP_FLOOR)
    report.delta = delta_used

    def cand_at(b, j):
        return build_start_candidates(W[b], K, params, schedule)[j - 1]

    S = params.shifts_total(n_K)
    if settings.shift_policy == "measured":
        S = min(S, _measured_shift(selections, cand_at, settings.shift_margin))
    report.shift_total = S
    N2 = required_N2(params.M, delta_used, S)
    report.N2 = N2
    report.fits_ball = bool(ball.max_distance(W) + pert + S < ball.radius)
    family = ShiftedFamily(K, n_K, N1, N2, S, tuple(W.members))

    # Claim 2 on the window grid, pointwise
    half = grids.window_half_width(W.sup_norm() + pert + S, lams)
    energies = grids.symmetric_grid(half, settings.energy_step)
    hits = 0
    total = 0
    for (b, lam), sel in selections.items():
        spec = compute_bands(cand_at(b, sel.j), lam)
        ok = shift_witnesses(spec.components(), lam, S, N2, energies)
        hits += int(ok.sum())
        total += ok.size
    report.claim2_fraction = hits / total
    report.claim2 = hits == total
    report.positive = report.claim2

    if convergence:
        js = evenly_spaced_indices(2 * n_k + 1, settings.pool_js)
        js = [j + 1 for j in js]
        ref = grids.family_lyapunov_grid(dgrid.energies, dgrid.lams, W.members)
        full = family.lyapunov_grid(
            dgrid.energies, dgrid.lams, bases=base_idx, js=js, shift_cap=settings.shift_sample
        )
        report.drift = grids.grid_sup_difference(full, ref)
        three = np.array(sorted({1.0 / M, 1.0, float(M)}))
        Lmin = family.lyapunov_grid(energies, three, bases=base_idx, js=js, shift_cap=settings.shift_sample)
        report.min_lyapunov = {f"{lam:.6g}": float(Lmin[a].min()) for a, lam in enumerate(three)}
    return report, family, selections


def lemma_start(
    W,
    ball: Ball,
    M: float,
    levels,
    settings: JoiningSettings | None = None,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
    *,
    convergence: bool = True,
    stop_at_first: bool = False,
    n1_drift: float | None = None,
) -> StartResult:
    """Start construction over several levels.

    The returned family is the one at the first level whose family fits in
    the ball; the reports cover every level tried and, with
    ``convergence``, the grid drift against ``W`` at each level.
    """
    settings = settings or JoiningSettings()
    W = as_family(W)
    if not ball.contains_family(W):
        raise ConstructionError("family is not strictly inside the ball", {"room": ball.room(W)})
    reports = []
    chosen = None
    chosen_level = None
    chosen_sel: dict = {}
    for K in levels:
        report, family, sel = start_level(
            W, ball, M, K, settings, schedule, convergence=convergence, n1_drift=n1_drift
        )
        reports.append(report)
        ok = family is not None and report.fits_ball and report.claim1
        if ok and chosen is None:
            chosen, chosen_level, chosen_sel = family, K, sel
            if stop_at_first:
                break
    return StartResult(chosen, chosen_level, reports, chosen_sel)


__all__ = [
    "GAP_FLOOR",
    "GapSelection",
    "ShiftedFamily",
    "StartLevelReport",
    "StartClaims",
    "StartResult",
    "build_shifted_family",
    "build_start_candidates",
    "evenly_spaced_indices",
    "lemma_start",
    "search_N1",
    "select_gap_opening_j",
    "shift_witnesses",
    "start_claims",
    "start_level",
]
