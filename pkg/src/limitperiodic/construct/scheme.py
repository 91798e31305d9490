"""Joining step and the nested-ball iteration.

One joining step turns a family ``W`` inside a ball into a longer-period
family ``W'`` inside a much smaller ball whose members all have small
spectrum while ``L(E, lam W')`` stays close to ``L(E, lam W)``.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..bands import compute_bands
from ..errors import ConstructionError, ScheduleError
from ..odometer import (
    DEFAULT_SCHEDULE,
    Ball,
    GroupSchedule,
    PeriodicPotential,
    PotentialFamily,
    as_family,
    family_diameter,
)
from . import grids
from .induction import _block_values, block_layout, lemma_induction, repetition_count
from .params import InductionParams, JoiningSettings, SchemeSettings
from .start import evenly_spaced_indices, lemma_start

SELECTION_PENALTY = 10.0


@dataclass
class SubfamilySelection:
    counts: dict  # pool index -> multiplicity
    min_lyapunov: float
    drift: float

    @property
    def size(self) -> int:
        return sum(self.counts.values())

    def indices(self) -> list[int]:
        return [i for i in sorted(self.counts) for _ in range(self.counts[i])]


def select_subfamily(
    pos_L: np.ndarray,
    drift_L: np.ndarray,
    ref: np.ndarray,
    tau: float,
    m_min: int = 2,
    m_max: int = 32,
) -> SubfamilySelection | None:
    """Smallest multiset from the pool with positive grid minimum and drift <= ``tau``.

    ``pos_L`` holds each candidate's exponents on the positivity grid,
    ``drift_L`` on the drift grid, ``ref`` the reference exponent there.
    For each size a greedy build is refined by single swaps; the score is
    the grid minimum minus a penalty on drift beyond ``tau``.
    """
    P = pos_L.shape[0]

    def score(sum_pos, sum_drift, m):
        mins = (sum_pos / m).min(axis=-1)
        drifts = np.abs(sum_drift / m - ref).max(axis=-1)
        return mins - SELECTION_PENALTY * np.maximum(0.0, drifts - tau), mins, drifts

    for m in range(max(1, m_min), m_max + 1):
        counts = np.zeros(P, dtype=np.int64)
        sp = np.zeros(pos_L.shape[1])
        sd = np.zeros(drift_L.shape[1])
        for step in range(m):
            f, _, _ = score(sp[None, :] + pos_L, sd[None, :] + drift_L, step + 1)
            best = int(np.argmax(f))
            counts[best] += 1
            sp += pos_L[best]
            sd += drift_L[best]
        cur = float(score(sp, sd, m)[0])
        for _ in range(4 * m * P):
            improved = False
            for a in np.nonzero(counts)[0]:
                f, _, _ = score(sp[None, :] - pos_L[a] + pos_L, sd[None, :] - drift_L[a] + drift_L, m)
                b = int(np.argmax(f))
                if f[b] > cur + 1e-12 and b != a:
                    counts[a] -= 1
                    counts[b] += 1
                    sp += pos_L[b] - pos_L[a]
                    sd += drift_L[b] - drift_L[a]
                    cur = float(f[b])
                    improved = True
                    break
            if not improved:
                break
        _, mn, dr = score(sp, sd, m)
        if mn > 0 and dr <= tau:
            return SubfamilySelection({int(i): int(c) for i, c in enumerate(counts) if c}, float(mn), float(dr))
    return None


def _positivity_grids(lams, step: float, members, hull_members=None) -> list[np.ndarray]:
    """Hull grid plus the band centres of every member, per coupling."""
    hull_members = members if hull_members is None else hull_members
    lo = min(float(w.values.min()) for w in hull_members)
    hi = max(float(w.values.max()) for w in hull_members)
    out = []
    for lam in lams:
        base = grids.hull_grid(lo, hi, float(lam), step)
        centres = [compute_bands(w, lam).centers for w in members]
        out.append(np.unique(np.concatenate([base] + centres)))
    return out


def _stacked_lyapunov(grids_per_lam, lams, values: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [grids.potential_lyapunov(E, lam * values) for E, lam in zip(grids_per_lam, lams)]
    )


def _family_on_grids(grids_per_lam, lams, members) -> np.ndarray:
    acc = None
    for w in members:
        L = _stacked_lyapunov(grids_per_lam, lams, w.values)
        acc = L if acc is None else acc + L
    return acc / len(members)


def _split(flat: np.ndarray, grids_per_lam) -> list[np.ndarray]:
    sizes = np.cumsum([g.size for g in grids_per_lam])[:-1]
    return np.split(flat, sizes)


def _level_of(schedule: GroupSchedule, period: int) -> int:
    try:
        return schedule.level_of(period)
    except ScheduleError:
        return schedule.first_level_at_least(period) - 1


def digest_family(W: PotentialFamily) -> str:
    return hashlib.sha256(W.as_array().tobytes()).hexdigest()


@dataclass
class JoiningResult:
    ball: Ball
    family: PotentialFamily
    delta: float
    certificate: dict
    subfamily: PotentialFamily
    center_measure: float

    @property
    def passed(self) -> bool:
        return bool(self.certificate["passed"])


def lemma_joining(
    W,
    ball: Ball,
    M: float,
    settings: JoiningSettings | None = None,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
    *,
    radius_cap: float = math.inf,
) -> JoiningResult:
    """One joining step: start family, subfamily selection, staircase, new ball.

    The new ball is centred at the staircase member ``t = 0`` with radius
    ``ball_radius_factor`` times the family diameter. The staircase
    amplitude is lowered when needed so that this radius respects
    ``radius_cap``, the ``1/M`` diameter bound, the measure transfer and
    closure inside ``ball``.
    """
    settings = settings or JoiningSettings()
    W = as_family(W)
    M = float(M)
    if not ball.contains_family(W):
        raise ConstructionError("family is not strictly inside the ball", {"room": ball.room(W)})
    tau = settings.drift_fraction / M
    cert: dict = {"M": M, "settings": settings.to_dict(), "drift_target": tau}

    # start family
    k = _level_of(schedule, W.period)
    levels = range(k + 1, min(k + 1 + settings.start_levels, len(schedule)))
    start = lemma_start(
        W, ball, M, levels, settings, schedule, convergence=False, stop_at_first=True, n1_drift=0.5 * tau
    )
    cert["start"] = start.to_dict()
    fam = start.family
    if fam is None:
        raise ConstructionError("start construction did not fit in the ball", cert)

    # pool of start members
    pool_keys = []
    for (b, _), sel in sorted(start.selections.items()):
        for l in evenly_spaced_indices(fam.N2 + 1, settings.pool_shifts):
            key = (b, sel.j, l)
            if key not in pool_keys:
                pool_keys.append(key)
    pool = [fam.member(*key) for key in pool_keys]
    lams = grids.lambda_samples(M, settings.lambda_count)
    pgrids = _positivity_grids(lams, settings.energy_step, pool)
    pos_L = np.stack([_stacked_lyapunov(pgrids, lams, w.values) for w in pool])
    dgrid = grids.DriftGrid.square(M, settings.drift_energy_count, settings.drift_lambda_count)
    ref_members = [W[q] for q in evenly_spaced_indices(W.count, settings.member_sample)]
    ref = grids.family_lyapunov_grid(dgrid.energies, dgrid.lams, ref_members).ravel()
    drift_L = np.stack(
        [grids.member_lyapunov_grid(dgrid.energies, dgrid.lams, w.values).ravel() for w in pool]
    )
    sel = select_subfamily(pos_L, drift_L, ref, tau, 2, settings.family_size_max)
    if sel is None:
        raise ConstructionError("no subfamily with positive exponent and small drift", cert)
    chosen = sel.indices()
    W_tilde = PotentialFamily(tuple(pool[i] for i in chosen))
    delta_tilde = 0.5 * sel.min_lyapunov
    per_lam_min = [float(x.min()) for x in _split(sum(pos_L[i] for i in chosen) / len(chosen), pgrids)]
    cert["subfamily"] = {
        "members": [list(pool_keys[i]) for i in chosen],
        "size": len(chosen),
        "period": W_tilde.period,
        "min_lyapunov": sel.min_lyapunov,
        "min_lyapunov_per_lambda": per_lam_min,
        "drift": sel.drift,
        "pool_size": len(pool),
    }

    # staircase
    m = W_tilde.count
    n_s = W_tilde.period
    K = schedule.first_level_at_least(m * n_s * settings.r_min, _level_of(schedule, n_s))
    n_K = schedule.period(K)
    r = repetition_count(n_K, m, n_s)
    amp_raw = float(r) ** (-settings.amp_exponent)
    probe = InductionParams(r=r, amp=amp_raw, diameter_exponent=settings.diameter_exponent)
    base = _block_values(W_tilde, block_layout(m, n_s, n_K, probe))
    d0 = ball.distance_to_center(base)
    mlam_idx = evenly_spaced_indices(len(lams), settings.measure_lambda_count)
    # the t = 0 member does not depend on the amplitude, so its spectra fix the transfer room
    centre_specs = {a: compute_bands(base, float(lams[a])) for a in mlam_idx}
    transfer = min(
        settings.measure_share * (1.0 / M - sp.measure) / (2.0 * sp.component_count * float(lams[a]))
        for a, sp in centre_specs.items()
    )
    limits = {
        "diameter_over_M": 0.5 / M,
        "measure_transfer": transfer,
        "closure": 0.5 * (ball.radius - d0),
        "radius_cap": radius_cap,
    }
    radius_max = min(limits.values())
    if not radius_max > 0:
        raise ConstructionError("no room for the new ball", dict(cert, limits=limits))
    amp_max = radius_max / (settings.ball_radius_factor * (r - 1))
    amp = min(amp_raw, amp_max)
    cert["amplitude"] = {
        "raw": amp_raw,
        "used": amp,
        "clipped": amp < amp_raw,
        "binding": min(limits, key=limits.get) if amp < amp_raw else None,
        "limits": {k_: (v if math.isfinite(v) else None) for k_, v in limits.items()},
    }
    params = InductionParams(
        r=r, amp_exponent=settings.amp_exponent, amp=amp, diameter_exponent=settings.diameter_exponent
    )
    hyps = [(float(lams[a]), delta_tilde / (m * n_s), per_lam_min[a]) for a in mlam_idx]
    ind = lemma_induction(
        W_tilde,
        K,
        params,
        schedule,
        M=M,
        hypotheses=hyps,
        drift_energy_count=settings.drift_energy_count,
        drift_lambda_count=settings.drift_lambda_count,
        family_limit=settings.family_limit,
        measure_members=min(settings.member_sample, 8),
        seed=settings.seed,
    )
    cert["induction"] = ind.certificate.to_dict()
    W_new = ind.family
    diam = family_diameter(W_new)
    new_ball = Ball(ind.base, settings.ball_radius_factor * diam)

    # item (1): drift against W
    sample = [W_new[q] for q in evenly_spaced_indices(W_new.count, settings.member_sample)]
    newL = grids.family_lyapunov_grid(dgrid.energies, dgrid.lams, sample).ravel()
    drift = float(np.max(np.abs(newL - ref)))
    # item (2): exponent above delta on window grid and member band centres
    few = [W_new[q] for q in evenly_spaced_indices(W_new.count, min(settings.member_sample, 4))]
    g2 = _positivity_grids(lams, settings.energy_step, few, sample)
    L2 = _family_on_grids(g2, lams, sample)
    min_L = float(L2.min())
    # any delta works as long as both exponents clear it; at small r the new family is the tighter one
    delta = min(delta_tilde, 0.5 * min_L)
    cert["delta_subfamily"] = delta_tilde
    cert["delta"] = delta
    # item (3): measure transfer to the whole ball
    items3 = []
    for a in mlam_idx:
        lam = float(lams[a])
        spec = compute_bands(new_ball.center, lam)
        total = spec.measure + 2.0 * spec.component_count * lam * new_ball.radius
        items3.append(
            {
                "lam": lam,
                "center_measure": spec.measure,
                "center_log_measure": spec.log_measure,
                "components": spec.component_count,
                "transferred_bound": total,
                "ok": total <= 1.0 / M,
            }
        )
    center_measure = compute_bands(new_ball.center, 1.0).measure
    closure = new_ball.closure_inside(ball)
    cert["joining"] = {
        "drift": drift,
        "drift_ok": drift <= 1.0 / M,
        "drift_grid": dgrid.spec(),
        "min_lyapunov": min_L,
        "lyapunov_ok": min_L > delta,
        "energy_step": settings.energy_step,
        "lambdas": [float(x) for x in lams],
        "measure": items3,
        "measure_ok": all(it["ok"] for it in items3),
        "radius": new_ball.radius,
        "radius_ok": 2.0 * new_ball.radius <= 1.0 / M,
        "closure_ok": closure,
        "contains_family": new_ball.contains_family(W_new),
    }
    j = cert["joining"]
    cert["passed"] = bool(
        j["drift_ok"]
        and j["lyapunov_ok"]
        and j["measure_ok"]
        and j["radius_ok"]
        and j["closure_ok"]
        and j["contains_family"]
        and ind.certificate.passed
    )
    return JoiningResult(new_ball, W_new, delta, cert, W_tilde, center_measure)


@dataclass
class StageCertificate:
    """Record of one iteration stage."""

    stage: int
    ball: Ball
    family: PotentialFamily
    delta: float
    eps: float
    M: float
    M_used: float
    measure_bound: float
    lyap_lower: dict
    lyap_drift: float
    center_measure: float
    explicit_bounds: list
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "ball": {
                "center_period": self.ball.center.period,
                "center": self.ball.center.values.tolist(),
                "radius": self.ball.radius,
            },
            "family": {
                "count": self.family.count,
                "period": self.family.period,
                "diameter": family_diameter(self.family),
                "sha256": digest_family(self.family),
            },
            "delta": self.delta,
            "eps": self.eps,
            "M": self.M,
            "M_used": self.M_used,
            "measure_bound": self.measure_bound,
            "lyap_lower": self.lyap_lower,
            "lyap_drift": self.lyap_drift,
            "center_measure": self.center_measure,
            "explicit_bounds": self.explicit_bounds,
            "passed": self.passed,
            "details": self.details,
        }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


@dataclass
class SchemeResult:
    certificates: list[StageCertificate]
    w_infinity: PeriodicPotential
    error_bound: float
    failure: dict | None = None
    timings: list = field(default_factory=list)

    @property
    def measures(self) -> list[float]:
        return [c.center_measure for c in self.certificates]

    @property
    def measures_decreasing(self) -> bool:
        m = self.measures
        return all(b < a for a, b in zip(m, m[1:]))

    @property
    def passed(self) -> bool:
        return self.failure is None and all(c.passed for c in self.certificates)

    def to_dict(self) -> dict:
        return {
            "stages": [c.to_dict() for c in self.certificates],
            "w_infinity_period": self.w_infinity.period,
            "error_bound": self.error_bound,
            "measures": self.measures,
            "measures_decreasing": self.measures_decreasing,
            "failure": self.failure,
            "passed": self.passed,
        }


def iterate_scheme(
    B0: Ball,
    W0,
    eps_1: float,
    depth: int,
    settings: SchemeSettings | None = None,
    schedule: GroupSchedule = DEFAULT_SCHEDULE,
) -> SchemeResult:
    """Nested balls ``B_1 > B_2 > ...`` with ``M_i = 1/eps_i`` and ``eps_{i+1} = min(eps_i, delta_i)/10``.

    ``M_i`` is capped at ``settings.M_cap``; the cap actually used is
    recorded per stage. The last centre approximates the limit potential
    within the last radius.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not 0 < eps_1 <= 1:
        raise ValueError("eps_1 must lie in (0, 1]")
    settings = settings or SchemeSettings()
    W = as_family(W0)
    ball = B0
    eps = float(eps_1)
    certs: list[StageCertificate] = []
    timings = []
    failure = None
    radius_cap = math.inf
    for i in range(1, depth + 1):
        M_i = 1.0 / eps
        M = min(M_i, settings.M_cap)
        st = settings.for_stage(i - 1)
        t0 = time.perf_counter()
        try:
            res = lemma_joining(W, ball, M, st, schedule, radius_cap=radius_cap)
        except ConstructionError as exc:
            failure = {"stage": i, "message": str(exc), "diagnostics": exc.diagnostics}
            break
        timings.append(time.perf_counter() - t0)
        ind = res.certificate["induction"]
        bounds = []
        for mc in ind["measure_checks"]:
            bounds.append(
                {
                    "lam": mc["lam"],
                    "status": mc["status"],
                    "log_bound": mc["log_bound"],
                    "max_log_measure": max((mm["log_measure"] for mm in mc["members"]), default=None),
                }
            )
        j = res.certificate["joining"]
        certs.append(
            StageCertificate(
                stage=i,
                ball=res.ball,
                family=res.family,
                delta=res.delta,
                eps=eps,
                M=M_i,
                M_used=M,
                measure_bound=1.0 / M,
                lyap_lower={
                    "grid_min": j["min_lyapunov"],
                    "delta": res.delta,
                    "lambdas": j["lambdas"],
                    "energy_step": j["energy_step"],
                    "heuristic": True,
                },
                lyap_drift=j["drift"],
                center_measure=res.center_measure,
                explicit_bounds=bounds,
                passed=res.passed,
                details=res.certificate,
            )
        )
        if not res.passed:
            failure = {"stage": i, "message": "stage certificate failed"}
            break
        radius_cap = res.ball.radius * st.radius_decay
        eps = min(eps, res.delta) / 10.0
        W, ball = res.family, res.ball
    last = certs[-1].ball if certs else B0
    return SchemeResult(certs, last.center, last.radius, failure, timings)


__all__ = [
    "JoiningResult",
    "SchemeResult",
    "StageCertificate",
    "SubfamilySelection",
    "digest_family",
    "iterate_scheme",
    "lemma_joining",
    "select_subfamily",
    "to_json",
]
