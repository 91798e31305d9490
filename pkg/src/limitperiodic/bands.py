"""Band structure of periodic operators.

The spectrum of a period-n potential is ``{E : |psi(E)| <= 2}`` where
``psi`` is the monodromy trace. The 2n band edges are the eigenvalues of
the periodic (``psi = 2``) and antiperiodic (``psi = -2``) Hermitian
matrices on one period; sorted together they pair up as band edges. Both
matrices become bandwidth-2 after interleaving the sites, so the edges cost
one banded eigensolve each and no sign test on ``psi`` is ever needed (sign
tests fail once the transfer norms dwarf 2 in double precision).

Bands narrower than ``THIN_BAND`` cannot be resolved edge by edge. Their
length is taken from the slope at the centre, ``4 / |psi'|``, carried in log
form so that lengths far below the smallest double still add up to a usable
log-measure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg
from scipy.special import logsumexp

from . import _kernels
from .errors import AccuracyError, DomainError, IsolationError
from .odometer import PeriodicPotential, as_potential

EDGE_TOL = 1e-13  # absolute accuracy of banded eigenvalues at unit scale
TOUCH_GAP = 1e-9
ID_TOL = 1e-6
THIN_BAND = 1e-8
LOG4 = math.log(4.0)
LN2 = math.log(2.0)


@dataclass(frozen=True)
class Band:
    lo: float
    hi: float
    touches_prev: bool = False
    touches_next: bool = False
    log_length: float = field(default=float("nan"), compare=False)
    thin: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"band edges out of order: {self.lo} > {self.hi}")
        if math.isnan(self.log_length):
            ln = self.hi - self.lo
            object.__setattr__(self, "log_length", math.log(ln) if ln > 0 else -math.inf)

    @property
    def length(self) -> float:
        return math.exp(self.log_length)

    def __contains__(self, E):
        return self.lo <= E <= self.hi


@dataclass(frozen=True)
class SpectrumDescription:
    period: int
    coupling: float
    bands: tuple[Band, ...]
    centers: np.ndarray
    near_touches: tuple[int, ...] = ()
    tolerances: dict = field(default_factory=dict)

    @property
    def log_measure(self) -> float:
        return float(logsumexp([b.log_length for b in self.bands]))

    @property
    def measure(self) -> float:
        return math.exp(self.log_measure)

    @property
    def component_count(self) -> int:
        return 1 + sum(1 for b in self.bands[1:] if not b.touches_prev)

    def components(self) -> list[tuple[float, float]]:
        """Merged connected components as ``(lo, hi)`` pairs."""
        out = []
        for b in self.bands:
            if out and b.touches_prev:
                out[-1] = (out[-1][0], b.hi)
            else:
                out.append((b.lo, b.hi))
        return out

    def gaps(self) -> list[tuple[float, float]]:
        comps = self.components()
        return [(a[1], b[0]) for a, b in zip(comps, comps[1:])]

    def contains(self, E) -> np.ndarray:
        comps = np.array(self.components())
        E = np.asarray(E, dtype=float)
        idx = np.searchsorted(comps[:, 0], E, side="right") - 1
        ok = idx >= 0
        hi = comps[np.clip(idx, 0, None), 1]
        return ok & (E <= hi)


# evaluation helpers ---------------------------------------------------------


def _trace(E: np.ndarray, u: np.ndarray, deriv: bool = False):
    return _kernels.trace_batch(np.ascontiguousarray(E, dtype=float), u, deriv)


def discriminant(E, v, lam: float = 1.0):
    """Monodromy trace of ``lam * v`` at energy ``E`` (scalar or array)."""
    v = as_potential(v)
    arr = np.asarray(E, dtype=float)
    tr, _, ex = _trace(np.atleast_1d(arr).ravel(), lam * v.values)
    with np.errstate(over="ignore"):
        out = np.ldexp(tr, ex)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def discriminant_log_slope(E, u: np.ndarray) -> np.ndarray:
    """``log |psi'(E)|`` without overflow."""
    _, dtr, ex = _trace(np.atleast_1d(np.asarray(E, dtype=float)), u, True)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(dtr)) + ex * LN2


def _folded_order(n: int) -> np.ndarray:
    # 0, n-1, 1, n-2, ... puts cyclic neighbours at most two positions apart
    perm = np.empty(n, dtype=np.int64)
    perm[0::2] = np.arange((n + 1) // 2)
    perm[1::2] = n - 1 - np.arange(n // 2)
    return perm


def _floquet_banded(u: np.ndarray, phase: float) -> np.ndarray:
    """Lower banded storage of the one-period matrix with boundary phase ``phase``."""
    n = u.size
    perm = _folded_order(n)
    pos = np.empty(n, dtype=np.int64)
    pos[perm] = np.arange(n)
    ab = np.zeros((3, n))
    ab[0] = u[perm]
    p = pos
    q = pos[(np.arange(n) + 1) % n]
    val = np.ones(n)
    val[n - 1] = phase
    lo = np.minimum(p, q)
    off = np.abs(p - q)
    np.add.at(ab, (off, lo), val)
    return ab


def edge_eigenvalues(u: np.ndarray) -> np.ndarray:
    """Sorted solutions of ``psi = +-2`` with multiplicity (2n values)."""
    n = u.size
    if n <= 2:
        out = []
        for phase in (1.0, -1.0):
            H = np.diag(u).astype(float)
            if n == 1:
                H[0, 0] += 2 * phase
            else:
                H[0, 1] = H[1, 0] = 1.0 + phase
            out.append(np.linalg.eigvalsh(H))
        return np.sort(np.concatenate(out))
    try:
        per = linalg.eig_banded(_floquet_banded(u, 1.0), lower=True, eigvals_only=True)
        anti = linalg.eig_banded(_floquet_banded(u, -1.0), lower=True, eigvals_only=True)
    except linalg.LinAlgError as exc:
        raise IsolationError(f"banded eigensolver failed: {exc}", (float(u.min()) - 2, float(u.max()) + 2)) from exc
    return np.sort(np.concatenate([per, anti]))


def _is_plus_minus_identity(E: float, u: np.ndarray) -> bool:
    P, ex = _kernels.product_batch(np.array([E]), u, 0, u.size)
    if ex[0] > 4:
        return False
    M = np.ldexp(P[0], int(ex[0]))
    eye = np.eye(2)
    return bool(np.max(np.abs(M - eye)) <= ID_TOL or np.max(np.abs(M + eye)) <= ID_TOL)


_CACHE: OrderedDict = OrderedDict()
CACHE_SIZE = 64


def compute_bands(v, lam: float = 1.0) -> SpectrumDescription:
    """All n bands of ``lam * v`` in increasing order.

    Results for the most recent ``CACHE_SIZE`` distinct ``(v, lam)`` are
    kept, since the construction asks for the same spectra repeatedly.
    """
    v = as_potential(v)
    key = (hashlib.blake2b(v.values.tobytes(), digest_size=16).digest(), float(lam))
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        return hit
    spec = _compute_bands(v, float(lam))
    _CACHE[key] = spec
    if len(_CACHE) > CACHE_SIZE:
        _CACHE.popitem(last=False)
    return spec


def _compute_bands(v: PeriodicPotential, lam: float) -> SpectrumDescription:
    u = np.ascontiguousarray(lam * v.values, dtype=float)
    n = u.size
    edges = edge_eigenvalues(u)
    lo = edges[0::2].copy()
    hi = edges[1::2].copy()
    centers = 0.5 * (lo + hi)
    scale = 1.0 + np.abs(centers)
    thin = (hi - lo) < THIN_BAND * scale
    log_est = np.full(n, -np.inf)
    if np.any(thin):
        k = np.nonzero(thin)[0]
        # the slope is only trustworthy below the resolution it replaces
        log_est[k] = np.minimum(LOG4 - discriminant_log_slope(centers[k], u), np.log(THIN_BAND * scale[k]))
        half = 0.5 * np.exp(log_est[k])
        lo[k] = centers[k] - half
        hi[k] = centers[k] + half
        # slope-based extents of clustered thin bands may overlap; split at the midpoint
        for q in range(1, n):
            if lo[q] < hi[q - 1]:
                mid = 0.5 * (centers[q - 1] + centers[q])
                hi[q - 1] = min(hi[q - 1], mid)
                lo[q] = max(lo[q], mid)

    wide = np.nonzero(~thin)[0]
    if wide.size:
        tr, _, ex = _trace(centers[wide], u)
        bad = (ex == 0) & (np.abs(tr) > 2.0 + 1e-6)
        if np.any(bad):
            k = wide[np.nonzero(bad)[0][0]]
            raise IsolationError("band centre lies outside the spectrum", (float(lo[k]), float(hi[k])))

    touches = np.zeros(n + 1, dtype=bool)
    near = []
    for k in range(1, n):
        if lo[k] - hi[k - 1] < TOUCH_GAP:
            E = float(0.5 * (hi[k - 1] + lo[k]))
            if _is_plus_minus_identity(E, u):
                touches[k] = True
                hi[k - 1] = lo[k] = E
            else:
                near.append(k)

    bands = []
    for k in range(n):
        if thin[k]:
            ll = float(log_est[k])
        else:
            ll = math.log(hi[k] - lo[k]) if hi[k] > lo[k] else -math.inf
        bands.append(
            Band(
                float(lo[k]),
                float(hi[k]),
                bool(touches[k]),
                bool(touches[k + 1]),
                log_length=ll,
                thin=bool(thin[k]),
            )
        )
    centers.setflags(write=False)
    return SpectrumDescription(
        period=n,
        coupling=float(lam),
        bands=tuple(bands),
        centers=centers,
        near_touches=tuple(near),
        tolerances={
            "edge_tol": EDGE_TOL,
            "touch_gap": TOUCH_GAP,
            "identity_tol": ID_TOL,
            "thin_band": THIN_BAND,
        },
    )


def spectrum_measure(v, lam: float = 1.0) -> float:
    return compute_bands(v, lam).measure


# norm-measure bound ---------------------------------------------------------


@dataclass(frozen=True)
class NormMeasureReport:
    period: int
    log_certified_C: float
    log_C: float
    log_bound: float
    log_measure: float
    status: str  # "pass" | "fail" | "inconclusive"

    @property
    def certified_C(self) -> float:
        return math.exp(min(self.log_certified_C, 700.0))

    @property
    def bound(self) -> float:
        return math.exp(min(self.log_bound, 700.0))

    @property
    def measure(self) -> float:
        return math.exp(self.log_measure)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "log_certified_C": self.log_certified_C,
            "log_C": self.log_C,
            "log_bound": self.log_bound,
            "log_measure": self.log_measure,
            "status": self.status,
        }


def in_band_samples(spec: SpectrumDescription, per_band: int = 5) -> np.ndarray:
    """Energies inside every band; thin bands contribute their centre only."""
    pts = []
    phi = (np.arange(per_band) + 0.5) / per_band * math.pi
    frac = 0.5 * (1.0 - np.cos(phi))
    for b, c in zip(spec.bands, spec.centers):
        if b.thin or per_band <= 1:
            pts.append(np.array([c]))
        else:
            pts.append(b.lo + (b.hi - b.lo) * frac)
            pts.append(np.array([c]))
    return np.concatenate(pts)


def certify_norm_threshold(
    v, lam: float, energies: np.ndarray, sites=None, steps=None
) -> float:
    """``log`` of min over energies of max over (site, step) of ``||A_k(x)||``."""
    v = as_potential(v)
    u = np.ascontiguousarray(lam * v.values)
    n = v.period
    if sites is None:
        sites = np.unique(np.linspace(0, n, min(n, 16), endpoint=False).astype(np.int64))
    if steps is None:
        steps = [2**j for j in range(int(math.log2(n)) + 1)] + [n]
    sites = np.asarray(sites, dtype=np.int64) % n
    steps = np.unique(np.asarray(steps, dtype=np.int64))
    if steps.size == 0 or steps[0] < 0:
        raise ValueError("step counts must be nonnegative")
    prof = _kernels.log_norm_profile(np.asarray(energies, dtype=float), u, sites, steps)
    return float(max(0.0, prof.max(axis=(1, 2)).min()))


def verify_norm_measure_bound(
    v,
    lam: float = 1.0,
    C: float | None = None,
    *,
    log_C: float | None = None,
    spectrum: SpectrumDescription | None = None,
    sites=None,
    steps=None,
    per_band: int = 5,
) -> NormMeasureReport:
    """Check ``measure <= 4 pi n / C`` with C certified on in-band samples.

    If a threshold is supplied (``C`` or ``log_C``) it is used only when the
    sampled norms certify it; otherwise the report is inconclusive. Without
    one, the certified value itself is used, and a certified value of 1 is
    reported as inconclusive.
    """
    v = as_potential(v)
    spec = spectrum if spectrum is not None else compute_bands(v, lam)
    n = v.period
    E = in_band_samples(spec, per_band)
    log_cert = certify_norm_threshold(v, lam, E, sites, steps)
    if C is not None:
        if C < 1:
            raise ValueError("norm threshold must be >= 1")
        log_C = math.log(C)
    if log_C is None:
        used = log_cert
        usable = log_cert > 0.0
    else:
        used = float(log_C)
        usable = used <= log_cert + 1e-12
    log_bound = math.log(4 * math.pi * n) - used
    lm = spec.log_measure
    if not usable:
        status = "inconclusive"
    elif lm <= log_bound + 1e-12:
        status = "pass"
    else:
        status = "fail"
    return NormMeasureReport(n, log_cert, used, log_bound, lm, status)


# density of states ----------------------------------------------------------


def ids_density(E: float, v, lam: float = 1.0) -> float:
    """Density of the integrated density of states at an interior band energy."""
    v = as_potential(v)
    u = np.ascontiguousarray(lam * v.values)
    val = float(_kernels.ids_density_batch(np.array([float(E)]), u)[0])
    if not math.isfinite(val):
        raise DomainError(f"E={E!r} is not strictly inside a band")
    return val


def _band_integral(u: np.ndarray, lo: float, hi: float, upto: float, tol: float) -> float:
    # E = lo + (hi - lo)(1 - cos phi)/2 removes the inverse square-root edge singularities
    half = 0.5 * (hi - lo)

    def integrand(phi):
        E = lo + half * (1.0 - math.cos(phi))
        d = _kernels.ids_density_batch(np.array([E]), u)[0]
        return 0.0 if not math.isfinite(d) else d * half * math.sin(phi)

    if upto >= hi:
        phi_end = math.pi
    else:
        phi_end = math.acos(min(1.0, max(-1.0, 1.0 - (upto - lo) / half)))
    val, err, *_ = integrate.quad(
        integrand, 0.0, phi_end, epsabs=tol * 1e-3, epsrel=1e-10, limit=200, full_output=1
    )
    if err > tol:
        raise AccuracyError("density quadrature did not converge", err)
    return val


def band_increments(v, lam: float = 1.0, tol: float = 1e-6, spectrum=None) -> np.ndarray:
    """Integral of the density over each band; each should be ``1/n``."""
    v = as_potential(v)
    spec = spectrum if spectrum is not None else compute_bands(v, lam)
    u = np.ascontiguousarray(lam * v.values)
    out = []
    for b in spec.bands:
        if b.thin:
            # unresolvable in double precision; the identity is assumed, not measured
            out.append(float("nan"))
        else:
            out.append(_band_integral(u, b.lo, b.hi, b.hi, tol))
    return np.array(out)


def ids(E: float, v, lam: float = 1.0, tol: float = 1e-6, spectrum=None) -> float:
    """Integrated density of states: fraction of spectrum below ``E``."""
    v = as_potential(v)
    spec = spectrum if spectrum is not None else compute_bands(v, lam)
    u = np.ascontiguousarray(lam * v.values)
    n = spec.period
    total = 0.0
    for b in spec.bands:
        if E >= b.hi:
            total += 1.0 / n
        elif E > b.lo:
            if b.thin:
                total += 0.5 / n
            else:
                total += _band_integral(u, b.lo, b.hi, E, tol)
    return min(1.0, total)


# distances between spectra --------------------------------------------------


def _distance_to_union(x: np.ndarray, comps: np.ndarray) -> np.ndarray:
    lo, hi = comps[:, 0], comps[:, 1]
    idx = np.searchsorted(lo, x, side="right") - 1
    left = np.clip(idx, 0, len(lo) - 1)
    right = np.clip(idx + 1, 0, len(lo) - 1)
    d_left = np.where(x <= hi[left], np.maximum(lo[left] - x, 0.0), x - hi[left])
    d_right = np.maximum(lo[right] - x, 0.0)
    d_right = np.where(idx + 1 < len(lo), d_right, np.inf)
    d_left = np.where(idx >= 0, d_left, np.inf)
    return np.minimum(d_left, d_right)


def _one_sided(A: np.ndarray, B: np.ndarray) -> float:
    # sup over A of distance to B is reached at A's endpoints or at B's gap midpoints inside A
    cand = [A[:, 0], A[:, 1]]
    if len(B) > 1:
        mids = 0.5 * (B[:-1, 1] + B[1:, 0])
        inside = _distance_to_union(mids, A) == 0.0
        cand.append(mids[inside])
    x = np.concatenate(cand)
    return float(np.max(_distance_to_union(x, B)))


def hausdorff_distance(comps_a, comps_b) -> float:
    A = np.asarray(comps_a, dtype=float).reshape(-1, 2)
    B = np.asarray(comps_b, dtype=float).reshape(-1, 2)
    return max(_one_sided(A, B), _one_sided(B, A))


def spectrum_hausdorff_distance(v, w, lam: float = 1.0) -> float:
    return hausdorff_distance(compute_bands(v, lam).components(), compute_bands(w, lam).components())


# serialization ---------------------------------------------------------------


def band_table_csv(spec: SpectrumDescription) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["band_index", "lo", "hi", "length", "log_length", "touches_prev", "touches_next"])
    for i, b in enumerate(spec.bands):
        wr.writerow([i, repr(b.lo), repr(b.hi), repr(b.length), repr(b.log_length), int(b.touches_prev), int(b.touches_next)])
    return buf.getvalue()


def spectrum_summary(spec: SpectrumDescription) -> dict:
    return {
        "period": spec.period,
        "lambda": spec.coupling,
        "measure": spec.measure,
        "log_measure": spec.log_measure,
        "component_count": spec.component_count,
        "thin_bands": sum(b.thin for b in spec.bands),
        "near_touches": list(spec.near_touches),
        "tolerances": dict(spec.tolerances),
    }


__all__ = [
    "Band",
    "NormMeasureReport",
    "PeriodicPotential",
    "SpectrumDescription",
    "band_increments",
    "band_table_csv",
    "certify_norm_threshold",
    "compute_bands",
    "discriminant",
    "hausdorff_distance",
    "ids",
    "ids_density",
    "in_band_samples",
    "spectrum_hausdorff_distance",
    "spectrum_measure",
    "spectrum_summary",
    "verify_norm_measure_bound",
]
