"""Transfer matrices of ``(Hu)_n = u_{n+1} + u_{n-1} + v_n u_n`` and what they yield.

Matrices are plain ``(2, 2)`` numpy arrays; directions on the projective
line are angles in ``[0, pi)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import ConditioningError, DomainError
from .odometer import PeriodicPotential, PotentialFamily, as_family, as_potential

DET_TOL = 1e-9


def step_matrix(E: float, vval: float) -> np.ndarray:
    return np.array([[E - vval, -1.0], [1.0, 0.0]])


def transfer_scaled(E: float, v, n: int, x: int = 0) -> tuple[np.ndarray, int]:
    """Transfer matrix as ``(P, e)`` with ``A_n(x) = 2**e * P``."""
    if n < 0:
        raise ValueError("number of steps must be nonnegative")
    v = as_potential(v)
    P, ex = _kernels.product_batch(np.array([float(E)]), v.values, int(x) % v.period, int(n))
    return P[0], int(ex[0])


def transfer(E: float, v, n: int, x: int = 0) -> np.ndarray:
    """``S_{x+n-1} ... S_x``; maps ``(u_x, u_{x-1})`` to ``(u_{x+n}, u_{x+n-1})``."""
    P, e = transfer_scaled(E, v, n, x)
    return np.ldexp(P, e)


def monodromy(E: float, v) -> np.ndarray:
    v = as_potential(v)
    return transfer(E, v, v.period, 0)


def _energies(E) -> tuple[np.ndarray, bool]:
    arr = np.asarray(E, dtype=float)
    return np.atleast_1d(arr).ravel(), arr.ndim == 0


def lyapunov_periodic(E, v):
    """``(1/n) log`` of the spectral radius of the monodromy; zero on the spectrum.

    Accepts a scalar or an array of energies.
    """
    v = as_potential(v)
    Es, scalar = _energies(E)
    tr, _, ex = _kernels.trace_batch(Es, v.values, False)
    L = _kernels.lyapunov_from_scaled_trace(tr, ex, v.period)
    return float(L[0]) if scalar else L.reshape(np.shape(E))


def lyapunov_family(E, lam: float, W):
    """Multiplicity-weighted mean of the Lyapunov exponents of ``lam * w``."""
    if isinstance(W, PotentialFamily):
        members = W.members
    else:
        members = tuple(as_family(W).members) if len(W) else ()
    if not members:
        raise DomainError("Lyapunov exponent of an empty family is undefined")
    Es, scalar = _energies(E)
    acc = np.zeros(Es.size)
    for w in members:
        acc += lyapunov_periodic(Es, w.scaled(lam))
    acc /= len(members)
    return float(acc[0]) if scalar else acc.reshape(np.shape(E))


def log_norm(E: float, v, n: int, x: int = 0) -> float:
    v = as_potential(v)
    out = _kernels.log_norm_profile(
        np.array([float(E)]), v.values, np.array([int(x) % v.period]), np.array([int(n)])
    )
    return float(out[0, 0, 0])


def subadditive_average(E: float, v, k: int, samples: int | None = None) -> float:
    """Average of ``2**-k log ||A_{2**k}(x)||`` over starting sites x.

    With ``samples`` unset (or at least the period) every site of one period
    is used, which is the Haar average on the finite quotient; otherwise
    ``samples`` evenly spaced sites are used.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    v = as_potential(v)
    n = v.period
    if samples is None or samples >= n:
        sites = np.arange(n)
    else:
        if samples < 1:
            raise ValueError("samples must be >= 1")
        sites = np.unique(np.linspace(0, n, samples, endpoint=False).astype(np.int64))
    N = 2**k
    prof = _kernels.log_norm_profile(np.array([float(E)]), v.values, sites, np.array([N]))
    return float(np.mean(prof[0, :, 0]) / N)


def direction_vector(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def direction_of(z) -> float:
    """Projective direction of a nonzero vector, as an angle in ``[0, pi)``."""
    theta = math.atan2(z[1], z[0]) % math.pi
    return 0.0 if theta >= math.pi else theta


def projective_angle(a, b) -> float:
    """Angle in ``[0, pi/2]`` between the lines spanned by ``a`` and ``b``."""
    cross = abs(a[0] * b[1] - a[1] * b[0])
    dot = abs(a[0] * b[0] + a[1] * b[1])
    return math.atan2(cross, dot)


def _argument(E: float, v, n: int, z: np.ndarray, x: int) -> float:
    P, _ = transfer_scaled(E, v, n, x)
    w = P @ z
    return math.atan2(w[1], w[0])


def _wrap(d: float) -> float:
    return (d + math.pi) % (2 * math.pi) - math.pi


def argument_derivative(
    E: float, v, n: int, z: float, h: float = 1e-6, x: int = 0
) -> float:
    """Finite-difference d/dE of the argument of ``A_n(x) z``.

    ``z`` is a direction angle. One-sided estimates that disagree by more
    than 10% trigger a Richardson-extrapolated central difference.
    """
    v = as_potential(v)
    zv = direction_vector(z)
    f0 = _argument(E, v, n, zv, x)
    fp = _argument(E + h, v, n, zv, x)
    fm = _argument(E - h, v, n, zv, x)
    fwd = _wrap(fp - f0) / h
    bwd = _wrap(f0 - fm) / h
    central = 0.5 * (fwd + bwd)
    if abs(fwd - bwd) <= 0.1 * abs(central):
        return central
    h2 = 0.5 * h
    c2 = _wrap(_argument(E + h2, v, n, zv, x) - _argument(E - h2, v, n, zv, x)) / (2 * h2)
    return (4.0 * c2 - central) / 3.0


class SingularDirections(NamedTuple):
    s: float  # most contracted input direction
    u: float  # image of the most expanded input direction
    sigma: float  # operator norm
    degenerate: bool


def singular_directions(M) -> SingularDirections:
    """Contracting and expanded-image directions of an ``SL(2, R)`` matrix.

    Conformal matrices (norm within 1e-12 of 1) have no preferred
    directions; both angles are then reported as 0 with ``degenerate`` set.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ConditioningError("matrix has non-finite entries")
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        raise ConditioningError("zero matrix")
    det = float(np.linalg.det(M / scale)) * scale * scale
    if abs(det - 1.0) > DET_TOL * max(1.0, scale * scale):
        raise ConditioningError(f"determinant {det!r} is not 1")
    U, S, Vt = np.linalg.svd(M)
    sigma = float(S[0])
    if not math.isfinite(sigma) or sigma * sigma * 1e-16 > 1e300:
        raise ConditioningError("singular values overflow")
    if sigma - 1.0 <= 1e-12:
        return SingularDirections(0.0, 0.0, max(sigma, 1.0), True)
    return SingularDirections(direction_of(Vt[1]), direction_of(U[:, 0]), sigma, False)


def lyapunov_grid(energies: np.ndarray, lams, W) -> np.ndarray:
    """``L(E, lam W)`` on the product grid; shape ``(len(lams), len(energies))``."""
    W = as_family(W)
    return np.stack([lyapunov_family(energies, lam, W) for lam in lams])


def is_sl2(M, tol: float = DET_TOL) -> bool:
    return abs(float(np.linalg.det(np.asarray(M))) - 1.0) <= tol


__all__ = [
    "PeriodicPotential",
    "SingularDirections",
    "argument_derivative",
    "direction_of",
    "direction_vector",
    "is_sl2",
    "log_norm",
    "lyapunov_family",
    "lyapunov_grid",
    "lyapunov_periodic",
    "monodromy",
    "projective_angle",
    "singular_directions",
    "step_matrix",
    "subadditive_average",
    "transfer",
    "transfer_scaled",
]
