"""Energy and coupling grids, and family-averaged Lyapunov exponents on them.

Only positive couplings are sampled: ``L(E, -lam w) = L(-E, lam w)``, so
a grid for ``-lam`` is the mirror image of the grid for ``lam`` and the
negative half of a coupling window adds nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels


def lambda_samples(M: float, count: int) -> np.ndarray:
    """Geometric sample of ``[1/M, M]``; a single sample is ``1``."""
    if count == 1 or M == 1.0:
        return np.ones(1)
    return np.geomspace(1.0 / M, M, count)


def symmetric_grid(half_width: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil(2.0 * half_width / step)))
    return np.linspace(-half_width, half_width, n + 1)


def window_half_width(sup_norm: float, lams) -> float:
    """Beyond ``|E| >= |lam| sup|w| + 4`` every exponent is at least 1."""
    return float(np.max(np.abs(lams))) * sup_norm + 4.0


def hull_grid(lo: float, hi: float, lam: float, step: float) -> np.ndarray:
    """Grid of ``[lam lo - 2, lam hi + 2]``, which holds every spectrum of ``lam w``.

    Past the outermost band edge ``|psi|`` grows monotonically, so the
    exponent of a family outside this interval is never below its value
    at the nearer endpoint.
    """
    a, b = sorted((lam * lo, lam * hi))
    a, b = a - 2.0, b + 2.0
    n = max(1, int(math.ceil((b - a) / step)))
    return np.linspace(a, b, n + 1)


@dataclass(frozen=True)
class DriftGrid:
    """Compact ``|E| <= M, 0 <= lam <= M`` grid used to compare exponents."""

    energies: np.ndarray
    lams: np.ndarray

    @classmethod
    def square(cls, M: float, energy_count: int, lambda_count: int) -> "DriftGrid":
        return cls(np.linspace(-M, M, energy_count), np.linspace(0.0, M, lambda_count))

    def spec(self) -> dict:
        return {
            "energy_min": float(self.energies[0]),
            "energy_max": float(self.energies[-1]),
            "energy_count": int(self.energies.size),
            "lambda_min": float(self.lams[0]),
            "lambda_max": float(self.lams[-1]),
            "lambda_count": int(self.lams.size),
        }


def potential_lyapunov(energies: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Exponent of the (already coupled) potential ``u`` at many energies."""
    tr, _, ex = _kernels.trace_batch(energies, np.ascontiguousarray(u, dtype=float), False)
    return _kernels.lyapunov_from_scaled_trace(tr, ex, u.size)


def member_lyapunov_grid(energies: np.ndarray, lams, values: np.ndarray) -> np.ndarray:
    """``L(E, lam w)`` for one member; shape ``(len(lams), len(energies))``."""
    out = np.empty((len(lams), energies.size))
    for a, lam in enumerate(lams):
        out[a] = potential_lyapunov(energies, lam * values)
    return out


def family_lyapunov_grid(energies: np.ndarray, lams, members) -> np.ndarray:
    """Multiplicity-weighted mean over ``members`` (arrays or potentials)."""
    acc = np.zeros((len(lams), energies.size))
    count = 0
    for w in members:
        vals = np.asarray(getattr(w, "values", w), dtype=float)
        acc += member_lyapunov_grid(energies, lams, vals)
        count += 1
    if count == 0:
        raise ValueError("empty family")
    return acc / count


def grid_sup_difference(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


__all__ = [
    "DriftGrid",
    "family_lyapunov_grid",
    "grid_sup_difference",
    "hull_grid",
    "lambda_samples",
    "member_lyapunov_grid",
    "potential_lyapunov",
    "symmetric_grid",
    "window_half_width",
]
