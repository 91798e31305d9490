"""Compare the free operator with its closed forms and print the worst errors."""

import numpy as np

from limitperiodic import bands, cocycle
from limitperiodic.odometer import PeriodicPotential

zero = PeriodicPotential.zero(1)
lo, hi = bands.compute_bands(zero).components()[0]
E = np.linspace(-4, 4, 801)
closed = np.log(np.maximum((np.abs(E) + np.sqrt(np.maximum(E * E - 4, 0))) / 2, 1.0))
print(f"spectrum [{lo:.12f}, {hi:.12f}]")
print(f"max Lyapunov error {np.max(np.abs(cocycle.lyapunov_periodic(E, zero) - closed)):.3e}")
for n in (2, 4, 8):
    spec = bands.compute_bands(PeriodicPotential.zero(n))
    print(f"period {n}: {len(spec.bands)} bands, {spec.component_count} component(s)")
