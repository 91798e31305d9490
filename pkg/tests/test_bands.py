import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from limitperiodic import bands
from limitperiodic.cocycle import lyapunov_periodic
from limitperiodic.errors import DomainError
from limitperiodic.odometer import PeriodicPotential, embed, sup_distance

from conftest import potentials

P = PeriodicPotential


def test_discriminant_examples():
    E = np.linspace(-3, 3, 7)
    assert np.allclose(bands.discriminant(E, P([0.0])), E)
    assert np.allclose(bands.discriminant(E, P([0.0, 0.0])), E**2 - 2)


def test_free_spectrum():
    spec = bands.compute_bands(P([0.0]))
    assert len(spec.bands) == 1
    assert spec.bands[0].lo == pytest.approx(-2, abs=1e-12)
    assert spec.bands[0].hi == pytest.approx(2, abs=1e-12)
    assert spec.measure == pytest.approx(4.0)
    assert spec.component_count == 1
    assert bands.spectrum_measure(P([0.0])) == pytest.approx(4.0)


def test_free_spectrum_at_period_two_touches_at_zero():
    spec = bands.compute_bands(P([0.0, 0.0]))
    (a, b) = spec.bands
    assert (a.lo, a.hi, b.lo, b.hi) == pytest.approx((-2, 0, 0, 2), abs=1e-12)
    assert a.touches_next and b.touches_prev
    assert spec.component_count == 1
    assert spec.components() == [pytest.approx((-2.0, 2.0))]


def test_period_two_gap():
    spec = bands.compute_bands(P([1.0, -1.0]))
    edges = [e for b in spec.bands for e in (b.lo, b.hi)]
    s5 = math.sqrt(5)
    assert edges == pytest.approx([-s5, -1, 1, s5], abs=1e-12)
    assert spec.component_count == 2
    assert spec.measure == pytest.approx(2 * (s5 - 1), abs=1e-12)


@given(potentials(1, 12, 2.0), st.floats(0.25, 3.0))
def test_band_structure_invariants(v, lam):
    spec = bands.compute_bands(v, lam)
    n = v.period
    assert len(spec.bands) == n
    assert spec.component_count <= n
    for b, c in zip(spec.bands, spec.bands[1:]):
        assert b.hi <= c.lo + 1e-12
    w = lam * v.sup_norm()
    assert spec.bands[0].lo >= -2 - w - 1e-9 and spec.bands[-1].hi <= 2 + w + 1e-9
    for b in spec.bands:
        if b.thin:
            continue
        psi = bands.discriminant(np.array([b.lo, b.hi]), v, lam)
        assert np.allclose(np.abs(psi), 2, atol=1e-6 * (1 + np.abs(psi).max()))
        inner = np.linspace(b.lo, b.hi, 9)[1:-1]
        assert np.all(np.abs(bands.discriminant(inner, v, lam)) <= 2 + 1e-6)


@given(potentials(1, 8, 2.0))
def test_zero_set_of_lyapunov_is_the_spectrum(v):
    spec = bands.compute_bands(v)
    E = np.linspace(-4.5, 4.5, 901)
    inside = spec.contains(E)
    L = lyapunov_periodic(E, v)
    assert np.all(L[inside] < 1e-6)
    # outside, L vanishes only within edge tolerance
    far = ~spec.contains(E - 1e-6) & ~spec.contains(E + 1e-6) & ~inside
    assert np.all(L[far] > 0)


def test_thin_bands_keep_a_finite_log_length():
    rng = np.random.default_rng(3)
    v = P(rng.uniform(-3, 3, 64))
    spec = bands.compute_bands(v, 2.0)
    assert any(b.thin for b in spec.bands)
    assert all(math.isfinite(b.log_length) for b in spec.bands)
    assert math.isfinite(spec.log_measure)


def test_compute_bands_cache_returns_same_object():
    v = P([0.25, -0.5, 1.0])
    assert bands.compute_bands(v, 1.5) is bands.compute_bands(P([0.25, -0.5, 1.0]), 1.5)


def test_ids_density_free():
    assert bands.ids_density(0.0, P([0.0])) == pytest.approx(1 / (2 * math.pi), abs=1e-12)
    assert bands.ids_density(1.0, P([0.0])) == pytest.approx(1 / (math.pi * math.sqrt(3)), abs=1e-12)
    with pytest.raises(DomainError):
        bands.ids_density(2.5, P([0.0]))


def test_ids_free():
    v = P([0.0])
    assert bands.ids(2.0, v) == 1.0
    assert bands.ids(3.0, v) == 1.0
    assert bands.ids(0.0, v) == pytest.approx(0.5, abs=1e-7)
    xs = np.linspace(-2.5, 2.5, 21)
    vals = [bands.ids(x, v) for x in xs]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


@given(potentials(2, 6, 2.0))
def test_band_increments_are_one_over_n(v):
    inc = bands.band_increments(v)
    assert np.allclose(inc, 1 / v.period, atol=1e-5)


def test_norm_measure_free_case():
    rep = bands.verify_norm_measure_bound(P([0.0]), 1.0, C=1.0)
    assert rep.status == "pass"
    assert rep.bound == pytest.approx(4 * math.pi)
    assert rep.measure == pytest.approx(4.0)


def test_norm_measure_uncertifiable_threshold_is_inconclusive():
    rep = bands.verify_norm_measure_bound(P([0.0]), 1.0, C=1e6)
    assert rep.status == "inconclusive"


@given(potentials(2, 16, 2.0), st.floats(0.5, 3.0))
def test_norm_measure_bound_never_fails(v, lam):
    rep = bands.verify_norm_measure_bound(v, lam)
    assert rep.status in ("pass", "inconclusive")


def test_hausdorff_examples():
    v = P([0.3, -0.4])
    assert bands.spectrum_hausdorff_distance(v, v) == 0.0
    eps = 0.125
    assert bands.spectrum_hausdorff_distance(P([0.0]), P([eps])) == pytest.approx(eps, abs=1e-12)
    assert bands.hausdorff_distance([(0, 1), (3, 4)], [(0, 4)]) == pytest.approx(1.0)


@given(potentials(8, 8, 2.0), potentials(8, 8, 2.0))
def test_spectrum_is_one_lipschitz(v, w):
    assert bands.spectrum_hausdorff_distance(v, w) <= sup_distance(v, w) + 1e-6


@given(potentials(1, 8, 2.0), st.integers(2, 3))
def test_embedding_does_not_change_the_spectrum(v, mult):
    a = bands.compute_bands(v).components()
    b = bands.compute_bands(embed(v, v.period * mult)).components()
    assert bands.hausdorff_distance(a, b) < 1e-8


def test_band_table_csv():
    text = bands.band_table_csv(bands.compute_bands(P([0.0])))
    lines = text.splitlines()
    assert lines[0] == "band_index,lo,hi,length,log_length,touches_prev,touches_next"
    assert len(lines) == 2 and "\r" not in text
