import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from limitperiodic.bands import compute_bands
from limitperiodic.construct.grids import DriftGrid
from limitperiodic.construct.params import JoiningSettings, StartParams, required_N2
from limitperiodic.construct.start import (
    GAP_FLOOR,
    build_shifted_family,
    build_start_candidates,
    lemma_start,
    search_N1,
    select_gap_opening_j,
    shift_witnesses,
    start_claims,
)
from limitperiodic.errors import ParameterError, ScheduleError
from limitperiodic.odometer import Ball, PeriodicPotential, PotentialFamily, sup_distance

from conftest import potentials

P = PeriodicPotential


def test_candidates_for_zero_seed():
    cands = build_start_candidates(P([0.0]), 2, StartParams(M=1.0, N1=10, K=2))
    assert len(cands) == 3
    for j, c in enumerate(cands, start=1):
        assert c.period == 4
        assert np.array_equal(c.values[:3], [0, 0, 0])
        assert c.values[3] == pytest.approx(j / 10)


@given(potentials(1, 4, 2.0), st.integers(1, 64))
def test_candidate_count_and_distance(w, N1):
    K = 4  # n_K = 16, a proper multiple of every period up to 4 except 3
    if 16 % w.period:
        with pytest.raises(ScheduleError):
            build_start_candidates(w, K, StartParams(M=1.0, N1=N1, K=K))
        return
    cands = build_start_candidates(w, K, StartParams(M=1.0, N1=N1, K=K))
    assert len(cands) == 2 * w.period + 1
    for j, c in enumerate(cands, start=1):
        assert sup_distance(c, w) == pytest.approx(j / N1, abs=1e-12)


def test_zero_seed_touching_point_splits():
    cands = build_start_candidates(P([0.0]), 1, StartParams(M=1.0, N1=8, K=1))
    assert compute_bands(P([0.0, 0.0])).component_count == 1
    sel = select_gap_opening_j(cands, 1.0)
    assert 1 <= sel.j <= 3
    assert compute_bands(cands[sel.j - 1]).component_count == 2
    assert sel.delta > GAP_FLOOR and sel.resolved


def test_shifted_family_is_arithmetic():
    w = P([0.0, 0.5])
    params = StartParams(M=1.0, N1=4, K=1, N2=40)
    S = params.shifts_total(2)
    assert S == pytest.approx(4 * math.pi / 2)
    fam = build_shifted_family(w, params, delta=1.0)
    assert fam.count == 41
    diffs = np.diff([m.values[0] for m in fam])
    assert np.allclose(diffs, S / 40)


def test_shifted_family_rejects_small_N2():
    params = StartParams(M=2.0, N1=4, K=1, N2=3)
    with pytest.raises(ParameterError):
        build_shifted_family(P([0.0, 0.5]), params, delta=0.1)


def test_required_N2_is_strict():
    N2 = required_N2(2.0, 0.1, 1.0)
    assert N2 > 2.0 * 1.0 / 0.1
    assert N2 - 1 <= 2.0 * 1.0 / 0.1


def test_shift_witnesses_against_brute_force():
    comps = [(-2.0, -0.5), (0.1, 1.0), (1.5, 2.5)]
    lam, S, N2 = 1.0, 3.0, 60
    E = np.linspace(-3, 3, 601)
    fast = shift_witnesses(comps, lam, S, N2, E)
    arr = np.array(comps)

    def inside(x):
        return np.any((arr[:, 0] <= x) & (x <= arr[:, 1]))

    for e, ok in zip(E, fast):
        brute = any(not inside(e - lam * S * l / N2) for l in range(N2 + 1))
        if ok:
            assert brute


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_claims_hold_for_zero_seed(lam):
    c = start_claims(P([0.0]), 2, lam, StartParams(M=2.0, N1=16, K=2))
    assert c.claim1 and c.claim2


def test_N1_search_respects_perturbation_budget():
    grid = DriftGrid.square(1.25, 41, 3)
    N1, drift = search_N1([P([0.0])], 4, 2, grid, 0.05, 30, None)
    assert 3 / N1 <= 0.05
    assert drift < 0.5


def test_lemma_start_drift_decreases():
    W = PotentialFamily((P([0.0]),))
    st_ = JoiningSettings(lambda_count=3, drift_energy_count=61, drift_lambda_count=3, shift_sample=33)
    res = lemma_start(W, Ball(P([0.0]), 10.0), 1.25, range(1, 5), st_)
    assert res.family is not None
    assert all(r.claim1 and r.claim2 for r in res.reports)
    assert res.drift_decreasing(jitter=0.1)
    assert all(v > 0 for r in res.reports for v in r.min_lyapunov.values())
