import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from limitperiodic.construct.induction import (
    all_t,
    block_layout,
    build_block_potential,
    build_staircase_family,
    classify_niceness,
    default_partition,
    explicit_log_bound,
    lemma_induction,
    member_measure,
    niceness_census,
    niceness_context,
    sample_t,
    tan_identity_residual,
)
from limitperiodic.construct.params import InductionParams
from limitperiodic.errors import ParameterError
from limitperiodic.odometer import PeriodicPotential, PotentialFamily, embed, family_diameter

from conftest import potentials

P = PeriodicPotential
HYPERBOLIC = PotentialFamily((P([3.0, -1.0]), P([-2.5, 0.5])))


def test_block_potential_two_members():
    W = PotentialFamily((P([1.0]), P([-1.0])))
    v = build_block_potential(W, 3, InductionParams(r=4))
    assert np.array_equal(v.values, [1, 1, 1, 1, -1, -1, -1, -1])


def test_block_potential_single_member_is_embedding():
    w = P([0.5, -0.25])
    v = build_block_potential(PotentialFamily((w,)), 3, InductionParams(r=4))
    assert v == embed(w, 8)


@given(
    st.integers(1, 3),
    st.integers(1, 3),
    st.integers(2, 5),
    st.data(),
)
def test_block_potential_matches_index_arithmetic(m, n_k, r, data):
    extra = data.draw(st.integers(0, m - 1))
    blocks = m * r + extra
    n_K = blocks * n_k
    members = [
        P(np.array(data.draw(st.lists(st.floats(-2, 2), min_size=n_k, max_size=n_k))))
        for _ in range(m)
    ]
    params = InductionParams(r=r)
    layout = block_layout(m, n_k, n_K, params)
    from limitperiodic.construct.induction import _block_values

    v = _block_values(PotentialFamily(tuple(members)), layout).values
    sizes = [r + 1] * extra + [r] * (m - extra)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    for l in range(n_K):
        j = l // n_k
        i = int(np.searchsorted(starts, j, side="right")) - 1
        assert v[l] == members[i].values[l % n_k]


def test_partition_rule_enforced():
    assert default_partition(9, 2, 4) == (0, 5, 9)
    with pytest.raises(ParameterError):
        default_partition(11, 2, 4)
    with pytest.raises(ParameterError):
        block_layout(2, 1, 8, InductionParams(r=4, partition=(0, 2, 8)))
    with pytest.raises(ParameterError):
        block_layout(2, 1, 8, InductionParams(r=3))


def test_staircase_family_shape_and_diameter():
    params = InductionParams(r=3, amp=0.01)
    layout = block_layout(2, 2, 12, params)
    from limitperiodic.construct.induction import _block_values

    base = _block_values(HYPERBOLIC, layout)
    fam = build_staircase_family(base, layout, params)
    assert fam.count == 9
    assert fam[0] == base
    assert family_diameter(fam) == pytest.approx(0.01 * 2, abs=1e-15)
    # only the last block of each segment moves
    moved = np.nonzero(fam[-1].values != base.values)[0]
    assert set(moved) == {4, 5, 10, 11}


def test_staircase_underflow_warning():
    params = InductionParams(r=2, amp=2.0**-450)
    layout = block_layout(1, 1, 2, params)
    with pytest.warns(RuntimeWarning):
        build_staircase_family(P([0.0, 0.0]), layout, params)


def test_sample_t_keeps_corners_and_is_seeded():
    ts = sample_t(5, 3, 20, seed=4)
    assert len(ts) == 20
    assert (0, 0, 0) in ts and (4, 4, 4) in ts
    assert ts == sample_t(5, 3, 20, seed=4)
    assert len(sample_t(3, 2, 100)) == 9


def test_free_blocks_have_no_good_indices():
    W = PotentialFamily((P([0.0, 0.0]), P([0.0, 0.0])))
    params = InductionParams(r=4, amp_exponent=1.0)
    layout = block_layout(2, 2, 16, params)
    ctx = niceness_context(W, layout, params, 0.5, 1.0)
    res = classify_niceness((1, 2), ctx)
    assert res.status == "no-good-blocks"
    assert res.very_nice is True


def test_single_member_is_vacuously_very_nice():
    W = PotentialFamily((P([3.0, -1.0]),))
    params = InductionParams(r=4, amp_exponent=1.0)
    layout = block_layout(1, 2, 8, params)
    census = niceness_census(W, layout, params, 0.3, 1.0)
    assert census.not_very_nice == 0


@pytest.mark.parametrize("r", [4, 6, 8])
def test_census_within_bound(r):
    params = InductionParams(r=r, amp_exponent=1.0)
    layout = block_layout(2, 2, 4 * r, params)
    census = niceness_census(HYPERBOLIC, layout, params, 0.3, 1.0)
    assert len(census.results) == r * r
    assert census.within_bound
    residuals = [x.tan_residual for x in census.results if x.tan_residual is not None]
    assert residuals and max(residuals) < 1e-6


def test_census_csv_columns():
    params = InductionParams(r=4, amp_exponent=1.0)
    layout = block_layout(2, 2, 16, params)
    text = niceness_census(HYPERBOLIC, layout, params, 0.3, 1.0).to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("t,angle_1")
    assert lines[0].endswith("very_nice")
    assert len(lines) == 17
    assert lines[1].split(",")[0] == "0;0"


@given(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
    st.floats(0.05, math.pi - 0.05),
)
def test_tan_identity(a, b, c, z):
    if abs(a) < 0.3:
        a = 0.3 + abs(a)
    B = np.array([[a, b], [c, (1 + b * c) / a]])
    if np.linalg.norm(B, 2) < 1.01:
        return
    zv = np.array([math.cos(z), math.sin(z)])
    assert tan_identity_residual(B, zv) < 1e-7


def test_explicit_log_bound_formula():
    assert explicit_log_bound(64, 0.1, 2, 4, 2) == pytest.approx(math.log(4 * math.pi * 64) - 0.1 * 2 * 3 * 4)


def test_lemma_induction_constant_seed_measures_shrink():
    W = PotentialFamily((P([2.0, 2.0]),))
    measures = []
    for K in (3, 4, 5):
        n_K = 2**K
        params = InductionParams(r=n_K // 2, amp_exponent=1.0, diameter_exponent=1.0)
        res = lemma_induction(W, K, params, hypotheses=(), drift_energy_count=21, drift_lambda_count=3)
        assert res.certificate.diameter == pytest.approx(params.amplitude * (params.r - 1))
        measures.append(max(member_measure(w) for w in res.family))
    assert measures[0] > measures[1] > measures[2]


def test_lemma_induction_measure_check_against_explicit_bound():
    params = InductionParams(r=4, amp_exponent=1.0, diameter_exponent=1.0)
    hmin = 0.3
    delta = hmin / (2 * 2)
    res = lemma_induction(
        HYPERBOLIC, 4, params, hypotheses=[(1.0, delta, hmin)], drift_energy_count=21, drift_lambda_count=3
    )
    (mc,) = res.certificate.measure_checks
    assert mc.applicable
    for mm in mc.members:
        assert mm.log_measure <= mc.log_bound + 1e-12
    res = lemma_induction(
        HYPERBOLIC, 4, params, hypotheses=[(1.0, 1.0, hmin)], drift_energy_count=21, drift_lambda_count=3
    )
    assert res.certificate.measure_checks[0].to_dict()["status"] == "not applicable"
