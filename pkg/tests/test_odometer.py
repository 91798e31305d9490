import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from limitperiodic.errors import DivisibilityError, ScheduleError
from limitperiodic.odometer import (
    Ball,
    GroupSchedule,
    PeriodicPotential,
    PotentialFamily,
    convolve_subgroup,
    embed,
    family_diameter,
    parse_potential,
    format_potential,
    sup_distance,
)

from conftest import potentials

P = PeriodicPotential


def test_schedule_rejects_non_divisor_chain():
    with pytest.raises(ScheduleError):
        GroupSchedule((1, 2, 3))
    with pytest.raises(ScheduleError):
        GroupSchedule((2, 2))
    assert GroupSchedule.doubling(3).indices == (1, 2, 4, 8)


def test_embed_examples():
    assert np.array_equal(embed(P([1.0]), 3).values, [1.0, 1.0, 1.0])
    assert np.array_equal(embed(P([0.0, 2.0]), 4).values, [0.0, 2.0, 0.0, 2.0])
    with pytest.raises(DivisibilityError):
        embed(P([0.0, 2.0]), 3)


@given(potentials(1, 6), st.integers(1, 5))
def test_embed_matches_index_formula(v, mult):
    N = v.period * mult
    got = embed(v, N).values
    want = np.array([v.values[i % v.period] for i in range(N)])
    assert np.array_equal(got, want)


def test_convolve_subgroup_examples():
    s = GroupSchedule.doubling(4)
    assert np.array_equal(convolve_subgroup(P([1, 3, 1, 3]), 1, s).values, [1, 3])
    assert np.array_equal(convolve_subgroup(P([0, 0, 4, 0]), 1, s).values, [2, 0])
    assert np.allclose(convolve_subgroup(P.constant(1.5, 8), 1, s).values, 1.5)
    with pytest.raises(ScheduleError):
        convolve_subgroup(P([0, 0, 4, 0]), 2, s)


def test_sup_distance_examples():
    assert sup_distance(P([0, 0]), P([1, -2])) == 2.0
    assert sup_distance(P([1, 0]), P([1, 1, 0])) == 1.0
    v = P([0.3, -1.2])
    assert sup_distance(v, v) == 0.0


@given(potentials(), potentials(), potentials())
def test_sup_distance_is_a_metric(u, v, w):
    assert sup_distance(u, v) == sup_distance(v, u)
    assert sup_distance(u, w) <= sup_distance(u, v) + sup_distance(v, w) + 1e-12


def test_family_diameter():
    assert family_diameter(PotentialFamily((P([0.0, 1.0]),))) == 0.0
    assert family_diameter(PotentialFamily((P([0.0, 0.0]), P([0.0, 1.0])))) == 1.0


def test_family_keeps_multiplicity_and_common_period():
    W = PotentialFamily((P([1.0]), P([1.0]), P([0.0, 2.0])))
    assert W.count == 3
    assert W.period == 2


def test_ball_containment_is_strict():
    b = Ball(P([0.0]), 1.0)
    assert b.contains(P([0.5, -0.5]))
    assert not b.contains(P([1.0]))
    small = Ball(P([0.2]), 0.5)
    assert small.closure_inside(b)
    assert not Ball(P([0.6]), 0.5).closure_inside(b)


def test_potential_text_roundtrip():
    v = P([0.1, -2.0, math.pi])
    assert parse_potential(format_potential(v)) == v
    with pytest.raises(ValueError):
        parse_potential("3\n1 2\n")


def test_equal_sequences_hash_alike():
    assert P([1.0, 2.0]) == embed(P([1.0, 2.0]), 4)
    assert hash(P([1.0, 2.0])) == hash(embed(P([1.0, 2.0]), 4))


def test_potential_is_immutable():
    v = P([1.0, 2.0])
    with pytest.raises(ValueError):
        v.values[0] = 3.0
