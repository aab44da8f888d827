import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emdsketch import ContractViolation, GridMeasure
from emdsketch.measure import (GENERAL, GranularitySpec, best_k_sparse, check_granularity, emd, emd_cdf_1d,
                               emd_exact, format_measure, parse_measure, read_measure, write_measure)
from emdsketch.instances import random_probability

from conftest import brute_kmedian, lp_emd_measures


def atoms_strategy(delta, dims, max_atoms=4):
    pt = st.tuples(*[st.integers(0, delta - 1)] * dims)
    return st.dictionaries(pt, st.integers(1, 20), min_size=1, max_size=max_atoms)


def prob(delta, dims, atoms):
    tot = sum(atoms.values())
    return GridMeasure.from_atoms(delta, dims, {p: w / tot for p, w in atoms.items()})


def test_unit_move_costs_l1_distance():
    a = GridMeasure.point_mass(8, (0, 0))
    b = GridMeasure.point_mass(8, (3, 4))
    cost, plan = emd_exact(a, b)
    assert cost == pytest.approx(7.0)
    assert plan.edges == (((0, 0), (3, 4), 1.0),)


def test_identical_measures_give_empty_plan():
    x = GridMeasure.from_atoms(8, 2, {(1, 2): 0.5, (5, 5): 0.5})
    cost, plan = emd_exact(x, x)
    assert cost == 0.0 and plan.edges == ()


@settings(max_examples=60, deadline=None)
@given(atoms_strategy(8, 2, 3), atoms_strategy(8, 2, 3))
def test_emd_matches_lp_oracle(a, b):
    x, y = prob(8, 2, a), prob(8, 2, b)
    assert emd(x, y) == pytest.approx(lp_emd_measures(x, y), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(atoms_strategy(8, 2, 3), atoms_strategy(8, 2, 3), st.floats(0.2, 3.0))
def test_unequal_mass_penalty_matches_lp(a, b, scale):
    x = GridMeasure.from_atoms(8, 2, {p: w * scale for p, w in a.items()}, GENERAL)
    y = GridMeasure.from_atoms(8, 2, b, GENERAL)
    assert emd(x, y) == pytest.approx(lp_emd_measures(x, y), rel=1e-9, abs=1e-9)


def test_leftover_mass_costs_the_diameter():
    x = GridMeasure(4, 2, [(0, 0)], [2.0], GENERAL)
    y = GridMeasure(4, 2, [(0, 0)], [1.0], GENERAL)
    assert emd(x, y) == pytest.approx(8.0)        # D = d·Δ = 8


def test_cdf_small_example():
    a = GridMeasure.point_mass(3, 0)
    b = GridMeasure.point_mass(3, 2)
    assert emd_cdf_1d(a, b) == pytest.approx(2.0)
    assert emd_cdf_1d(a, a) == 0.0


def test_cdf_matches_exact_on_random_pairs(rng):
    for _ in range(50):
        a = random_probability(64, 1, int(rng.integers(1, 8)), rng)
        b = random_probability(64, 1, int(rng.integers(1, 8)), rng)
        assert emd_cdf_1d(a, b) == pytest.approx(emd(a, b), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(atoms_strategy(6, 2, 3), atoms_strategy(6, 2, 3), atoms_strategy(6, 2, 3))
def test_metric_axioms(a, b, c):
    x, y, z = prob(6, 2, a), prob(6, 2, b), prob(6, 2, c)
    assert emd(x, y) == pytest.approx(emd(y, x), abs=1e-9)
    assert emd(x, y) <= emd(x, z) + emd(z, y) + 1e-9


def test_best_k_sparse_example():
    third = 1 / 3
    x = GridMeasure.from_atoms(8, 2, {(0, 0): third, (0, 1): third, (7, 7): 1 - 2 * third})
    centers, cost, approx = best_k_sparse(x, 2)
    assert cost == pytest.approx(1 / 3)
    assert (7, 7) in centers and ((0, 0) in centers or (0, 1) in centers)
    assert emd(x, approx) == pytest.approx(cost)


def test_best_k_sparse_matches_brute_force(rng):
    grid = [(i, j) for i in range(6) for j in range(6)]
    for _ in range(5):
        x = random_probability(6, 2, 5, rng)
        _, cost, _ = best_k_sparse(x, 2)
        assert cost == pytest.approx(brute_kmedian(x.points, x.weights, 2, grid))


def test_k_sparse_input_has_zero_cost():
    x = GridMeasure.from_atoms(8, 2, {(1, 1): 0.5, (6, 2): 0.5})
    centers, cost, _ = best_k_sparse(x, 2)
    assert cost == 0.0 and set(centers) == {(1, 1), (6, 2)}


def test_granularity_examples():
    x = GridMeasure.from_atoms(4, 1, {0: 0.25, 3: 0.75})
    assert check_granularity(x, GranularitySpec(4))
    assert check_granularity(x, GranularitySpec(8))
    y = GridMeasure.from_atoms(4, 1, {0: 1 / 3, 3: 2 / 3})
    assert not check_granularity(y, GranularitySpec(4))


def test_measure_file_round_trip(tmp_path):
    x = GridMeasure.from_atoms(16, 2, {(1, 2): 0.1, (15, 0): 0.9})
    write_measure(tmp_path / "x.measure", x)
    assert read_measure(tmp_path / "x.measure") == x
    assert parse_measure(format_measure(x)) == x


@pytest.mark.parametrize("points, weights", [
    ([(0, 0)], [0.5]),                   # not a probability measure
    ([(0, 0), (0, 0)], [0.5, 0.5]),      # duplicate point
    ([(0, 9)], [1.0]),                   # outside the grid
    ([(0, 0), (1, 1)], [1.5, -0.5]),     # negative weight
])
def test_invalid_measures_raise(points, weights):
    with pytest.raises(ContractViolation):
        GridMeasure(8, 2, points, weights)


def test_bad_file_header_raises():
    with pytest.raises(ContractViolation):
        parse_measure("not a measure\n0 0 1.0\n")
