import numpy as np
import pytest
from scipy.stats import chisquare

from emdsketch import ContractViolation, GridMeasure, emd
from emdsketch.embed import (GridShift, coarse_sides, embed_cdf, embed_coarse, embed_grid, n_levels,
                             sample_shift)
from emdsketch.instances import random_probability

from conftest import grid_norm_pair


def test_self_difference_is_zero():
    x = GridMeasure.from_atoms(16, 2, {(3, 4): 0.25, (9, 1): 0.75})
    v = embed_grid(x, x, GridShift((5, 2)))
    assert v.nnz == 0 and v.l1() == 0.0


@pytest.mark.parametrize("sx", range(4))
@pytest.mark.parametrize("sy", range(4))
def test_unit_edge_matches_hand_enumeration(sx, sy):
    p, q = (0, 0), (1, 0)
    a, b = GridMeasure.point_mass(4, p), GridMeasure.point_mass(4, q)
    got = embed_grid(a, b, GridShift((sx, sy))).l1()
    assert n_levels(4) == 3
    assert got == pytest.approx(grid_norm_pair(p, q, (sx, sy), 3))


def test_level_values_are_scaled_cell_masses():
    x = GridMeasure.from_atoms(4, 2, {(0, 0): 0.5, (3, 3): 0.5})
    ent = embed_grid(x, shift=GridShift((0, 0))).entries()
    assert ent[(0, 0, 0)] == 0.5 and ent[(0, 3, 3)] == 0.5
    assert ent[(1, 0, 0)] == 1.0 and ent[(1, 1, 1)] == 1.0
    assert ent[(2, 0, 0)] == 4.0                     # whole padded square at level 2


def test_grid_norm_bounds_emd_from_below_by_half(rng):
    # any two points split at level t cost at most 2^(t+1) per unit, so ‖G_s μ‖₁ >= EMD / 2
    for _ in range(100):
        a = random_probability(64, 2, int(rng.integers(1, 5)), rng)
        b = random_probability(64, 2, int(rng.integers(1, 5)), rng)
        s = GridShift(tuple(int(v) for v in rng.integers(0, 64, 2)))
        assert embed_grid(a, b, s).l1() >= 0.5 * emd(a, b) - 1e-9


def test_embedding_is_linear(rng):
    a = random_probability(16, 2, 3, rng)
    b = random_probability(16, 2, 3, rng)
    s = GridShift((7, 2))
    d = embed_grid(a, b, s) - (embed_grid(a, shift=s) - embed_grid(b, shift=s))
    assert np.abs(d.values).max(initial=0.0) < 1e-12


def test_cdf_examples():
    assert np.allclose(embed_cdf(GridMeasure.point_mass(4, 0)).values, [1, 1, 1, 1])
    u = GridMeasure.from_atoms(4, 1, {0: 0.5, 1: 0.5})
    assert np.allclose(embed_cdf(u).values, [0.5, 1, 1, 1])


def test_cdf_gap_is_emd(rng):
    for _ in range(20):
        a = random_probability(32, 1, 4, rng)
        b = random_probability(32, 1, 4, rng)
        assert embed_cdf(a, b).l1() == pytest.approx(emd(a, b), abs=1e-9)


def test_shift_sampling_is_reproducible_and_uniform():
    assert sample_shift(16, 3) == sample_shift(16, 3)
    counts = np.zeros(16)
    for s in range(10_000):
        counts[sample_shift(16, s, dims=1).s[0]] += 1
    assert chisquare(counts).pvalue > 0.01


def test_shift_outside_grid_raises():
    x = GridMeasure.point_mass(8, (0, 0))
    with pytest.raises(ContractViolation):
        embed_grid(x, shift=GridShift((8, 0)))


def test_coarse_sides():
    assert coarse_sides(64, 2) == [16, 4, 1]
    assert coarse_sides(64, 4) == [4, 1]


def test_coarse_self_difference_and_short_edge():
    x = GridMeasure.from_atoms(64, 2, {(1, 1): 1.0})
    assert embed_coarse(x, x, 2, shift=GridShift((0, 0))).norm() == 0.0
    # an edge of length 2 inside one finest-level parent block: only that block's EMD counts
    y = GridMeasure.point_mass(64, (3, 1))
    e = embed_coarse(x, y, 2, shift=GridShift((0, 0)))
    assert e.norm() == pytest.approx(2.0)


def test_coarse_norm_dominates_emd_up_to_constant(rng):
    ratios = []
    for _ in range(50):
        a = random_probability(64, 2, 3, rng)
        b = random_probability(64, 2, 3, rng)
        s = GridShift(tuple(int(v) for v in rng.integers(0, 64, 2)))
        ratios.append(embed_coarse(a, b, 2, shift=s).norm() / emd(a, b))
    assert min(ratios) > 0.25
