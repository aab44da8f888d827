import numpy as np
import pytest

from emdsketch import ContractViolation
from emdsketch.median import (MedianInstance1D, calibrate_C_G, cauchy_subspace_check, dvoretsky_fraction,
                              dvoretsky_rows, euclid_cost, gaussian_embedding, measure_1d, med_norm, median_1d,
                              median_dd, min_rows_1d)


def test_med_norm_row_permutation_and_scaling(rng):
    v = rng.standard_normal(101)
    assert med_norm(v) == med_norm(rng.permutation(v))
    assert med_norm(-3.0 * v) == pytest.approx(3.0 * med_norm(v))
    assert med_norm(np.zeros(7)) == 0.0


def test_single_basis_vector_sandwich():
    rep = cauchy_subspace_check(np.eye(1, 50), 2000, 0.1)
    assert rep.fraction >= 0.99


def test_point_mass_median():
    inst = MedianInstance1D.from_points(16, [2, 2, 2])
    j, _ = median_1d(inst, 2000, 0.2, 0)
    assert j == 2 and inst.cost(j)[0] == 0.0


def test_three_points_example():
    inst = MedianInstance1D.from_points(16, [1, 2, 9])
    c = inst.cost(np.arange(16))
    assert c.min() == 8.0 and int(c.argmin()) == 2        # brute force over all j
    good = sum(inst.cost(median_1d(inst, 2000, 0.2, s)[0])[0] <= 1.2 * 8 for s in range(100))
    assert good >= 90


def test_symmetric_instance_lands_on_the_plateau():
    inst = MedianInstance1D.from_points(16, [3, 10])
    c = inst.cost(np.arange(16))
    j, _ = median_1d(inst, 2000, 0.2, 4)
    assert c[j] <= 1.2 * c.min()


def test_measurements_are_linear(rng):
    x = rng.random(32) * (rng.random(32) < 0.3)
    y = rng.random(32) * (rng.random(32) < 0.3)
    # same support so the column blocks line up
    s = (x + y) > 0
    x, y = np.where(s, x + 1e-3, 0), np.where(s, y + 1e-3, 0)
    M = lambda v: measure_1d(MedianInstance1D(32, v), 300, 9)
    assert np.allclose(M(x + y), M(x) + M(y))


def test_scale_invariance_of_argmin(rng):
    pts, w = rng.integers(0, 64, 5), rng.random(5)
    a = median_1d(MedianInstance1D.from_points(64, pts, w), 2000, 0.2, 3)[0]
    b = median_1d(MedianInstance1D.from_points(64, pts, 10 * w), 2000, 0.2, 3)[0]
    assert a == b
    P = rng.integers(0, 8, (4, 2))
    assert median_dd(P, w[:4], 2, 8, 1000, 0.2, 1)[0] == median_dd(P, 10 * w[:4], 2, 8, 1000, 0.2, 1)[0]


def test_too_few_rows_and_empty_instance_raise():
    inst = MedianInstance1D.from_points(16, [1])
    with pytest.raises(ContractViolation):
        median_1d(inst, min_rows_1d(0.2) - 1, 0.2, 0)
    with pytest.raises(ContractViolation):
        median_1d(MedianInstance1D(16, np.zeros(16)), 2000, 0.2, 0)
    with pytest.raises(ContractViolation):
        median_dd([(0, 0)], [0.0], 2, 8, 100, 0.2, 0)


def test_dvoretsky_sandwich_with_calibrated_constant():
    for d in (2, 3):
        C = calibrate_C_G(d, 0.2)
        G = gaussian_embedding(d, dvoretsky_rows(d, 0.2, C), 0.2, 0)
        assert dvoretsky_fraction(G, 0.2) >= 0.99


def test_all_mass_at_one_point():
    p, _ = median_dd([(5, 2)], [3.0], 2, 8, 500, 0.2, 0)
    assert p == (5, 2)


def test_planar_median_random_instances():
    P = np.stack(np.meshgrid(np.arange(8), np.arange(8), indexing="ij"), -1).reshape(-1, 2)
    good = 0
    for s in range(30):
        g = np.random.default_rng(s)
        pts, w = g.integers(0, 8, (5, 2)), g.random(5)
        p, _ = median_dd(pts, w, 2, 8, 2000, 0.2, s)
        good += euclid_cost(pts, w, [p])[0] <= 1.44 * euclid_cost(pts, w, P).min() + 1e-12
    assert good >= 27
