import math

import numpy as np
import pytest

from emdsketch import ContractViolation, GridMeasure, emd
from emdsketch.calibration import constants_for
from emdsketch.embed import CDF_TAG, EmbeddedVector, GridShift, embed_grid
from emdsketch.instances import random_probability
from emdsketch.l1sketch import (AmplifiedSketch, CauchySketcher, SketchedMeasure, SketchParams, default_reps,
                                median_estimate, sketch)


def test_median_estimate_examples():
    assert median_estimate(np.array([-3.0, 1.0, 2.0])) == 2.0
    assert median_estimate(np.zeros(5)) == 0.0


def test_columns_depend_only_on_seed_and_key():
    a = CauchySketcher(50, 11).column(123)
    b = CauchySketcher(50, 11).column(123)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, CauchySketcher(50, 12).column(123))
    # a longer sketch extends the same stream
    assert np.array_equal(CauchySketcher(80, 11).column(123)[:50], a)


def test_large_seed_keys_stay_distinct():
    # seeds and keys above 2^62 once collapsed through a float conversion
    sk = CauchySketcher(64, (1 << 63) + 5)
    cols = sk.columns(CDF_TAG | np.arange(8))
    assert len({c.tobytes() for c in cols}) == 8


def test_sketch_is_linear(rng):
    a = random_probability(16, 2, 3, rng)
    b = random_probability(16, 2, 3, rng)
    s = GridShift((1, 9))
    sk = CauchySketcher(200, 5)
    lhs = sketch(embed_grid(a, b, s), sk).values
    rhs = (sketch(embed_grid(a, shift=s), sk) - sketch(embed_grid(b, shift=s), sk)).values
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_zero_vector_sketch():
    v = EmbeddedVector(np.zeros(0, np.int64), np.zeros(0), 1)
    assert np.all(sketch(v, CauchySketcher(10, 0)).values == 0)


def test_unit_entry_rows_are_standard_cauchy():
    # the median of |Cauchy| is 1
    vals = np.concatenate([CauchySketcher(1, s).column(7) for s in range(10_000)])
    assert np.median(np.abs(vals)) == pytest.approx(1.0, abs=0.05)


def test_median_estimator_concentrates():
    eps = 0.2
    m = int(math.ceil(100 / eps ** 2))
    v = EmbeddedVector(np.array([3, 8, 40]), np.array([0.5, -2.0, 1.5]), 1)
    norm = v.l1()
    inside = sum(abs(median_estimate(sketch(v, CauchySketcher(m, s))) / norm - 1) <= 0.3 for s in range(1000))
    assert inside >= 950


def test_default_reps():
    assert default_reps(64) == 13
    assert default_reps(2) == 3


def test_amplified_estimate_of_unit_masses_at_distance_seven():
    x = GridMeasure.point_mass(16, (2, 3))
    y = GridMeasure.point_mass(16, (6, 6))
    assert emd(x, y) == 7.0
    c_L, D = constants_for(16, 2, 0.2)
    hits = 0
    for t in range(200):
        sm = AmplifiedSketch(SketchParams(16, 2, 9, 64, 1000 + t, 0.2, c_L)).apply(x)
        hits += 7.0 <= sm.estimate(y) <= D * 7.0
    assert hits >= 2 / 3 * 200


def test_identical_query_estimates_zero():
    x = GridMeasure.from_atoms(16, 2, {(0, 0): 0.4, (9, 9): 0.6})
    sm = AmplifiedSketch(SketchParams(16, 2, 5, 32, 3)).apply(x)
    assert sm.estimate(x) == pytest.approx(0.0, abs=1e-9)   # table sums round, the difference is 0 up to that


def test_sketch_json_round_trip():
    x = GridMeasure.from_atoms(16, 2, {(0, 0): 0.4, (9, 9): 0.6})
    y = GridMeasure.point_mass(16, (4, 4))
    sm = AmplifiedSketch(SketchParams(16, 2, 5, 32, 3)).apply(x)
    back = SketchedMeasure.from_json(sm.to_json())
    assert back.estimate(y) == sm.estimate(y)


def test_bad_params_raise():
    with pytest.raises(ContractViolation):
        SketchParams(16, 2, 0, 10, 1)
    with pytest.raises(ContractViolation):
        SketchParams(16, 2, 3, 10, 1, mode="cdf")
    with pytest.raises(ContractViolation):
        CauchySketcher(0, 1)
