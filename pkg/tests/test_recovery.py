import json
import math

import numpy as np
import pytest

from emdsketch import ContractViolation, GridMeasure, best_k_sparse, emd
from emdsketch.instances import clusters_with_noise
from emdsketch.recovery import derive_params, get_universe, recover_interval, recover_square


def test_params_example_satisfies_all_conditions():
    p = derive_params(0.25, 1.0, 32.0, K_quasi=1.0, D_eff=4.0)
    # independent substitution
    a, g = 1 - 0.25 / 8, 8 * 4 / 0.25
    b = (a + 2 * g) / a
    L = 0
    while 2 * g * a ** L * 32 > 1.0:
        L += 1
    assert (p.alpha, p.gamma) == (a, g)
    assert p.beta == pytest.approx(b)
    assert p.L == L == 284
    assert p.violations() == []
    assert 4 * g / (a * (g - 4)) <= 1.25 * 4


def test_gamma_at_most_DK_raises():
    with pytest.raises(ContractViolation):
        derive_params(0.25, 1.0, 32.0, D_eff=4.0, gamma=4.0)


def test_lambda_at_tight_boundary_gives_zero_levels():
    p = derive_params(0.25, 2 * 32 * 32.0, 32.0)
    assert p.L == 0


def test_epsilon_range_enforced():
    with pytest.raises(ContractViolation):
        derive_params(0.5, 1.0, 32.0)


def test_sparse_input_recovered_within_lambda():
    x = GridMeasure.from_atoms(16, 2, {(3, 4): 0.35, (12, 9): 0.65})
    res = recover_square(x, 2, 0.25, 0.8, 1, mode="oracle")
    assert emd(x, res.estimate) <= 0.8


def test_oracle_mode_guarantee_and_audits():
    U = get_universe(16, 2, 2, 20)
    for t in range(10):
        x = clusters_with_noise(16, 2, 2, 20, np.random.default_rng(500 + t))
        res = recover_square(x, 2, 0.25, 0.8, t, mode="oracle", keep_sets=True)
        p = res.params
        d = U.dist_measure(x)
        opt, ystar = float(d.min()), int(d.argmin())
        got = emd(x, res.estimate)
        assert got <= max(1.25 * opt, 0.8) + 1e-9
        q_prev = res.q_y0
        for i, S in enumerate(res.sets, start=1):
            if q_prev <= p.gamma * p.radius(i - 1):
                assert U.dist_member(ystar, S).min() <= p.radius(i) + 1e-9
            if i - 1 < len(res.trace):
                q_prev = res.trace[i - 1].q
        if res.terminated_at == "L":
            assert got <= 2 * p.gamma * p.alpha ** p.L * p.Lambda + 1e-9


def test_sketch_recovery_is_deterministic_and_serializable():
    x = clusters_with_noise(16, 2, 2, 20, np.random.default_rng(3))
    a = recover_square(x, 2, 0.25, 0.8, 11)
    b = recover_square(x, 2, 0.25, 0.8, 11)
    assert a.estimate == b.estimate and a.to_json() == b.to_json()
    doc = json.loads(a.to_json(get_universe(16, 2, 2, 20)))
    assert doc["meta"]["mode"] == "sketch" and doc["trace"]


def test_sketch_recovery_meets_bound_on_a_few_seeds():
    from emdsketch.calibration import constants_for
    _, D = constants_for(16, 2, 0.2)
    good = 0
    for t in range(3):
        x = clusters_with_noise(16, 2, 2, 20, np.random.default_rng(900 + t))
        got = emd(x, recover_square(x, 2, 0.25, 0.8, t).estimate)
        good += got <= 1.25 * D * best_k_sparse(x, 2)[1] + 0.8
    assert good >= 2


def test_interval_point_mass_recovered():
    x = GridMeasure.point_mass(64, 17)
    res = recover_interval(x, 1, 0.3, 0.5, 0)
    assert emd(x, res.estimate) <= 0.5


def test_interval_recovery_tight(rng):
    good = 0
    for t in range(6):
        x = clusters_with_noise(64, 1, 2, 20, rng)
        res = recover_interval(x, 2, 0.3, 0.5, t)
        good += emd(x, res.estimate) <= 1.3 * best_k_sparse(x, 2)[1] + 0.5
    assert good >= 4


def test_non_probability_input_raises():
    x = GridMeasure(16, 2, [(0, 0)], [2.0], "general")
    with pytest.raises(ContractViolation):
        recover_square(x, 2, 0.25, 0.8, 0)
