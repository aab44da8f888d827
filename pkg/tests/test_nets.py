import itertools

import numpy as np
import pytest

from emdsketch import ContractViolation, GridMeasure, emd
from emdsketch.cover import CoverKnobs, count_tuples, round_to_granularity, sparse_flow
from emdsketch.measure import GranularitySpec
from emdsketch.nets import (BallCoverRequest, NetRegistry, cover_ball, expand_registry, greedy_rnet,
                            sample_in_ball, snap_to_granularity)
from emdsketch.recovery import center_index, derive_params, get_universe
from emdsketch.universe import SparseUniverse

from conftest import lp_emd_measures


# covers

def test_point_mass_ball_is_covered_exactly():
    mu = GridMeasure.point_mass(8, (0, 0))
    bc = cover_ball(BallCoverRequest(mu, 2.0, 1))
    qs = [(a, b) for a in range(3) for b in range(3) if a + b <= 2]
    assert len(qs) == 6            # the ball is clipped by the grid corner
    for q in qs:
        nu = GridMeasure.point_mass(8, q)
        w = bc.witness(nu)
        assert bc.contains(w.assignment)
        assert emd(nu, w.measure) <= 1.0 + 1e-12


def test_interior_point_mass_all_thirteen_neighbours():
    mu = GridMeasure.point_mass(8, (4, 4))
    bc = cover_ball(BallCoverRequest(mu, 2.0, 1))
    qs = [(4 + a, 4 + b) for a in range(-2, 3) for b in range(-2, 3) if abs(a) + abs(b) <= 2]
    assert len(qs) == 13
    assert max(bc.covering_distance(GridMeasure.point_mass(8, q)) for q in qs) <= 1.0


def test_center_covers_itself():
    mu = GridMeasure.from_atoms(16, 2, {(2, 2): 0.5, (9, 4): 0.5})
    bc = cover_ball(BallCoverRequest(mu, 3.0, 2))
    assert bc.covering_distance(mu) == 0.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sampled_ball_members_within_half_radius(k):
    g = np.random.default_rng(100 + k)
    mu = GridMeasure.from_atoms(16, 2, {(3 * i + 2, 11 - 4 * i): 1 / k for i in range(k)})
    bc = cover_ball(BallCoverRequest(mu, 4.0, k))
    for _ in range(40):
        nu = sample_in_ball(mu, 4.0, k, g)
        assert emd(mu, nu) <= 4.0 + 1e-9
        assert nu.support_size <= k
        w = bc.witness(nu)
        assert bc.contains(w.assignment)
        assert emd(nu, w.measure) <= 2.0


def test_materialized_cover_matches_count_and_covers():
    knobs = CoverKnobs(ratio=2.0, net_divisor=1.0, mass_divisor=1.0, multiplicity=1)
    mu = GridMeasure.point_mass(4, (1, 1))
    bc = cover_ball(BallCoverRequest(mu, 1.0, 1), knobs)
    members = bc.materialize()
    n, exact = bc.size()
    assert exact and len(members) <= n
    # brute force: every point mass within distance 1 is within 1/2 of some member
    for q in [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)]:
        nu = GridMeasure.point_mass(4, q)
        assert min(emd(nu, m) for m in members) <= 0.5


def test_count_tuples_matches_enumeration():
    vals = np.array([0.0, 0.1, 0.2, 0.4, 0.8])
    for c in (1, 2, 3, 4):
        n, exact = count_tuples(vals, c, 0.5)
        brute = sum(sum(t) <= 0.5 + 1e-12 for t in itertools.product(vals, repeat=c))
        assert exact and n == brute


def test_contains_rejects_foreign_assignments():
    mu = GridMeasure.point_mass(16, (5, 5))
    bc = cover_ball(BallCoverRequest(mu, 2.0, 1))
    assert not bc.contains([[(1.5, (6, 5), 0.5)]])          # length not on the geometric grid
    assert not bc.contains([[(1.0, (6, 5), 2.0)]])          # more mass than the atom holds


def test_sparse_flow_is_optimal_and_a_forest(rng):
    from emdsketch.instances import random_probability
    for _ in range(20):
        a = random_probability(8, 2, 3, rng)
        b = random_probability(8, 2, 3, rng)
        edges = sparse_flow(a, b)
        cost = sum(w * np.abs(a.points[i] - b.points[j]).sum() for i, j, w in edges)
        assert cost == pytest.approx(lp_emd_measures(a, b), abs=1e-9)
        assert len(edges) <= a.support_size + b.support_size - 1


def test_bad_cover_requests_raise():
    mu = GridMeasure.from_atoms(8, 2, {(0, 0): 0.5, (1, 1): 0.5})
    with pytest.raises(ContractViolation):
        BallCoverRequest(mu, 1.0, 1)
    with pytest.raises(ContractViolation):
        BallCoverRequest(mu, 0.0, 2)


# snapping

def test_snap_examples():
    g = GranularitySpec(2)
    x = GridMeasure.from_atoms(8, 1, {0: 0.3, 5: 0.7})
    (y,) = snap_to_granularity([x], g, 10.0)
    # candidates on the same support: (1/2, 1/2) at EMD 1, (0, 1) at EMD 1.5
    assert y.atoms() == {(0,): 0.5, (5,): 0.5}
    assert emd(x, y) == pytest.approx(1.0)
    assert snap_to_granularity([x], g, 0.0) == []
    z = GridMeasure.from_atoms(8, 1, {0: 0.5, 5: 0.5})
    assert snap_to_granularity([z, z], g, 0.0) == [z]


def test_rounding_keeps_granularity(rng):
    from emdsketch.instances import random_probability
    for _ in range(20):
        x = random_probability(16, 2, 3, rng)
        y = round_to_granularity(x, 20)
        assert np.allclose(y.weights * 20, np.round(y.weights * 20))


# nets

def test_greedy_rnet_properties(rng):
    from emdsketch.instances import random_probability
    pts = [random_probability(8, 2, 2, rng) for _ in range(50)]
    net = greedy_rnet(pts, 2.0)
    for a, b in itertools.combinations(net, 2):
        assert emd(a, b) > 2.0
    for p in pts:
        assert min(emd(p, q) for q in net) <= 2.0
    assert greedy_rnet(pts[:1], 1.0) == pts[:1]
    x = GridMeasure.point_mass(8, (0, 0))
    y = GridMeasure.point_mass(8, (1, 2))
    assert len(greedy_rnet([x, y], 5.0)) == 1


def _registry(delta=8, k=2, N=4, eps=0.25):
    U = SparseUniverse(delta, 2, k, N)
    p = derive_params(eps, 0.5, 2.0 * 2 * delta)
    y0 = center_index(U)
    return U, p, NetRegistry(U, p.radii(), y0), y0


def test_level_zero_is_the_root():
    U, p, reg, y0 = _registry()
    assert reg.expand(0, y0, 1e9) == [y0]


def test_expansions_are_idempotent_separated_and_covering():
    U, p, reg, y0 = _registry()
    anchor = y0
    for i in range(1, 40, 6):
        rad = p.beta * p.radius(i)
        S = reg.expand(i, anchor, min(rad, 6.0))
        assert reg.expand(i, anchor, min(rad, 6.0)) == S
        assert reg.separation_ok(i)
        # every member of the ball is within r_i of the level's net
        ball = U.ball(anchor, min(rad, 6.0))
        pts = reg.level_points(i)
        for j in ball[:: max(1, len(ball) // 50)]:
            assert U.dist_member(int(j), pts).min() <= p.radius(i) + 1e-12
        anchor = S[len(S) // 2]


def test_universe_distances_match_lp(rng):
    U = get_universe(16, 2, 2, 20)
    from emdsketch.instances import clusters_with_noise
    x = clusters_with_noise(16, 2, 2, 20, rng)
    J = rng.integers(0, len(U), 10)
    got = U.dist_measure(x, J)
    for j, d in zip(J, got):
        assert d == pytest.approx(lp_emd_measures(x, U.measure(int(j))), abs=1e-9)
    a = int(J[0])
    for j, d in zip(J, U.dist_member(a, J)):
        assert d == pytest.approx(emd(U.measure(a), U.measure(int(j))), abs=1e-9)


def test_expand_with_foreign_anchor_raises():
    U, p, reg, y0 = _registry()
    with pytest.raises(ContractViolation):
        expand_registry(reg, 1, GridMeasure.from_atoms(8, 2, {(0, 0): 0.3, (1, 1): 0.7}), 1.0)
