import math

import numpy as np
import pytest

from emdsketch import ContractViolation
from emdsketch.packing import certificate, doubling_probe, emd_weighted, gen_packing_1d, gen_packing_2d


@pytest.mark.parametrize("delta", [64, 256])
def test_1d_certificates_are_exact(delta):
    fam = gen_packing_1d(4, delta)
    for I in fam.sample(20, np.random.default_rng(delta)):
        assert certificate(fam, I) == pytest.approx(2.0, abs=1e-9)


def test_all_zero_index_splits_mass_evenly():
    fam = gen_packing_1d(4, 64)
    B = fam.B((0, 0))
    assert B.atoms() == {(0,): 1.0, (1,): 1.0, (32,): 1.0, (33,): 1.0}
    assert B.total_mass == fam.A.total_mass == 4.0


def test_cardinality():
    fam = gen_packing_1d(8, 256)          # U = 32
    assert fam.log_U == 5 and fam.cardinality == 6 ** 4


def test_2d_certificates():
    fam = gen_packing_2d(16, 64)
    assert fam.slots == 4
    for I in fam.sample(10, np.random.default_rng(0)):
        assert certificate(fam, I) == pytest.approx(4.0, abs=1e-9)
    ys = sorted({a[1] for a in fam.anchors})
    assert all(b - a >= 2 * 64 / math.sqrt(16) for a, b in zip(ys, ys[1:]))


def test_single_row_matches_1d():
    f2, f1 = gen_packing_2d(4, 64), gen_packing_1d(2, 64)
    assert [a[0] for a in f2.anchors] == [a[0] for a in f1.anchors] and f2.U == f1.U


@pytest.mark.parametrize("k, delta", [(3, 64), (4, 60), (1, 64)])
def test_bad_parameters_raise(k, delta):
    with pytest.raises(ContractViolation):
        gen_packing_1d(k, delta)


def test_weighted_emd_homogeneous():
    fam = gen_packing_1d(4, 64)
    B = fam.B((2, 3))
    assert emd_weighted(fam.A.scaled(3.0), B.scaled(3.0)) == pytest.approx(3 * emd_weighted(fam.A, B))


def test_probe_edge_cases():
    fam = gen_packing_1d(4, 64)
    idx = [(1, 2), (1, 2), (0, 0)]
    rep = doubling_probe(fam, indices=idx)
    assert rep.distinct == 2
    assert doubling_probe(fam, r_small=2 * fam.k, indices=idx).separated == 1


def test_probe_grows_with_delta():
    sizes = [doubling_probe(gen_packing_1d(4, d), g=np.random.default_rng(1)).separated for d in (64, 256, 1024)]
    assert sizes[0] <= sizes[1] <= sizes[2] and sizes[0] < sizes[2]
