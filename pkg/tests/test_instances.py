import numpy as np
import pytest

from otpalm.errors import EmptySupport
from otpalm.instances import (ClassicalSpec, GroupDASpec, MartingaleSpec, barycentric_map, call_function,
                              convex_order_sup, gen_classical, gen_group_da, gen_martingale, sq_dist)
from otpalm.model import validate


def _same(a, b):
    np.testing.assert_array_equal(a.C, b.C)
    np.testing.assert_array_equal(a.alpha, b.alpha)
    np.testing.assert_array_equal(a.beta, b.beta)
    np.testing.assert_array_equal(a.constraints.S, b.constraints.S)
    np.testing.assert_array_equal(a.reg.partition.index, b.reg.partition.index)


def test_classical_generator():
    a = gen_classical(ClassicalSpec(7, 5, seed=3))
    _same(a, gen_classical(ClassicalSpec(7, 5, seed=3)))
    assert a.alpha.sum() == pytest.approx(1.0, abs=1e-12) and a.beta.sum() == pytest.approx(1.0, abs=1e-12)
    assert validate(a) == [] and np.all(a.C >= 0)


def test_cost_of_identical_supports():
    P = np.random.default_rng(0).standard_normal((4, 3))
    C = sq_dist(P, P)
    np.testing.assert_allclose(C, C.T, atol=1e-12)
    np.testing.assert_allclose(np.diag(C), 0.0, atol=1e-12)


def test_call_function():
    assert call_function([1.0], [1.0], 0.0) == 1.0
    assert call_function([0.5, 0.5], [0.0, 2.0], 2.0) == 0.0
    assert call_function([0.5, 0.5], [0.0, 2.0], 1.0) == 0.5


def test_convex_order_sup_examples():
    w, q = convex_order_sup(([1.0], [1.0]), ([0.5, 0.5], [0.0, 2.0]))
    np.testing.assert_allclose(w, [0.5, 0.5])
    np.testing.assert_allclose(q, [0.0, 2.0])
    w, q = convex_order_sup(([0.2, 0.8], [1.0, 3.0]), ([0.2, 0.8], [1.0, 3.0]))
    np.testing.assert_allclose(w, [0.2, 0.8])
    np.testing.assert_allclose(q, [1.0, 3.0])
    with pytest.raises(EmptySupport):
        convex_order_sup(([], []), ([1.0], [1.0]))


def test_convex_order_sup_dominates(rng):
    for _ in range(20):
        qa, qb = rng.standard_normal(5), rng.standard_normal(6)
        wa, wb = np.full(5, 0.2), np.full(6, 1 / 6)
        qb += wa @ qa - wb @ qb
        w, q = convex_order_sup((wa, qa), (wb, qb))
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert w @ q == pytest.approx(wa @ qa, abs=1e-12)
        for k in np.concatenate([qa, qb, q]):
            c = call_function(w, q, k)
            assert c >= call_function(wa, qa, k) - 1e-12 and c >= call_function(wb, qb, k) - 1e-12


def test_martingale_generator():
    pd = gen_martingale(MartingaleSpec(30, 25, seed=2))
    P, Q = pd.meta["P"].ravel(), pd.meta["Q"].ravel()
    assert pd.alpha @ P == pytest.approx(pd.beta @ Q, abs=1e-10)
    assert pd.beta.sum() == pytest.approx(1.0, abs=1e-12) and np.all(pd.beta > 0)
    _same(pd, gen_martingale(MartingaleSpec(30, 25, seed=2)))
    assert validate(pd) == []


def test_group_da_generator():
    pd = gen_group_da(GroupDASpec(10, 6, m1=4, seed=1))
    part = pd.reg.partition
    assert part.n_groups == 12
    assert set(part.sizes.tolist()) == {4, 6}
    np.testing.assert_array_equal(np.sort(part.index), np.arange(60))
    _same(pd, gen_group_da(GroupDASpec(10, 6, m1=4, seed=1)))
    sq = gen_group_da(GroupDASpec(10, 6, m1=4, omega="sqrt"))
    np.testing.assert_allclose(sq.reg.partition.omega, np.sqrt(sq.reg.partition.sizes))
    with pytest.raises(ValueError):
        gen_group_da(GroupDASpec(4, 4, m1=4))


def test_barycentric_map():
    out, absent = barycentric_map([[0.5, 0.5], [0.0, 0.3], [0.0, 0.0]], [0.0, 2.0])
    assert out[0, 0] == 1.0 and out[1, 0] == 2.0
    assert absent.tolist() == [False, False, True] and np.isnan(out[2, 0])
