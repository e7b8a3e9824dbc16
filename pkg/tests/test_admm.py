import numpy as np
import pytest

from otpalm.admm import AdmmConfig, AdmmState, _Solvers, dadmm_step, dsgsadmm_step, warm_start
from otpalm.auglag import kkt_residuals
from otpalm.instances import ClassicalSpec, gen_classical
from otpalm.model import GroupPartition, Regularizer, build_classical, build_partial
from otpalm.prox import conj_p, prox_p

from conftest import random_reg_instance, tiny_lp


def test_moreau_identity(rng):
    pd = random_reg_instance(rng, 3, 4, lambda1=0.4, lambda2=0.6)
    s = 1.7
    for _ in range(20):
        K = rng.standard_normal((3, 4))
        X = rng.standard_normal((3, 4))
        # prox of the conjugate recovered from prox_p, evaluated as an argmin of p*(.) + 1/(2s)||. - (K+X/s)||^2
        w = K + X / s
        pstar = w - prox_p(s * w, s, pd.reg) / s
        # optimality: prox_p(s w)/s is a subgradient of p* at pstar, i.e. p*(pstar) + p(x) = <pstar, x>
        x = prox_p(s * w, s, pd.reg)
        val = conj_p(pd.reg, pstar)[0]
        p = pd.reg.lambda1 * pd.reg.partition.omega @ pd.reg.partition.norms(x) + 0.5 * pd.reg.lambda2 * np.vdot(x, x)
        assert val + p == pytest.approx(np.vdot(pstar, x), abs=1e-12)


def test_fixed_point_has_zero_residual():
    pd = build_classical([[2.0]], [1.0], [1.0])
    dual, primal, stats = warm_start(pd, AdmmConfig(tol=1e-12, max_iter=5000))
    assert stats["eta"] <= 1e-12
    np.testing.assert_allclose(primal.X, [[1.0]], atol=1e-10)
    assert dual.u[0] + dual.v[0] == pytest.approx(2.0, abs=1e-10)
    st = AdmmState.zeros(pd)
    st.W, st.u, st.v, st.X = dual.W, dual.u, dual.v, primal.X
    st.Xi = pd.C - pd.adjoint(dual.W, dual.u, dual.v)
    st.zeta, st.xi = -dual.u, -dual.v
    nxt = dsgsadmm_step(st, pd)
    assert kkt_residuals(pd, nxt.primal(), nxt.dual()).eta <= 1e-10


def test_zero_iterations_when_already_optimal():
    pd = build_classical([[2.0]], [1.0], [1.0])
    dual, primal, _ = warm_start(pd, AdmmConfig(tol=1e-12, max_iter=5000))
    st = AdmmState.zeros(pd)
    st.u, st.v, st.X = dual.u, dual.v, primal.X
    _, _, stats = warm_start(pd, AdmmConfig(tol=1e-6), state=st)
    assert stats["iterations"] == 0


def test_w_step_is_noop_for_classical(rng):
    pd = tiny_lp()
    st = AdmmState.zeros(pd)
    st.u = rng.standard_normal(2)
    nxt = dsgsadmm_step(st, pd)
    assert nxt.W.shape == (0, 0)


def test_w_step_scalar_partial(rng):
    pd = build_partial(rng.random((2, 3)), [0.5, 0.5], [0.3, 0.3, 0.4], 0.6)
    solvers = _Solvers(pd)
    R = np.array([[2.4]])
    # (A A^T) W (B^T B) = R with A = 1^T, B = 1 is m * n * W = R
    np.testing.assert_allclose(solvers.w_block(R), R / 6.0)


@pytest.mark.parametrize("pd", [tiny_lp(C=[[0.0, 2.0], [1.0, 0.5]], alpha=np.array([0.3, 0.7])),
                                build_partial(np.array([[0.0, 2.0], [1.0, 0.5]]), [0.5, 0.5], [0.5, 0.5], 0.8,
                                              Regularizer(0.0, 1.0, GroupPartition.singletons(2, 2)))])
def test_both_variants_reach_same_point(pd):
    a = warm_start(pd, AdmmConfig("dadmm", tol=1e-10, max_iter=20000))
    b = warm_start(pd, AdmmConfig("dsgsadmm", tol=1e-10, max_iter=20000))
    assert a[2]["eta"] <= 1e-10 and b[2]["eta"] <= 1e-10
    np.testing.assert_allclose(a[1].X, b[1].X, atol=1e-6)


def test_dadmm_step_manual():
    pd = tiny_lp()
    st = dadmm_step(AdmmState.zeros(pd), pd)
    assert st.it == 1 and np.all(np.isfinite(st.X))


def test_reaches_tolerance_on_generated_instance():
    pd = gen_classical(ClassicalSpec(30, 30, seed=4))
    _, _, stats = warm_start(pd, AdmmConfig())
    assert stats["eta"] <= 1e-3 and stats["iterations"] <= 500
