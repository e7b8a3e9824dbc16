import math

import numpy as np
import pytest

from otpalm import AdmmConfig, SolverConfig, Status, solve
from otpalm.auglag import ALParams, DeltaTriple
from otpalm.cipalm import (AbsoluteA, AbsoluteAB, AbsoluteB, Relative, Schedules, check_inexact, check_schedules,
                           correction_step, schedule_values, snipal_policy)
from otpalm.instances import GroupDASpec, gen_group_da
from otpalm.model import DualPoint, PrimalPoint, build_classical
from otpalm.oracles import lp_oracle, reg_oracle

from conftest import tiny_lp

# frozen reference objective of the 3x3 group-regularized instance below
GROUPDA_3x3_OBJ = 3.871238578685241


def _dt(nd, npr, nrm):
    return DeltaTriple(np.array([nrm]), np.array([npr]), np.array([nd]))


def _ap(sigma, tau):
    z = np.zeros(1)
    return ALParams(sigma, tau, PrimalPoint(np.zeros((1, 1)), z, z), DualPoint(np.zeros((0, 0)), z, z))


def test_relative_policy_arithmetic():
    ap = _ap(2.0, 1.0)
    pol = Relative(0.5)
    assert check_inexact(pol, 0, ap, _dt(1.0, 1.0, 0.3))
    assert not check_inexact(pol, 0, ap, _dt(1.0, 1.0, 0.4))
    for p in (pol, AbsoluteA(lambda k: 0.0), AbsoluteB(lambda k: 0.1), AbsoluteAB(lambda k: 0.0, lambda k: 0.0)):
        assert check_inexact(p, 3, ap, _dt(1.0, 1.0, 0.0))
    assert not check_inexact(AbsoluteA(lambda k: 0.0), 0, ap, _dt(1.0, 1.0, 1e-12))


def test_relative_rho_range():
    with pytest.raises(ValueError):
        Relative(1.0)


def test_snipal_policy_sequences():
    pol = snipal_policy(1.0, 1.1, 1e-3, 2.1)
    assert isinstance(pol, AbsoluteAB)
    assert pol.eps(1) == pytest.approx(2 ** -1.1)
    assert pol.delta(0) == pytest.approx(1e-3)
    assert isinstance(snipal_policy(kind="A"), AbsoluteA)
    assert isinstance(snipal_policy(kind="B"), AbsoluteB)


def test_correction_step():
    pd = build_classical([[2.0]], [1.0], [1.0])
    u, v = np.array([0.3]), np.array([0.4])
    ap = ALParams(2.0, 1.0, pd.zero_primal(), DualPoint(np.zeros((0, 0)), u, v))
    pt = PrimalPoint(np.array([[1.1]]), np.zeros(1), np.zeros(1))
    dp, _ = correction_step(ap, ap.anchor_dual, pt, pd)
    np.testing.assert_allclose(dp.u, u - 0.2)
    np.testing.assert_allclose(dp.v, v - 0.2)
    feas = PrimalPoint(np.array([[1.0]]), np.zeros(1), np.zeros(1))
    dp, _ = correction_step(ap, ap.anchor_dual, feas, pd)
    np.testing.assert_array_equal(dp.u, u)
    tilde = DualPoint(np.zeros((0, 0)), np.array([9.0]), np.array([9.0]))
    dp, _ = correction_step(ap, tilde, pt, pd, apply_correction=False)
    assert dp is tilde


def test_schedules():
    s = Schedules()
    assert schedule_values(s, 0) == (5.0, 1.0)
    assert schedule_values(s, 1)[0] == pytest.approx(10.0)
    assert schedule_values(s, 40)[1] == 1e4
    assert check_schedules(s)
    assert not check_schedules(Schedules(tau_growth=lambda k: 0.5))
    with pytest.raises(ValueError):
        schedule_values(s, -1)
    with pytest.raises(ValueError):
        Schedules(tau0=0.0)


def test_solve_one_by_one():
    rep = solve(build_classical([[2.0]], [1.0], [1.0]))
    assert rep.status is Status.CONVERGED
    np.testing.assert_allclose(rep.primal.X, [[1.0]], atol=1e-6)
    assert rep.pobj == pytest.approx(2.0, abs=1e-5) and rep.eta < 1e-6


def test_solve_two_by_two_matching():
    pd = tiny_lp()
    rep = solve(pd)
    X, obj = lp_oracle(pd)
    assert rep.status is Status.CONVERGED
    assert rep.pobj == pytest.approx(obj, abs=1e-6)
    np.testing.assert_allclose(rep.primal.X, np.diag([0.5, 0.5]), atol=1e-5)


def test_solve_regularized_matches_oracle():
    pd = gen_group_da(GroupDASpec(3, 3, seed=0))
    _, obj = reg_oracle(pd)
    assert obj == pytest.approx(GROUPDA_3x3_OBJ, rel=1e-9)
    rep = solve(pd)
    assert rep.status is Status.CONVERGED
    assert abs(rep.pobj - obj) <= 1e-5 * abs(obj)


@pytest.mark.parametrize("policy", [snipal_policy(kind="A"), snipal_policy(kind="B"), snipal_policy(), Relative(0.4)])
@pytest.mark.parametrize("correction", [True, False])
def test_policies_and_variants_converge(policy, correction):
    pd = gen_group_da(GroupDASpec(6, 5, seed=2))
    rep = solve(pd, SolverConfig(policy=policy, apply_correction=correction))
    assert rep.status is Status.CONVERGED and rep.eta < 1e-6


def test_unscaled_and_warm_started_runs():
    pd = gen_group_da(GroupDASpec(6, 5, seed=1))
    a = solve(pd, SolverConfig(scale_data=False))
    b = solve(pd, SolverConfig(warm_start=AdmmConfig()))
    assert a.status is Status.CONVERGED and b.status is Status.CONVERGED
    assert a.pobj == pytest.approx(b.pobj, rel=1e-5)
    assert b.warm_start["iterations"] > 0


def test_iteration_and_time_limits():
    pd = gen_group_da(GroupDASpec(6, 5, seed=1))
    rep = solve(pd, SolverConfig(maxiter=1, tol=1e-14))
    assert rep.status is Status.MAX_ITER and rep.outer_iters == 1
    rep = solve(pd, SolverConfig(max_time=0.0, tol=1e-14))
    assert rep.status is Status.TIMEOUT
    assert math.isfinite(rep.eta)


def test_explicit_initial_point_is_respected():
    pd = build_classical([[2.0]], [1.0], [1.0])
    init = (DualPoint(np.zeros((0, 0)), np.array([1.0]), np.array([1.0])),
            PrimalPoint(np.array([[1.0]]), np.zeros(1), np.zeros(1)))
    rep = solve(pd, init=init)
    assert rep.outer_iters == 0 and rep.status is Status.CONVERGED


def test_trace_records_every_step():
    pd = tiny_lp()
    rep = solve(pd, SolverConfig(record_iterates=True))
    assert len(rep.trace) == rep.outer_iters
    assert rep.work_problem is not None and rep.work_problem.m == 2
