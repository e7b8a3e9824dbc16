"""ADMM on the dual problem, used to warm start the proximal ALM.

The dual problem is

    min  -<S,W> - <alpha,u> - <beta,v> + p*(-Xi) + p_r*(-zeta) + p_c*(-xi)
    s.t. u 1^T + 1 v^T + A^T W B^T + Xi = C,  u + zeta = 0,  v + xi = 0

with multipliers (X, y, z). Two variants are provided: a joint (W, u, v) update
(``dadmm``) and a symmetric Gauss-Seidel sweep W -> u -> v, aux, v -> u -> W
(``dsgsadmm``).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .auglag import kkt_residuals
from .model import ConeKind, DualPoint, PrimalPoint, ProblemData
from .prox import prox_cone, prox_p
from .ssn import normal_matrix, pcg


@dataclass(frozen=True)
class AdmmConfig:
    variant: str = "dsgsadmm"
    tol: float = 1e-3
    max_iter: int = 500
    sigma: float = 1.0
    gamma: float | None = None
    adapt: bool = True
    adapt_every: int = 20
    score_every: int = 1  # eta oscillates; sparse checks miss the dips
    dense_threshold: int = 4000

    def step_size(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return 1.618 if self.variant == "dadmm" else 1.95


@dataclass
class AdmmState:
    W: np.ndarray
    u: np.ndarray
    v: np.ndarray
    Xi: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    X: np.ndarray
    y: np.ndarray
    z: np.ndarray
    sigma: float = 1.0
    gamma: float = 1.95
    it: int = 0

    @classmethod
    def zeros(cls, pd: ProblemData, sigma=1.0, gamma=1.95) -> "AdmmState":
        m, n = pd.m, pd.n
        return cls(np.zeros((pd.mt, pd.nt)), np.zeros(m), np.zeros(n), np.zeros((m, n)), np.zeros(m),
                   np.zeros(n), np.zeros((m, n)), np.zeros(m), np.zeros(n), sigma, gamma)

    def dual(self) -> DualPoint:
        return DualPoint(self.W, self.u, self.v)

    def primal(self) -> PrimalPoint:
        return PrimalPoint(self.X, self.y, self.z)


class _Solvers:
    """Cached factorizations for the linear steps (all independent of sigma)."""

    def __init__(self, pd: ProblemData, dense_threshold: int = 4000):
        self.pd = pd
        self.dense_threshold = dense_threshold
        self._joint = None
        self._wfac = None

    def joint(self, rhs):
        """Solve ``(Amap Amap^T + Diag(0, I, I)) x = rhs``."""
        pd = self.pd
        k = pd.mt * pd.nt
        if pd.dual_dim <= self.dense_threshold:
            if self._joint is None:
                M = normal_matrix(pd, np.ones((pd.m, pd.n)))
                idx = np.arange(k, pd.dual_dim)
                M[idx, idx] += 1.0
                try:
                    self._joint = ("chol", sla.cho_factor(M, check_finite=False))
                except np.linalg.LinAlgError:
                    self._joint = ("pinv", np.linalg.pinv(M, hermitian=True))
            kind, fac = self._joint
            return sla.cho_solve(fac, rhs, check_finite=False) if kind == "chol" else fac @ rhs

        def mv(x):
            W, u, v = pd.unpack(x)
            AXB, r1, c1 = pd.forward(pd.adjoint(W, u, v))
            return pd.pack(AXB, r1 + u, c1 + v)

        ones = np.ones((pd.m, pd.n))
        A, B = pd.constraints.A, pd.constraints.B
        diag = pd.pack((A * A) @ ones @ (B * B) if k else np.zeros((0, 0)), np.full(pd.m, pd.n + 1.0),
                       np.full(pd.n, pd.m + 1.0))
        x, _, _ = pcg(mv, rhs, np.where(diag > 0, diag, 1.0), 1e-10 * (1 + np.linalg.norm(rhs)), 2000)
        return x

    def w_block(self, R):
        """Solve ``(A A^T) W (B^T B) = R`` in the least-squares sense."""
        if self._wfac is None:
            A, B = self.pd.constraints.A, self.pd.constraints.B
            la, Ua = np.linalg.eigh(A @ A.T)
            lb, Ub = np.linalg.eigh(B.T @ B)
            lam = np.outer(la, lb)
            cut = 1e-12 * max(lam.max(initial=0.0), 1.0)
            inv = np.where(lam > cut, 1.0 / np.where(lam > cut, lam, 1.0), 0.0)
            self._wfac = (Ua, Ub, inv)
        Ua, Ub, inv = self._wfac
        return Ua @ ((Ua.T @ R @ Ub) * inv) @ Ub.T


def _aux_step(st: AdmmState, pd: ProblemData):
    """Closed-form (Xi, zeta, xi) update through the Moreau identity."""
    cs = pd.constraints
    s = st.sigma
    K = pd.adjoint(st.W, st.u, st.v) - pd.C
    Xi = -(K + st.X / s - prox_p(s * K + st.X, s, pd.reg) / s)
    zeta = -(st.u + st.y / s - prox_cone(cs.cone_r, s, s * st.u + st.y) / s)
    xi = -(st.v + st.z / s - prox_cone(cs.cone_c, s, s * st.v + st.z) / s)
    return Xi, zeta, xi, K


def _multiplier_step(st: AdmmState, K, pd: ProblemData) -> None:
    g = st.gamma * st.sigma
    st.X = st.X + g * (K + st.Xi)
    st.y = st.y + g * (st.u + st.zeta)
    st.z = st.z + g * (st.v + st.xi)


def _u_step(st: AdmmState, pd: ProblemData):
    s = st.sigma
    R = st.Xi - pd.C
    if pd.has_w:
        R = R + pd.constraints.A.T @ st.W @ pd.constraints.B.T
    rhs = pd.alpha - st.X.sum(1) - st.y - s * (st.v.sum() + R.sum(1)) - s * st.zeta
    return rhs / (s * (pd.n + 1.0))


def _v_step(st: AdmmState, pd: ProblemData):
    s = st.sigma
    R = st.Xi - pd.C
    if pd.has_w:
        R = R + pd.constraints.A.T @ st.W @ pd.constraints.B.T
    rhs = pd.beta - st.X.sum(0) - st.z - s * (st.u.sum() + R.sum(0)) - s * st.xi
    return rhs / (s * (pd.m + 1.0))


def _w_step(st: AdmmState, pd: ProblemData, solvers: _Solvers):
    if not pd.has_w:
        return st.W
    cs = pd.constraints
    s = st.sigma
    T = st.u[:, None] + st.v[None, :] + st.Xi - pd.C
    rhs = cs.S - cs.A @ st.X @ cs.B - s * (cs.A @ T @ cs.B)
    return solvers.w_block(rhs / s)


def dadmm_step(st: AdmmState, pd: ProblemData, solvers: _Solvers | None = None) -> AdmmState:
    solvers = solvers or _Solvers(pd)
    cs = pd.constraints
    s = st.sigma
    st = replace(st)
    T = st.Xi - pd.C
    rhs = pd.pack(cs.S - cs.A @ st.X @ cs.B - s * (cs.A @ T @ cs.B) if pd.has_w else np.zeros((pd.mt, pd.nt)),
                  pd.alpha - st.X.sum(1) - st.y - s * T.sum(1) - s * st.zeta,
                  pd.beta - st.X.sum(0) - st.z - s * T.sum(0) - s * st.xi)
    st.W, st.u, st.v = pd.unpack(solvers.joint(rhs / s))
    st.Xi, st.zeta, st.xi, K = _aux_step(st, pd)
    _multiplier_step(st, K, pd)
    st.it += 1
    return st


def dsgsadmm_step(st: AdmmState, pd: ProblemData, solvers: _Solvers | None = None) -> AdmmState:
    solvers = solvers or _Solvers(pd)
    st = replace(st)
    st.W = _w_step(st, pd, solvers)
    st.u = _u_step(st, pd)
    st.v = _v_step(st, pd)
    st.Xi, st.zeta, st.xi, _ = _aux_step(st, pd)
    st.v = _v_step(st, pd)
    st.u = _u_step(st, pd)
    st.W = _w_step(st, pd, solvers)
    K = pd.adjoint(st.W, st.u, st.v) - pd.C
    _multiplier_step(st, K, pd)
    st.it += 1
    return st


def _balance(st: AdmmState, pd: ProblemData, res) -> None:
    # dual-feasibility residual of the ADMM constraints vs primal feasibility of X
    K = pd.adjoint(st.W, st.u, st.v) - pd.C
    rd = np.sqrt(np.sum((K + st.Xi) ** 2) + np.sum((st.u + st.zeta) ** 2)
                 + np.sum((st.v + st.xi) ** 2)) / (1.0 + np.linalg.norm(pd.C))
    rp = res.eta_feas
    if rd > 5.0 * rp:
        st.sigma *= 2.0
    elif rp > 5.0 * rd:
        st.sigma /= 2.0


def repair_dual(pd: ProblemData, dp: DualPoint) -> DualPoint:
    """Largest ``v`` with ``u 1^T + 1 v^T + A^T W B^T <= C`` (a c-transform).

    Only applies without regularization, where the conjugate is the indicator of
    the nonpositive orthant; otherwise ``dp`` is returned unchanged.
    """
    if pd.reg.lambda1 > 0 or pd.reg.lambda2 > 0:
        return dp
    v = (pd.C - pd.adjoint(dp.W, dp.u, np.zeros(pd.n))).min(axis=0)
    if pd.constraints.cone_c is ConeKind.NONNEG:
        v = np.minimum(v, 0.0)
    return DualPoint(dp.W, dp.u, v)


def warm_start(pd: ProblemData, cfg: AdmmConfig | None = None, state: AdmmState | None = None,
               measure: Callable | None = None):
    """Run ADMM until the relative KKT residual is at most ``cfg.tol``.

    ``measure(dual, primal)`` returns the residual report used for stopping and for
    picking the returned point (default: ``kkt_residuals`` on ``pd``). Without
    regularization the dual is scored after its c-transform repair.

    Returns
    -------
    dual : DualPoint
    primal : PrimalPoint
    stats : dict
        ``iterations``, ``eta`` (of the returned point), ``sigma`` and ``history``.
    """
    cfg = cfg or AdmmConfig()
    if state is None:
        state = AdmmState.zeros(pd, cfg.sigma, cfg.step_size())
    if measure is None:
        measure = lambda dp, pt: kkt_residuals(pd, pt, dp)  # noqa: E731
    solvers = _Solvers(pd, cfg.dense_threshold)
    step = dadmm_step if cfg.variant == "dadmm" else dsgsadmm_step

    def score(st):
        pt, dp = st.primal(), st.dual()
        dp = repair_dual(pd, dp)
        return measure(dp, pt).eta, dp, pt

    eta, dp, pt = score(state)
    best = (eta, dp, pt)
    hist = [eta]
    while eta > cfg.tol and state.it < cfg.max_iter:
        state = step(state, pd, solvers)
        if cfg.adapt and state.it % cfg.adapt_every == 0:
            state = replace(state)
            _balance(state, pd, kkt_residuals(pd, state.primal(), state.dual()))
        if state.it % max(cfg.score_every, 1) and state.it < cfg.max_iter:
            continue
        eta, dp, pt = score(state)
        hist.append(eta)
        if eta < best[0]:
            best = (eta, dp, pt)
    eta, dp, pt = best
    stats = dict(iterations=state.it, eta=eta, sigma=state.sigma, history=hist, variant=cfg.variant)
    return dp, pt, stats
