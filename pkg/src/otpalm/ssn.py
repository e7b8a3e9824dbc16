"""Semismooth Newton method for the proximal subproblem.

The generalized Hessian of Psi at (W, u, v) acts as

    H d = sigma * Amap(J_X(Amap^T d)) + sigma * (0, J_y du, J_z dv) + tau/sigma * d

where ``Amap(X) = (A X B, X 1, X^T 1)`` and ``Amap^T(dW, du, dv) = du 1^T + 1 dv^T + A^T dW B^T``.
Only entries (and groups) with a nonzero Jacobian contribute, so assembly cost
tracks the size of the active set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .auglag import ALParams, DeltaTriple, SubproblemEval
from .errors import MaxBacktracks, NonDescentDirection
from .model import DualPoint, ProblemData
from .prox import PlanJacobian

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SsnConfig:
    mu: float = 1e-4
    delta: float = 0.5
    eta_bar: float = 1e-3
    gamma: float = 0.2
    dense_threshold: int = 4000
    max_inner_iters: int = 100
    max_cg_iters: int = 1000
    max_backtracks: int = 60

    def __post_init__(self):
        if not (0 < self.mu < 0.5 and 0 < self.delta < 1 and 0 < self.eta_bar < 1 and 0 < self.gamma <= 1):
            raise ValueError("invalid SSN parameters")


def _rank1_columns(pd: ProblemData, jac: PlanJacobian, with_w: bool = True):
    """Columns ``Amap(what_G)`` for every rank-one group, and their coefficients."""
    idx, grp, val = jac.rank1_entries()
    if idx.size == 0:
        return None, None
    groups, col = np.unique(grp, return_inverse=True)
    m, n, k = pd.m, pd.n, pd.mt * pd.nt
    N = k + m + n
    rows_i, rows_j = np.divmod(idx, n)
    V = sp.coo_matrix(
        (np.concatenate([val, val]), (np.concatenate([k + rows_i, k + m + rows_j]), np.concatenate([col, col]))),
        shape=(N, groups.size),
    ).toarray()
    if with_w and k:
        A, B = pd.constraints.A, pd.constraints.B
        G = sp.csr_matrix((np.ones(idx.size), (np.arange(idx.size), col)), shape=(idx.size, groups.size))
        step = max(1, int(4e6 // max(k, 1)))
        for s in range(0, idx.size, step):
            sl = slice(s, s + step)
            contrib = (A[:, rows_i[sl]] * val[sl])[:, None, :] * B[rows_j[sl], :].T[None, :, :]
            V[:k] += (G[sl].T @ contrib.reshape(k, -1).T).T
    return V, jac.coef[groups]


def normal_matrix(pd: ProblemData, D, jac: PlanJacobian | None = None) -> np.ndarray:
    """Dense ``Amap J Amap^T`` for ``J = Diag(D)`` plus the rank-one terms of ``jac``."""
    m, n, mt, nt = pd.m, pd.n, pd.mt, pd.nt
    k = mt * nt
    N = k + m + n
    H = np.zeros((N, N))
    iu = np.arange(k, k + m)
    iv = np.arange(k + m, N)
    H[iu, iu] = D.sum(axis=1)
    H[iv, iv] = D.sum(axis=0)
    H[k:k + m, k + m:] = D
    H[k + m:, k:k + m] = D.T
    if k:
        A, B = pd.constraints.A, pd.constraints.B
        E = np.einsum("ij,jk,jl->ikl", D, B, B, optimize=True)
        H[:k, :k] = np.einsum("pi,qi,ikl->pkql", A, A, E, optimize=True).reshape(k, k)
        Wu = np.einsum("pi,ik->pki", A, D @ B).reshape(k, m)
        Wv = np.einsum("pj,jk->pkj", A @ D, B).reshape(k, n)
        H[:k, k:k + m] = Wu
        H[k:k + m, :k] = Wu.T
        H[:k, k + m:] = Wv
        H[k + m:, :k] = Wv.T
    if jac is not None and jac.has_rank1:
        V, c = _rank1_columns(pd, jac)
        H += (V * c) @ V.T
    return H


class NewtonOperator:
    """Generalized Hessian of the subproblem at one dual point."""

    def __init__(self, pd: ProblemData, sigma: float, tau: float, jac: PlanJacobian, mask_y, mask_z):
        self.pd = pd
        self.sigma = sigma
        self.tau = tau
        self.jac = jac
        self.mask_y = mask_y
        self.mask_z = mask_z

    @property
    def dim(self) -> int:
        return self.pd.dual_dim

    def apply(self, d) -> np.ndarray:
        pd = self.pd
        W, u, v = pd.unpack(d)
        JQ = self.jac.apply(pd.adjoint(W, u, v))
        AXB, r1, c1 = pd.forward(JQ)
        out = pd.pack(AXB, r1 + self.mask_y * u, c1 + self.mask_z * v)
        return self.sigma * out + (self.tau / self.sigma) * d

    def dense(self) -> np.ndarray:
        pd = self.pd
        k = pd.mt * pd.nt
        H = normal_matrix(pd, self.jac.diag, self.jac)
        H *= self.sigma
        idx = np.arange(self.dim)
        H[idx, idx] += self.tau / self.sigma
        H[idx[k:], idx[k:]] += self.sigma * np.concatenate([self.mask_y, self.mask_z])
        return H

    def diagonal(self) -> np.ndarray:
        pd = self.pd
        D = self.jac.diag
        if pd.has_w:
            A, B = pd.constraints.A, pd.constraints.B
            dW = ((A * A) @ D @ (B * B)).ravel()
        else:
            dW = np.zeros(0)
        du = D.sum(axis=1) + self.mask_y
        dv = D.sum(axis=0) + self.mask_z
        diag = np.concatenate([dW, du, dv])
        if self.jac.has_rank1:
            V, c = _rank1_columns(pd, self.jac, with_w=False)
            diag += (V * V) @ c
        return self.sigma * diag + self.tau / self.sigma


def assemble_from_eval(ev: SubproblemEval) -> NewtonOperator:
    my, mz = ev.cone_masks()
    return NewtonOperator(ev.pd, ev.ap.sigma, ev.ap.tau, ev.plan.jacobian(), my, mz)


def assemble_operator(ap: ALParams, dp: DualPoint, pd: ProblemData) -> NewtonOperator:
    return assemble_from_eval(SubproblemEval(ap, dp, pd))


def apply_operator(H: NewtonOperator, d) -> np.ndarray:
    return H.apply(np.asarray(d, float))


@dataclass
class LinearSolveInfo:
    method: str
    residual: float
    target: float
    cg_iters: int = 0
    stalled: bool = False
    factorization_failed: bool = False


def pcg(matvec: Callable, b, precond_diag, tol: float, maxiter: int):
    """Jacobi-preconditioned conjugate gradients from zero; returns the best iterate."""
    x = np.zeros_like(b)
    r = b.copy()
    z = r / precond_diag
    p = z.copy()
    rz = float(r @ z)
    rnorm = float(np.linalg.norm(r))
    best_x, best_r = x.copy(), rnorm
    it = 0
    while rnorm > tol and it < maxiter:
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0:
            break
        a = rz / pAp
        x += a * p
        r -= a * Ap
        rnorm = float(np.linalg.norm(r))
        it += 1
        if rnorm < best_r:
            best_x, best_r = x.copy(), rnorm
        z = r / precond_diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return best_x, best_r, it


def solve_newton_system(H, g, cfg: SsnConfig = SsnConfig()):
    """Direction ``d`` with ``||H d + g|| <= min(eta_bar, ||g||^(1+gamma))``.

    ``H`` is a :class:`NewtonOperator` or an explicit SPD matrix.
    """
    g = np.asarray(g, float)
    gn = float(np.linalg.norm(g))
    target = min(cfg.eta_bar, gn ** (1.0 + cfg.gamma))
    if isinstance(H, np.ndarray):
        dense, matvec, diag = H, (lambda x: H @ x), np.diag(H).copy()
        n = H.shape[0]
    else:
        n = H.dim
        dense = None
        matvec = H.apply
        diag = None
    if n <= cfg.dense_threshold:
        if dense is None:
            dense = H.dense()
        try:
            fac = sla.cho_factor(dense, lower=False, check_finite=False)
            d = sla.cho_solve(fac, -g, check_finite=False)
            res = dense @ d + g
            rn = float(np.linalg.norm(res))
            for _ in range(3):
                if rn <= target:
                    break
                d -= sla.cho_solve(fac, res, check_finite=False)
                res = dense @ d + g
                rn = float(np.linalg.norm(res))
            if np.all(np.isfinite(d)):
                return d, LinearSolveInfo("cholesky", rn, target)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            pass
        failed = True
    else:
        failed = False
    if diag is None:
        diag = H.diagonal()
    diag = np.where(diag > 0, diag, 1.0)
    d, rn, it = pcg(matvec, -g, diag, target, cfg.max_cg_iters)
    return d, LinearSolveInfo("cg", rn, target, cg_iters=it, stalled=rn > target, factorization_failed=failed)


def _psi_slack(ev: SubproblemEval) -> float:
    # roundoff level of Psi: the terms cancel, so use the magnitude of the pieces
    ap = ev.ap
    mag = (abs(ev.psi) + float(np.vdot(np.abs(ev.arg), np.abs(ev.plan.value))) / ap.sigma
           + float(np.vdot(ap.anchor_primal.X, ap.anchor_primal.X)) / ap.sigma + abs(ev.plan.reg_value))
    return 64.0 * EPS * (1.0 + mag)


def line_search(ev: SubproblemEval, d, cfg: SsnConfig = SsnConfig()):
    """Armijo backtracking along ``d`` from the point held by ``ev``.

    Returns ``(alpha, ev_next, backtracks)``. Decreases below the roundoff level of
    Psi are accepted, since they cannot be resolved in floating point.
    """
    pd, ap = ev.pd, ev.ap
    gd = float(ev.grad @ d)
    if not gd < 0:
        raise NonDescentDirection(f"<grad, d> = {gd:.3e} is not negative")
    dW, du, dv = pd.unpack(d)
    psi0 = ev.psi
    slack = _psi_slack(ev)
    alpha = 1.0
    for i in range(cfg.max_backtracks + 1):
        dp = DualPoint(ev.dp.W + alpha * dW, ev.dp.u + alpha * du, ev.dp.v + alpha * dv)
        trial = SubproblemEval(ap, dp, pd)
        if trial.psi <= psi0 + cfg.mu * alpha * gd + slack:
            return alpha, trial, i
        alpha *= cfg.delta
    raise MaxBacktracks(f"no Armijo step after {cfg.max_backtracks} backtracks")


@dataclass
class InnerStats:
    iterations: int = 0
    linear_solves: int = 0
    factorizations: int = 0
    cg_iters: int = 0
    backtracks: int = 0
    converged: bool = False
    note: str = ""
    residuals: list = field(default_factory=list)
    psi: list = field(default_factory=list)


def ssn_solve(ap: ALParams, dp0: DualPoint, pd: ProblemData, cfg: SsnConfig = SsnConfig(),
              stop: Callable[[DeltaTriple], bool] | None = None, ev0: SubproblemEval | None = None):
    """Minimize the proximal subproblem by semismooth Newton until ``stop`` holds.

    Returns ``(ev, stats)`` where ``ev`` is the :class:`SubproblemEval` at the final
    dual point (``ev.dp``).
    """
    if stop is None:
        stop = lambda dt: dt.norm <= 1e-12  # noqa: E731
    ev = ev0 if ev0 is not None else SubproblemEval(ap, dp0, pd)
    stats = InnerStats()
    flat = 0
    for j in range(cfg.max_inner_iters + 1):
        dt = ev.delta()
        stats.residuals.append(dt.norm)
        stats.psi.append(ev.psi)
        if stop(dt):
            stats.converged = True
            break
        if j == cfg.max_inner_iters:
            stats.note = "MaxInnerIterations"
            break
        H = assemble_from_eval(ev)
        d, info = solve_newton_system(H, ev.grad, cfg)
        stats.linear_solves += 1
        stats.factorizations += info.method == "cholesky"
        stats.cg_iters += info.cg_iters
        try:
            alpha, nxt, nb = line_search(ev, d, cfg)
        except (NonDescentDirection, MaxBacktracks) as exc:
            stats.note = type(exc).__name__
            break
        stats.backtracks += nb
        stats.iterations += 1
        # no resolvable progress in either Psi or the residual
        if nxt.psi >= ev.psi - _psi_slack(ev) and np.linalg.norm(nxt.grad) >= 0.99 * dt.norm:
            flat += 1
        else:
            flat = 0
        ev = nxt
        if flat >= 3:
            dt = ev.delta()
            stats.residuals.append(dt.norm)
            stats.psi.append(ev.psi)
            stats.converged = bool(stop(dt))
            stats.note = "" if stats.converged else "Stagnated"
            break
    return ev, stats
