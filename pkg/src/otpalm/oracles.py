"""Brute-force reference solvers for small instances.

These routines re-derive everything from the problem data with their own
arithmetic so that they can be used to cross-check the main solver.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import Infeasible, MaxIters, TooLarge
from .model import ConeKind, ProblemData

VERTEX_CAP = 36


@dataclass(frozen=True)
class OracleConfig:
    tol: float = 1e-9
    max_iters: int = 100_000
    method: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")


# single-group prox

def prox_oracle(pp, x) -> np.ndarray:
    """Numerical minimizer of ``p_G(z) + ||z - x||^2 / (2 sigma)`` over ``z >= 0``.

    For a fixed norm ``t`` the linear term is minimized by aligning ``z`` with the
    positive part of ``x``, which leaves a convex scalar problem over ``t``.
    """
    x = np.asarray(x, float)
    s, l1, l2, w = pp.sigma, pp.lambda1, pp.lambda2, pp.omega
    xp = np.where(x > 0, x, 0.0)
    if l1 * w == 0.0 and l2 == 0.0:
        return xp
    r = float(np.sqrt(np.sum(xp * xp)))
    if r == 0.0:
        return np.zeros_like(x)
    d = xp / r

    def dphi(t):
        return l1 * w + l2 * t + (t - r) / s

    # the scalar objective is convex, so bisect its derivative on [0, r]
    if dphi(0.0) >= 0.0:
        return np.zeros_like(x)
    lo, hi = 0.0, r
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if dphi(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    t = 0.5 * (lo + hi)
    return t * d


def fd_jacobian(f, x, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian, column by column."""
    x = np.asarray(x, float)
    f0 = np.asarray(f(x), float)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.asarray(f(x + e), float) - np.asarray(f(x - e), float)).ravel() / (2.0 * h)
    return J


# linear programs by vertex enumeration

def _standard_form(pd: ProblemData):
    m, n = pd.m, pd.n
    cs = pd.constraints
    k = cs.A.shape[0] * cs.B.shape[1]
    rows = []
    rhs = []
    # A X B = S, one row per entry of S; vec is row-major so the row is kron(A[p], B[:, q])
    for p in range(cs.A.shape[0]):
        for q in range(cs.B.shape[1]):
            rows.append(np.outer(cs.A[p], cs.B[:, q]).ravel())
            rhs.append(cs.S[p, q])
    for i in range(m):
        r = np.zeros(m * n)
        r[i * n:(i + 1) * n] = 1.0
        rows.append(r)
        rhs.append(pd.alpha[i])
    for j in range(n):
        r = np.zeros(m * n)
        r[j::n] = 1.0
        rows.append(r)
        rhs.append(pd.beta[j])
    E = np.array(rows).reshape(-1, m * n)
    extra = []
    if cs.cone_r is ConeKind.NONNEG:
        extra.append(np.vstack([np.zeros((k, m)), np.eye(m), np.zeros((n, m))]))
    if cs.cone_c is ConeKind.NONNEG:
        extra.append(np.vstack([np.zeros((k + m, n)), np.eye(n)]))
    if extra:
        E = np.hstack([E] + extra)
    c = np.concatenate([pd.C.ravel(), np.zeros(E.shape[1] - m * n)])
    return E, np.array(rhs, float), c


def _independent_rows(E, b, tol=1e-10):
    """Drop linearly dependent rows, checking consistency of the dropped ones."""
    keep = []
    basis = np.zeros((0, E.shape[1]))
    for i in range(E.shape[0]):
        trial = np.vstack([basis, E[i]])
        if np.linalg.matrix_rank(trial, tol=tol) > basis.shape[0]:
            basis = trial
            keep.append(i)
    Ek, bk = E[keep], b[keep]
    # consistency: every row must be a combination of the kept ones with matching rhs
    coef, *_ = np.linalg.lstsq(Ek.T, E.T, rcond=None)
    if np.max(np.abs(coef.T @ bk - b), initial=0.0) > 1e-9 * (1 + np.abs(b).max(initial=0.0)):
        raise Infeasible("equality system is inconsistent")
    return Ek, bk


def _simplex(E, b, cost, basis, tol=1e-11, max_pivots=100_000):
    """Bland-rule primal simplex from a feasible basis; returns the optimal basis."""
    r, nv = E.shape
    basis = list(basis)
    for _ in range(max_pivots):
        Binv = np.linalg.inv(E[:, basis])
        xb = Binv @ b
        red = cost - (cost[basis] @ Binv) @ E
        red[basis] = 0.0
        cand = np.flatnonzero(red < -tol)
        if cand.size == 0:
            return basis
        enter = int(cand[0])
        dcol = Binv @ E[:, enter]
        pos = np.flatnonzero(dcol > tol)
        if pos.size == 0:
            raise Infeasible("objective unbounded below")
        ratios = np.maximum(xb[pos], 0.0) / dcol[pos]
        tie = pos[ratios <= ratios.min() + tol]
        leave = min(tie, key=lambda i: basis[i])
        basis[leave] = enter
    raise MaxIters("simplex pivot cap reached")


def _phase_one(E, b, tol=1e-11):
    """A feasible basis of ``{x >= 0 : E x = b}`` from an artificial-variable phase one."""
    r, nv = E.shape
    sgn = np.where(b < 0, -1.0, 1.0)
    Ea = np.hstack([E * sgn[:, None], np.eye(r)])
    ba = b * sgn
    cost = np.concatenate([np.zeros(nv), np.ones(r)])
    basis = _simplex(Ea, ba, cost, list(range(nv, nv + r)), tol)
    Binv = np.linalg.inv(Ea[:, basis])
    if cost[basis] @ (Binv @ ba) > 1e-9 * (1 + np.abs(b).sum()):
        raise Infeasible("no feasible point")
    # drive remaining artificials out of the basis
    for i, j in enumerate(list(basis)):
        if j >= nv:
            Binv = np.linalg.inv(Ea[:, basis])
            row = Binv[i] @ Ea[:, :nv]
            cand = [q for q in range(nv) if q not in basis and abs(row[q]) > 1e-9]
            if not cand:
                raise Infeasible("degenerate artificial could not be removed")
            basis[i] = cand[0]
    return sorted(basis)


def _basic_solution(E, b, basis, tol=1e-10):
    x = np.zeros(E.shape[1])
    xb = np.linalg.solve(E[:, list(basis)], b)
    x[list(basis)] = np.where(np.abs(xb) < tol, 0.0, xb)
    return x


def enumerate_vertices(E, b, max_bases: int = 2_000_000, tol: float = 1e-10):
    """All vertices of ``{x >= 0 : E x = b}`` (E with full row rank) by basis-graph search."""
    r, nv = E.shape
    start = tuple(_phase_one(E, b))
    seen = {start}
    queue = deque([start])
    verts = {}
    while queue:
        basis = queue.popleft()
        B = E[:, basis]
        Binv = np.linalg.inv(B)
        xb = Binv @ b
        x = np.zeros(nv)
        x[list(basis)] = np.where(np.abs(xb) < tol, 0.0, xb)
        verts.setdefault(tuple(np.round(x, 10)), x)
        D = Binv @ E
        nonbasic = np.ones(nv, bool)
        nonbasic[list(basis)] = False
        for j in np.flatnonzero(nonbasic & (D > tol).any(axis=0)):
            dcol = D[:, j]
            pos = np.flatnonzero(dcol > tol)
            ratios = np.maximum(xb[pos], 0.0) / dcol[pos]
            for i in pos[ratios <= ratios.min() + tol]:
                nb = list(basis)
                nb[i] = int(j)
                nb = tuple(sorted(nb))
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
                    if len(seen) > max_bases:
                        raise TooLarge("basis enumeration cap reached")
    return list(verts.values())


def lp_oracle(pd: ProblemData, fallback: bool = False, cfg: OracleConfig = OracleConfig(),
              max_bases: int = 5_000):
    """Exact optimum of the unregularized problem on small instances.

    Scans every vertex when the basis graph has at most ``max_bases`` nodes;
    otherwise pivots to an optimal basis and scans only the optimal face.
    Returns ``(X, objective)``; ties are broken by the lexicographically smallest plan.
    """
    if pd.m * pd.n > VERTEX_CAP:
        if not fallback:
            raise TooLarge(f"m*n = {pd.m * pd.n} exceeds the enumeration cap {VERTEX_CAP}")
        return _admm_fallback(pd, cfg)
    E, b, c = _standard_form(pd)
    E, b = _independent_rows(E, b)
    mn = pd.m * pd.n
    try:
        verts = enumerate_vertices(E, b, max_bases=max_bases)
    except TooLarge:
        basis = _simplex(E, b, c, _phase_one(E, b))
        red = c - (c[basis] @ np.linalg.inv(E[:, basis])) @ E
        # restrict to the optimal face: variables with positive reduced cost vanish there
        free = np.flatnonzero(red <= 1e-9 * (1 + np.abs(c).max()))
        try:
            sub = enumerate_vertices(E[:, free], b, max_bases=max_bases)
            verts = []
            for xs in sub:
                x = np.zeros(E.shape[1])
                x[free] = xs
                verts.append(x)
        except (TooLarge, Infeasible):
            verts = [_basic_solution(E, b, basis)]
    objs = np.array([c @ x for x in verts])
    best = objs.min()
    ties = [x for x, o in zip(verts, objs) if o <= best + 1e-12 * (1 + abs(best))]
    x = min(ties, key=lambda v: tuple(np.round(v[:mn], 12)))
    return x[:mn].reshape(pd.m, pd.n), float(pd.C.ravel() @ x[:mn])


def _admm_fallback(pd, cfg):
    from .admm import AdmmConfig, warm_start
    from .model import PrimalPoint, primal_objective

    _, pt, stats = warm_start(pd, AdmmConfig(tol=cfg.tol, max_iter=cfg.max_iters))
    if stats["eta"] > cfg.tol:
        raise MaxIters(f"ADMM fallback stopped at eta={stats['eta']:.2e}")
    return pt.X, primal_objective(pd, PrimalPoint(pt.X, pt.y, pt.z))


# strongly convex problems through the smooth dual

def reg_oracle(pd: ProblemData, cfg: OracleConfig = OracleConfig()):
    """Unique minimizer for ``lambda2 > 0``.

    Maximizes the concave, differentiable dual over (W, u, v) by L-BFGS-B and
    recovers the plan as the gradient of the conjugate. Returns ``(X, objective)``.
    """
    l1, l2 = pd.reg.lambda1, pd.reg.lambda2
    if not l2 > 0:
        raise ValueError("reg_oracle needs lambda2 > 0")
    m, n = pd.m, pd.n
    cs = pd.constraints
    kW = cs.A.shape[0] * cs.B.shape[1]
    part = pd.reg.partition
    groups = [part.index[part.ptr[g]:part.ptr[g + 1]] for g in range(part.n_groups)]
    thr = l1 * part.omega

    def plan_of(Z):
        zp = np.maximum(Z.ravel(), 0.0)
        x = np.zeros(m * n)
        for g, idx in enumerate(groups):
            nr = np.sqrt(np.sum(zp[idx] ** 2))
            if nr > thr[g]:
                x[idx] = (1.0 - thr[g] / nr) * zp[idx] / l2
        return x.reshape(m, n)

    def split(w):
        return w[:kW].reshape(cs.A.shape[0], cs.B.shape[1]), w[kW:kW + m], w[kW + m:]

    def negdual(w):
        W, u, v = split(w)
        Z = u[:, None] + v[None, :] - pd.C
        if kW:
            Z = Z + cs.A.T @ W @ cs.B.T
        X = plan_of(Z)
        # conjugate value equals <Z, X> - p(X) at the maximizer X
        pX = l2 * 0.5 * np.sum(X * X) + sum(thr[g] * np.sqrt(np.sum(X.ravel()[idx] ** 2)) for g, idx in enumerate(groups))
        conj = np.sum(Z * X) - pX
        val = np.sum(cs.S * W) + pd.alpha @ u + pd.beta @ v - conj
        gW = cs.S - cs.A @ X @ cs.B if kW else np.zeros(0)
        grad = np.concatenate([np.ravel(gW), pd.alpha - X.sum(1), pd.beta - X.sum(0)])
        return -val, -grad

    bounds = [(None, None)] * kW
    bounds += [(None, 0.0) if cs.cone_r is ConeKind.NONNEG else (None, None)] * m
    bounds += [(None, 0.0) if cs.cone_c is ConeKind.NONNEG else (None, None)] * n
    w = np.zeros(kW + m + n)
    for _ in range(20):
        res = minimize(negdual, w, jac=True, method="L-BFGS-B", bounds=bounds,
                       options=dict(maxiter=cfg.max_iters, maxcor=50, ftol=0.0, gtol=1e-14, maxls=100))
        if np.allclose(res.x, w, rtol=0, atol=1e-15):
            break
        w = res.x
    W, u, v = split(w)
    Z = u[:, None] + v[None, :] - pd.C
    if kW:
        Z = Z + cs.A.T @ W @ cs.B.T
    X = plan_of(Z)
    r1, c1 = X.sum(1), X.sum(0)
    viol = [np.abs(cs.A @ X @ cs.B - cs.S).max(initial=0.0) if kW else 0.0]
    viol.append(np.abs(r1 - pd.alpha).max() if cs.cone_r is ConeKind.ZERO else np.maximum(r1 - pd.alpha, 0).max())
    viol.append(np.abs(c1 - pd.beta).max() if cs.cone_c is ConeKind.ZERO else np.maximum(c1 - pd.beta, 0).max())
    if max(viol) > 1e3 * cfg.tol:
        raise MaxIters(f"dual ascent stopped with infeasibility {max(viol):.2e}")
    obj = float(np.sum(pd.C * X) + 0.5 * l2 * np.sum(X * X)
                + sum(thr[g] * np.sqrt(np.sum(X.ravel()[idx] ** 2)) for g, idx in enumerate(groups)))
    return X, obj
