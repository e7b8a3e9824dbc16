"""Seeded instance generators and the barycentric label-transfer map."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySupport
from .model import (GroupPartition, ProblemData, Regularizer, build_classical,
                    build_martingale)


@dataclass(frozen=True)
class ClassicalSpec:
    m: int
    n: int
    seed: int = 0
    dim: int = 3
    components: int = 3


@dataclass(frozen=True)
class MartingaleSpec:
    m: int
    n_prime: int
    seed: int = 0
    power: float = 2.1


@dataclass(frozen=True)
class GroupDASpec:
    m: int
    n: int
    m1: int | None = None
    lambda1: float = 1.0
    lambda2: float = 1.0
    seed: int = 0
    omega: str = "one"  # or "sqrt" for sqrt(|G|)


def sq_dist(P, Q) -> np.ndarray:
    P = np.asarray(P, float)
    Q = np.asarray(Q, float)
    d = (P * P).sum(1)[:, None] + (Q * Q).sum(1)[None, :] - 2.0 * P @ Q.T
    return np.maximum(d, 0.0)


def _mixture(rng, means, size):
    comp = rng.integers(0, means.shape[0], size=size)
    return means[comp] + rng.standard_normal((size, means.shape[1]))


def gen_classical(spec: ClassicalSpec) -> ProblemData:
    """Random weights and Gaussian-mixture supports with squared Euclidean cost."""
    rng = np.random.default_rng(spec.seed)
    alpha = rng.uniform(0.0, 1.0, spec.m)
    beta = rng.uniform(0.0, 1.0, spec.n)
    alpha /= alpha.sum()
    beta /= beta.sum()
    means = 2.0 * rng.standard_normal((spec.components, spec.dim))
    P = _mixture(rng, means, spec.m)
    Q = _mixture(rng, means, spec.n)
    meta = dict(family="classical", seed=spec.seed, P=P, Q=Q)
    return build_classical(sq_dist(P, Q), alpha, beta, meta=meta)


def call_function(weights, supports, k) -> float:
    """``sum_j w_j max(q_j - k, 0)``."""
    w = np.asarray(weights, float)
    q = np.asarray(supports, float)
    return float(np.sum(w * np.maximum(q - k, 0.0)))


def _call_vec(w, q, ks):
    return np.maximum(q[None, :] - ks[:, None], 0.0) @ w


def convex_order_sup(mu, nu_prime, mass_tol: float = 1e-14):
    """Smallest measure dominating both inputs in convex order (equal means required).

    Parameters
    ----------
    mu, nu_prime : tuple (weights, supports)
        One-dimensional discrete measures with equal total mass and equal means.

    Returns
    -------
    weights, supports : ndarray
        Atoms sorted by location. The call function is the pointwise maximum
        of the inputs' call functions; masses are its slope jumps.
    """
    (wa, qa), (wb, qb) = [(np.asarray(w, float).ravel(), np.asarray(q, float).ravel()) for w, q in (mu, nu_prime)]
    if wa.size == 0 or wb.size == 0:
        raise EmptySupport("both measures need at least one atom")
    grid = np.unique(np.concatenate([qa, qb]))
    ca = _call_vec(wa, qa, grid)
    cb = _call_vec(wb, qb, grid)
    # crossing points of the two piecewise-linear call functions between grid nodes
    diff = ca - cb
    # roundoff-level differences are ties, not crossings
    diff[np.abs(diff) <= 1e-12 * (1.0 + np.abs(ca) + np.abs(cb))] = 0.0
    cross = []
    for i in np.flatnonzero(diff[:-1] * diff[1:] < 0):
        t = diff[i] / (diff[i] - diff[i + 1])
        cross.append(grid[i] + t * (grid[i + 1] - grid[i]))
    knots = np.unique(np.concatenate([grid, np.asarray(cross, float)]))
    c = np.maximum(_call_vec(wa, qa, knots), _call_vec(wb, qb, knots))
    total = wa.sum()
    # slope of the call function left of the first knot is -total and 0 right of the last
    slopes = np.concatenate([[-total], np.diff(c) / np.diff(knots), [0.0]])
    mass = np.diff(slopes)
    keep = mass > mass_tol
    return mass[keep], knots[keep]


def gen_martingale(spec: MartingaleSpec) -> ProblemData:
    """Lognormal marginals made comparable in convex order, cost ``|p - q|^power``."""
    rng = np.random.default_rng(spec.seed)
    p = rng.lognormal(0.0, 0.1, spec.m)
    qp = rng.lognormal(0.0, 0.15, spec.n_prime)
    alpha = np.full(spec.m, 1.0 / spec.m)
    wq = np.full(spec.n_prime, 1.0 / spec.n_prime)
    # shift the second sample so that both empirical means agree
    qp = qp - wq @ qp + alpha @ p
    beta, q = convex_order_sup((alpha, p), (wq, qp))
    beta = beta / beta.sum()
    # restore the exact mean after renormalization by moving the outermost atoms
    gap = alpha @ p - beta @ q
    if gap != 0.0:
        j = -1 if gap > 0 else 0
        q = q.copy()
        q[j] += gap / beta[j]
    C = np.abs(p[:, None] - q[None, :]) ** spec.power
    meta = dict(family="martingale", seed=spec.seed, P=p[:, None], Q=q[:, None])
    return build_martingale(C, alpha, beta, p[:, None], q[:, None], meta=meta)


def gen_group_da(spec: GroupDASpec) -> ProblemData:
    """Two labelled source clusters, a two-component target, groups per (column, label)."""
    m1 = spec.m1 if spec.m1 is not None else math.ceil(spec.m / 2)
    if not 1 <= m1 < spec.m:
        raise ValueError("m1 must satisfy 1 <= m1 < m")
    rng = np.random.default_rng(spec.seed)
    labels = (np.arange(spec.m) >= m1).astype(int)
    centers = np.where(labels[:, None] == 0, [-1.0, 2.0], [1.0, 2.0])
    P = centers + 0.5 * rng.standard_normal((spec.m, 2))
    comp = rng.integers(0, 2, spec.n)
    tc = np.where(comp[:, None] == 0, [-2.0, 2.0], [2.0, 3.0])
    Q = tc + math.sqrt(0.5) * rng.standard_normal((spec.n, 2))
    part = GroupPartition.column_classes(labels, spec.n)
    if spec.omega == "sqrt":
        part = GroupPartition(part.index, part.ptr, np.sqrt(part.sizes), part.shape)
    reg = Regularizer(spec.lambda1, spec.lambda2, part)
    alpha = np.full(spec.m, 1.0 / spec.m)
    beta = np.full(spec.n, 1.0 / spec.n)
    meta = dict(family="groupda", seed=spec.seed, P=P, Q=Q, labels=labels)
    return build_classical(sq_dist(P, Q), alpha, beta, reg, meta=meta)


def barycentric_map(X, Q, min_mass: float = 1e-15):
    """Row barycenters ``sum_j X_ij q_j / sum_j X_ij``.

    Returns the mapped points and a boolean mask of rows whose mass is below
    ``min_mass`` (those rows are set to NaN).
    """
    X = np.asarray(X, float)
    Q = np.asarray(Q, float)
    if Q.ndim == 1:
        Q = Q[:, None]
    mass = X.sum(axis=1)
    absent = mass < min_mass
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (X @ Q) / mass[:, None]
    out[absent] = np.nan
    return out, absent
