"""Proximal maps, generalized Jacobians and the conjugate of the regularizer.

For a single group the regularizer is

    p_G(x) = lambda1 * omega_G * ||x|| + lambda2/2 * ||x||^2 + indicator(x >= 0)

and its scaled prox factors as a projection, a scaling by 1/(sigma*lambda2 + 1)
and a norm shrinkage with threshold zeta = sigma*lambda1*omega_G/(sigma*lambda2 + 1).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ConeKind, GroupPartition, Regularizer

TIE_RTOL = 1e-14


@dataclass(frozen=True)
class ProxParams:
    sigma: float
    lambda1: float = 0.0
    lambda2: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def scale(self) -> float:
        return 1.0 / (self.sigma * self.lambda2 + 1.0)

    @property
    def zeta(self) -> float:
        return self.sigma * self.lambda1 * self.omega * self.scale


def prox_norm(zeta: float, x) -> np.ndarray:
    """Prox of ``zeta * ||.||``: ``max(1 - zeta/||x||, 0) * x``."""
    x = np.asarray(x, float)
    nrm = np.linalg.norm(x)
    if nrm <= zeta or nrm == 0.0:
        return np.zeros_like(x)
    return (1.0 - zeta / nrm) * x


def prox_group(pp: ProxParams, x) -> np.ndarray:
    w = np.maximum(np.asarray(x, float), 0.0) * pp.scale
    if pp.zeta == 0.0:
        return w
    return prox_norm(pp.zeta, w)


def prox_cone(kind: ConeKind, sigma: float, w) -> np.ndarray:
    """Prox of the cone indicator; independent of ``sigma``."""
    w = np.asarray(w, float)
    if kind is ConeKind.ZERO:
        return np.zeros_like(w)
    return np.maximum(w, 0.0)


def cone_mask(kind: ConeKind, w) -> np.ndarray:
    """Diagonal of the canonical Jacobian of ``prox_cone`` (0 at ties)."""
    w = np.asarray(w, float)
    if kind is ConeKind.ZERO:
        return np.zeros_like(w)
    return (w > 0).astype(float)


class JacKind(enum.Enum):
    ZERO = "zero"
    INTERIOR = "interior"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class GroupJacobian:
    """Canonical generalized Jacobian of ``prox_group`` at one point.

    The represented matrix is ``scale * (a * Diag(theta) + b * w w^T)`` for the
    interior branch, ``scale * chi * w w^T`` on the boundary and zero otherwise.
    With ``lambda1 = 0`` it reduces to ``scale * Diag(theta)`` (kind INTERIOR, a=1, b=0).
    """

    kind: JacKind
    theta: np.ndarray
    scale: float
    a: float = 0.0
    b: float = 0.0
    w: np.ndarray | None = None
    chi: float = 0.0

    def matrix(self) -> np.ndarray:
        k = self.theta.size
        if self.kind is JacKind.ZERO:
            return np.zeros((k, k))
        if self.kind is JacKind.BOUNDARY:
            return self.scale * self.chi * np.outer(self.w, self.w)
        out = self.a * np.diag(self.theta)
        if self.b != 0.0:
            out = out + self.b * np.outer(self.w, self.w)
        return self.scale * out


def _classify(nrm, zeta):
    """Return 1 for interior, 0 for boundary, -1 for the zero branch."""
    tie = np.abs(nrm - zeta) <= TIE_RTOL * (1.0 + nrm)
    return np.where(tie, 0, np.where(nrm > zeta, 1, -1))


def jac_group(pp: ProxParams, x, chi: float = 0.0) -> GroupJacobian:
    x = np.asarray(x, float)
    theta = (x > 0).astype(float)
    scale = pp.scale
    zeta = pp.zeta
    if zeta == 0.0:
        return GroupJacobian(JacKind.INTERIOR, theta, scale, a=1.0, b=0.0)
    wt = np.maximum(x, 0.0) * scale
    nrm = float(np.linalg.norm(wt))
    branch = int(_classify(nrm, zeta))
    if branch < 0 or nrm == 0.0:
        return GroupJacobian(JacKind.ZERO, theta, scale)
    w = wt / nrm
    if branch == 0:
        return GroupJacobian(JacKind.BOUNDARY, theta, scale, w=w, chi=chi)
    return GroupJacobian(JacKind.INTERIOR, theta, scale, a=1.0 - zeta / nrm, b=zeta / nrm, w=w)


class PlanJacobian:
    """Canonical Jacobian of ``prox_{sigma p}`` over the whole plan.

    Acts as ``Y -> diag * Y + sum_G coef_G * what_G <what_G, y_G>``.
    """

    def __init__(self, diag, what, coef, partition: GroupPartition):
        self.diag = diag
        self.what = what
        self.coef = coef
        self.partition = partition

    @property
    def has_rank1(self) -> bool:
        return self.coef is not None and bool(np.any(self.coef))

    def apply(self, Y) -> np.ndarray:
        out = self.diag * Y
        if self.has_rank1:
            flat = out.ravel()
            part = self.partition
            kernels.group_rank1_apply(np.ascontiguousarray(Y, float).ravel(), part.index, part.ptr,
                                      self.what, self.coef, flat)
            out = flat.reshape(Y.shape)
        return out

    def rank1_entries(self):
        """Triplets ``(flat index, group, value)`` of the unit directions of rank-one groups."""
        part = self.partition
        g_of = part.group_of
        keep = self.coef[g_of] > 0
        idx = part.index[keep]
        return idx, g_of[keep], self.what[idx]

    def dense(self) -> np.ndarray:
        """Explicit (mn x mn) matrix; for small problems and tests."""
        k = self.diag.size
        J = np.diag(self.diag.ravel())
        if self.has_rank1:
            part = self.partition
            for g in np.flatnonzero(self.coef):
                idx = part.index[part.ptr[g]:part.ptr[g + 1]]
                w = self.what[idx]
                J[np.ix_(idx, idx)] += self.coef[g] * np.outer(w, w)
        assert J.shape == (k, k)
        return J


class PlanProx:
    """``prox_{sigma p}`` of a plan-shaped argument, keeping what the Jacobian needs.

    Attributes
    ----------
    value : ndarray (m, n)
        The prox.
    reg_value : float
        ``p(value)``.
    """

    def __init__(self, reg: Regularizer, sigma: float, arg):
        self.reg = reg
        self.sigma = sigma
        self.arg = arg
        lam1, lam2 = reg.lambda1, reg.lambda2
        part = reg.partition
        self.scale = 1.0 / (sigma * lam2 + 1.0)
        self._elementwise = lam1 == 0.0 or part.is_singletons or not np.any(part.omega)
        if self._elementwise:
            w = np.maximum(arg, 0.0) * self.scale
            if lam1 > 0.0 and part.is_singletons:
                self.zeta = (sigma * lam1 * self.scale) * part.omega.reshape(arg.shape)
                self.value = np.maximum(w - self.zeta, 0.0)
                self.reg_value = lam1 * float(np.vdot(part.omega.reshape(arg.shape), self.value))
            else:
                self.zeta = None
                self.value = w
                self.reg_value = 0.0
            self.wnorm = None
        else:
            self.zeta = (sigma * lam1 * self.scale) * part.omega
            flat = np.ascontiguousarray(arg, float).ravel()
            out = np.empty_like(flat)
            wnorm = np.empty(part.n_groups)
            kernels.group_prox(flat, part.index, part.ptr, self.scale, self.zeta, out, wnorm)
            self.value = out.reshape(arg.shape)
            self.wnorm = wnorm
            self.reg_value = lam1 * float(np.dot(part.omega, np.maximum(wnorm - self.zeta, 0.0)))
        if lam2 > 0.0:
            self.reg_value += 0.5 * lam2 * float(np.vdot(self.value, self.value))

    def jacobian(self) -> PlanJacobian:
        arg = self.arg
        part = self.reg.partition
        theta = arg > 0
        if self._elementwise:
            if self.zeta is not None:
                active = theta & (np.maximum(arg, 0.0) * self.scale > self.zeta)
            else:
                active = theta
            return PlanJacobian(self.scale * active, None, None, part)
        branch = _classify(self.wnorm, self.zeta)
        interior = branch > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(interior, 1.0 - self.zeta / self.wnorm, 0.0)
            b = np.where(interior, self.zeta / self.wnorm, 0.0)
            inv = np.where(interior, 1.0 / self.wnorm, 0.0)
        diag = np.zeros(arg.size)
        diag[part.index] = self.scale * a[part.group_of]
        diag = diag.reshape(arg.shape) * theta
        what = np.zeros(arg.size)
        what[part.index] = np.maximum(arg.ravel()[part.index], 0.0) * self.scale * inv[part.group_of]
        return PlanJacobian(diag, what, self.scale * b, part)


def prox_p(X, sigma: float, reg: Regularizer) -> np.ndarray:
    """``prox_{sigma p}(X)`` applied group by group."""
    return PlanProx(reg, sigma, np.asarray(X, float)).value


def reg_value(reg: Regularizer, X) -> float:
    """``p(X)`` without the nonnegativity indicator."""
    X = np.asarray(X, float)
    val = 0.0
    if reg.lambda1 > 0:
        val += reg.lambda1 * float(np.dot(reg.partition.omega, reg.partition.norms(X)))
    if reg.lambda2 > 0:
        val += 0.5 * reg.lambda2 * float(np.vdot(X, X))
    return val


def conj_p(reg: Regularizer, Z):
    """Conjugate ``p*(Z)`` and the distance of ``Z`` to ``dom p*``.

    Per group, with ``t_G = max(||max(z_G, 0)|| - lambda1 omega_G, 0)``, the conjugate is
    ``t_G^2 / (2 lambda2)`` when ``lambda2 > 0``; otherwise it is the indicator of
    ``{t_G = 0}``, reported as value 0 at the projected point and distance ``||t||``.
    """
    Zp = np.maximum(np.asarray(Z, float), 0.0)
    lam1, lam2 = reg.lambda1, reg.lambda2
    part = reg.partition
    if lam1 == 0.0 or not np.any(part.omega):
        tsq = float(np.vdot(Zp, Zp))
    else:
        t = np.maximum(part.norms(Zp) - lam1 * part.omega, 0.0)
        tsq = float(np.dot(t, t))
    if lam2 > 0.0:
        return tsq / (2.0 * lam2), 0.0
    return 0.0, float(np.sqrt(tsq))
