"""Problem data for group-quadratic regularized optimal transport.

The problem is

    min  <C, X> + lambda1 * sum_G omega_G ||x_G|| + lambda2/2 ||X||_F^2
    s.t. A X B = S,  alpha - X 1 in K_r,  beta - X^T 1 in K_c,  X >= 0

where each cone is either the zero space or the nonnegative orthant. Matrices
are stored row-major and flattened with ``i * n + j``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidMass, NegativeMarginal


class ConeKind(enum.Enum):
    ZERO = "zero"
    NONNEG = "nonneg"


class Preset(enum.Enum):
    CLASSICAL = "classical"
    PARTIAL = "partial"
    MARTINGALE = "martingale"
    CUSTOM = "custom"


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class GroupPartition:
    """Disjoint groups of matrix entries stored in compressed form.

    Parameters
    ----------
    index : ndarray of int
        Flat (row-major) entry indices, concatenated group by group.
    ptr : ndarray of int
        Group offsets into ``index``, length ``n_groups + 1``.
    omega : ndarray
        Nonnegative weight per group.
    shape : tuple
        ``(m, n)`` of the transport plan.
    """

    def __init__(self, index, ptr, omega, shape):
        self.index = _frozen(index, np.int64)
        self.ptr = _frozen(ptr, np.int64)
        self.omega = _frozen(omega)
        self.shape = (int(shape[0]), int(shape[1]))
        self._group_of = None
        self._trivial = None

    @classmethod
    def singletons(cls, m: int, n: int, omega=None) -> "GroupPartition":
        k = m * n
        w = np.ones(k) if omega is None else np.broadcast_to(np.asarray(omega, float), (k,))
        return cls(np.arange(k), np.arange(k + 1), w, (m, n))

    @classmethod
    def from_pairs(cls, groups: Sequence, m: int, n: int, omega=None) -> "GroupPartition":
        """Build from a list of groups, each a sequence of ``(row, col)`` pairs (0-based)."""
        flat = []
        ptr = [0]
        for g in groups:
            pairs = np.asarray(g, dtype=np.int64).reshape(-1, 2)
            if np.any(pairs < 0) or np.any(pairs[:, 0] >= m) or np.any(pairs[:, 1] >= n):
                raise DimensionMismatch("group index out of range")
            idx = np.sort(pairs[:, 0] * n + pairs[:, 1])
            flat.append(idx)
            ptr.append(ptr[-1] + idx.size)
        index = np.concatenate(flat) if flat else np.zeros(0, np.int64)
        w = np.ones(len(ptr) - 1) if omega is None else np.asarray(omega, float)
        if w.shape != (len(ptr) - 1,):
            raise DimensionMismatch("omega length must equal the number of groups")
        return cls(index, np.asarray(ptr), w, (m, n))

    @classmethod
    def column_classes(cls, labels, n: int, omega=None) -> "GroupPartition":
        """One group per (column, label) pair; rows sharing a label in a column form a group."""
        labels = np.asarray(labels)
        m = labels.size
        classes = np.unique(labels)
        index = []
        ptr = [0]
        for j in range(n):
            for c in classes:
                rows = np.flatnonzero(labels == c)
                index.append(rows * n + j)
                ptr.append(ptr[-1] + rows.size)
        w = np.ones(len(ptr) - 1) if omega is None else np.broadcast_to(np.asarray(omega, float), (len(ptr) - 1,))
        return cls(np.concatenate(index), np.asarray(ptr), w, (m, n))

    @property
    def n_groups(self) -> int:
        return self.ptr.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.ptr)

    @property
    def is_singletons(self) -> bool:
        if self._trivial is None:
            k = self.shape[0] * self.shape[1]
            self._trivial = bool(
                self.index.size == k
                and self.n_groups == k
                and np.array_equal(self.index, np.arange(k))
            )
        return self._trivial

    @property
    def group_of(self) -> np.ndarray:
        """Group id of each entry of ``index`` (group order)."""
        if self._group_of is None:
            g = np.repeat(np.arange(self.n_groups), self.sizes)
            g.setflags(write=False)
            self._group_of = g
        return self._group_of

    def pairs(self, g: int) -> np.ndarray:
        idx = self.index[self.ptr[g]:self.ptr[g + 1]]
        return np.stack(np.divmod(idx, self.shape[1]), axis=1)

    def groups(self) -> list:
        return [self.pairs(g) for g in range(self.n_groups)]

    def norms(self, X) -> np.ndarray:
        """Euclidean norm of every group of ``X``."""
        x = np.asarray(X, float).ravel()
        if self.is_singletons:
            return np.abs(x)
        sq = np.add.reduceat(x[self.index] ** 2, self.ptr[:-1]) if self.n_groups else np.zeros(0)
        return np.sqrt(sq)


@dataclass(frozen=True)
class ConstraintSet:
    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    cone_r: ConeKind
    cone_c: ConeKind
    preset: Preset
    mass: float | None = None


@dataclass(frozen=True)
class Regularizer:
    lambda1: float
    lambda2: float
    partition: GroupPartition

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularization weights must be nonnegative")


@dataclass(frozen=True)
class PrimalPoint:
    X: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def copy(self) -> "PrimalPoint":
        return PrimalPoint(self.X.copy(), self.y.copy(), self.z.copy())


@dataclass(frozen=True)
class DualPoint:
    W: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "DualPoint":
        return DualPoint(self.W.copy(), self.u.copy(), self.v.copy())


@dataclass(frozen=True)
class ProblemData:
    C: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    constraints: ConstraintSet
    reg: Regularizer
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[1]

    @property
    def mt(self) -> int:
        return self.constraints.A.shape[0]

    @property
    def nt(self) -> int:
        return self.constraints.B.shape[1]

    @property
    def has_w(self) -> bool:
        return self.mt * self.nt > 0

    @property
    def dual_dim(self) -> int:
        return self.mt * self.nt + self.m + self.n

    # linear maps between plan space and (W, u, v) space

    def apply_AB(self, X) -> np.ndarray:
        cs = self.constraints
        if not self.has_w:
            return np.zeros((self.mt, self.nt))
        return cs.A @ X @ cs.B

    def forward(self, X):
        """``(A X B, X 1, X^T 1)``."""
        return self.apply_AB(X), X.sum(axis=1), X.sum(axis=0)

    def adjoint(self, W, u, v) -> np.ndarray:
        """``u 1^T + 1 v^T + A^T W B^T``."""
        out = u[:, None] + v[None, :]
        if self.has_w:
            cs = self.constraints
            out = out + cs.A.T @ W @ cs.B.T
        return out

    def pack(self, W, u, v) -> np.ndarray:
        return np.concatenate([np.ravel(W), u, v])

    def unpack(self, vec):
        k = self.mt * self.nt
        return vec[:k].reshape(self.mt, self.nt), vec[k:k + self.m], vec[k + self.m:]

    def zero_dual(self) -> DualPoint:
        return DualPoint(np.zeros((self.mt, self.nt)), np.zeros(self.m), np.zeros(self.n))

    def zero_primal(self) -> PrimalPoint:
        return PrimalPoint(np.zeros((self.m, self.n)), np.zeros(self.m), np.zeros(self.n))


def _default_reg(m: int, n: int, reg: Regularizer | None) -> Regularizer:
    if reg is None:
        return Regularizer(0.0, 0.0, GroupPartition.singletons(m, n))
    return reg


def _check_marginals(C, alpha, beta):
    C = np.asarray(C, float)
    alpha = np.asarray(alpha, float).ravel()
    beta = np.asarray(beta, float).ravel()
    if C.ndim != 2 or C.shape != (alpha.size, beta.size):
        raise DimensionMismatch(f"cost {C.shape} vs marginals ({alpha.size}, {beta.size})")
    if np.any(alpha < 0) or np.any(beta < 0):
        raise NegativeMarginal("marginals must be componentwise nonnegative")
    return C, alpha, beta


def _make(C, alpha, beta, A, B, S, cone_r, cone_c, preset, reg, mass=None, meta=None) -> ProblemData:
    m, n = C.shape
    reg = _default_reg(m, n, reg)
    if reg.partition.shape != (m, n):
        raise DimensionMismatch("partition shape does not match the cost matrix")
    cs = ConstraintSet(_frozen(A), _frozen(B), _frozen(S), cone_r, cone_c, preset, mass)
    return ProblemData(_frozen(C), _frozen(alpha), _frozen(beta), cs, reg, dict(meta or {}))


def build_classical(C, alpha, beta, reg: Regularizer | None = None, meta=None) -> ProblemData:
    C, alpha, beta = _check_marginals(C, alpha, beta)
    m, n = C.shape
    return _make(C, alpha, beta, np.zeros((0, m)), np.zeros((n, 0)), np.zeros((0, 0)),
                 ConeKind.ZERO, ConeKind.ZERO, Preset.CLASSICAL, reg, meta=meta)


def build_partial(C, alpha, beta, s: float, reg: Regularizer | None = None, meta=None) -> ProblemData:
    C, alpha, beta = _check_marginals(C, alpha, beta)
    m, n = C.shape
    if not (0 < s <= min(alpha.sum(), beta.sum())):
        raise InvalidMass(f"transported mass {s} must lie in (0, {min(alpha.sum(), beta.sum())}]")
    return _make(C, alpha, beta, np.ones((1, m)), np.ones((n, 1)), np.array([[float(s)]]),
                 ConeKind.NONNEG, ConeKind.NONNEG, Preset.PARTIAL, reg, mass=float(s), meta=meta)


def build_martingale(C, alpha, beta, P, Q, reg: Regularizer | None = None, meta=None) -> ProblemData:
    C, alpha, beta = _check_marginals(C, alpha, beta)
    m, n = C.shape
    P = np.asarray(P, float)
    Q = np.asarray(Q, float)
    if P.ndim == 1:
        P = P[:, None]
    if Q.ndim == 1:
        Q = Q[:, None]
    if P.shape[0] != m or Q.shape[0] != n or P.shape[1] != Q.shape[1]:
        raise DimensionMismatch(f"supports P {P.shape} and Q {Q.shape} incompatible with ({m}, {n})")
    return _make(C, alpha, beta, np.eye(m), Q, alpha[:, None] * P,
                 ConeKind.ZERO, ConeKind.ZERO, Preset.MARTINGALE, reg, meta=meta)


def build_custom(C, alpha, beta, A, B, S, cone_r=ConeKind.ZERO, cone_c=ConeKind.ZERO,
                 reg: Regularizer | None = None, meta=None) -> ProblemData:
    C, alpha, beta = _check_marginals(C, alpha, beta)
    m, n = C.shape
    A = np.asarray(A, float).reshape(-1, m)
    B = np.asarray(B, float).reshape(n, -1)
    S = np.asarray(S, float).reshape(A.shape[0], B.shape[1])
    return _make(C, alpha, beta, A, B, S, ConeKind(cone_r), ConeKind(cone_c), Preset.CUSTOM, reg, meta=meta)


def with_regularizer(pd: ProblemData, reg: Regularizer) -> ProblemData:
    return ProblemData(pd.C, pd.alpha, pd.beta, pd.constraints, reg, dict(pd.meta))


def validate(pd: ProblemData) -> list[str]:
    """Return a list of violated invariants; empty when the instance is well formed."""
    out = []
    m, n = pd.m, pd.n
    cs = pd.constraints
    if pd.alpha.shape != (m,) or pd.beta.shape != (n,):
        out.append("DimensionMismatch{marginals}")
    if cs.A.shape[1:] != (m,) or cs.B.shape[:1] != (n,) or cs.S.shape != (cs.A.shape[0], cs.B.shape[1]):
        out.append("DimensionMismatch{constraint block}")
    for name, arr in (("C", pd.C), ("alpha", pd.alpha), ("beta", pd.beta), ("A", cs.A), ("B", cs.B), ("S", cs.S)):
        if not np.all(np.isfinite(arr)):
            out.append(f"NonFinite{{{name}}}")
    if np.any(pd.alpha < 0) or np.any(pd.beta < 0):
        out.append("NegativeMarginal{}")
    if cs.preset is Preset.PARTIAL and cs.mass is not None:
        if not (0 < cs.mass <= min(pd.alpha.sum(), pd.beta.sum())):
            out.append("InvalidMass{s}")
    reg = pd.reg
    if reg.lambda1 < 0 or reg.lambda2 < 0:
        out.append("NegativeWeight{lambda}")
    part = reg.partition
    if part.shape != (m, n):
        out.append("DimensionMismatch{partition}")
        return out
    if np.any(part.sizes <= 0):
        out.append(f"EmptyGroup{{{int(np.sum(part.sizes <= 0))} groups}}")
    if np.any(part.omega < 0):
        out.append("NegativeWeight{omega}")
    if part.index.size and (part.index.min() < 0 or part.index.max() >= m * n):
        out.append("DimensionMismatch{group index}")
        return out
    counts = np.bincount(part.index, minlength=m * n)
    if np.any(counts > 1):
        out.append(f"GroupOverlap{{{int(np.sum(counts > 1))} entries}}")
    if np.any(counts == 0):
        out.append(f"GroupCoverageGap{{{int(np.sum(counts == 0))} entries}}")
    return out


def primal_objective(pd: ProblemData, pt: PrimalPoint) -> float:
    X = np.asarray(pt.X, float)
    reg = pd.reg
    val = float(np.vdot(pd.C, X))
    if reg.lambda1 > 0:
        val += reg.lambda1 * float(np.dot(reg.partition.omega, reg.partition.norms(X)))
    if reg.lambda2 > 0:
        val += 0.5 * reg.lambda2 * float(np.vdot(X, X))
    return val


def dual_objective(pd: ProblemData, dp: DualPoint):
    """Dual objective and the distance of the conjugate argument to ``dom p*``.

    Returns
    -------
    value : float
        ``<S,W> + <alpha,u> + <beta,v> - p*(Z)`` with ``Z = u 1^T + 1 v^T + A^T W B^T - C``;
        when ``Z`` is outside the domain the conjugate is evaluated at its projection.
    domain_distance : float
    """
    from .prox import conj_p

    Z = pd.adjoint(dp.W, dp.u, dp.v) - pd.C
    pstar, dist = conj_p(pd.reg, Z)
    val = float(np.vdot(pd.constraints.S, dp.W)) + float(pd.alpha @ dp.u) + float(pd.beta @ dp.v) - pstar
    return val, dist
