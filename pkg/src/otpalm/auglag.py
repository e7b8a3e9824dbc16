"""Augmented Lagrangian, proximal subproblem and optimality residuals.

The proximal subproblem at outer iteration k minimizes over dual points (W, u, v)

    Psi(W,u,v) = L_sigma(W,u,v; Xh,yh,zh) + tau/(2 sigma) ||(W,u,v) - (Wh,uh,vh)||^2

where L_sigma is written through Moreau envelopes so that Psi is C^1 with gradient
``(A Xs B - S, Xs 1 + ys - alpha, Xs^T 1 + zs - beta) + tau/sigma * (dual - anchor)``
and ``Xs = prox_{sigma p}(Xh + sigma (u 1^T + 1 v^T + A^T W B^T - C))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DualPoint, PrimalPoint, ProblemData, dual_objective, primal_objective
from .prox import PlanProx, cone_mask, prox_cone, prox_p


@dataclass(frozen=True)
class ALParams:
    sigma: float
    tau: float
    anchor_primal: PrimalPoint
    anchor_dual: DualPoint

    def __post_init__(self):
        if not (self.sigma > 0 and self.tau > 0):
            raise ValueError("sigma and tau must be positive")


@dataclass(frozen=True)
class DeltaTriple:
    delta: np.ndarray
    delta_p: np.ndarray
    delta_d: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.delta))

    @property
    def norm_p(self) -> float:
        return float(np.linalg.norm(self.delta_p))

    @property
    def norm_d(self) -> float:
        return float(np.linalg.norm(self.delta_d))


@dataclass(frozen=True)
class ResidualReport:
    eta_X: float
    eta_y: float
    eta_z: float
    eta_feas: float
    eta_gap: float
    eta: float
    pobj: float
    dobj: float
    domain_distance: float
    feas: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def eval_shifted_argument(ap: ALParams, dp: DualPoint, pd: ProblemData) -> np.ndarray:
    """``Xh + sigma (u 1^T + 1 v^T + A^T W B^T - C)``."""
    return ap.anchor_primal.X + ap.sigma * (pd.adjoint(dp.W, dp.u, dp.v) - pd.C)


class SubproblemEval:
    """Value and gradient of the proximal subproblem at one dual point.

    The prox evaluations are cached so that the gradient, the residual triple and
    the Newton operator can all reuse them.
    """

    def __init__(self, ap: ALParams, dp: DualPoint, pd: ProblemData):
        self.ap = ap
        self.dp = dp
        self.pd = pd
        sigma = ap.sigma
        cs = pd.constraints
        ah = ap.anchor_primal
        self.arg = eval_shifted_argument(ap, dp, pd)
        self.plan = PlanProx(pd.reg, sigma, self.arg)
        self.yarg = ah.y + sigma * dp.u
        self.zarg = ah.z + sigma * dp.v
        self.y = prox_cone(cs.cone_r, sigma, self.yarg)
        self.z = prox_cone(cs.cone_c, sigma, self.zarg)
        self._grad = None
        self._psi = None

    @property
    def X(self) -> np.ndarray:
        return self.plan.value

    @property
    def psi(self) -> float:
        if self._psi is None:
            ap, pd, dp = self.ap, self.pd, self.dp
            sigma = ap.sigma
            ah, dh = ap.anchor_primal, ap.anchor_dual
            P = self.plan.value
            lin = float(np.vdot(pd.constraints.S, dp.W)) + float(pd.alpha @ dp.u) + float(pd.beta @ dp.v)
            hat = float(np.vdot(ah.X, ah.X)) + float(ah.y @ ah.y) + float(ah.z @ ah.z)
            env = (float(np.vdot(P, 2.0 * self.arg - P))
                   + float(self.y @ (2.0 * self.yarg - self.y))
                   + float(self.z @ (2.0 * self.zarg - self.z)))
            prox_term = (float(np.sum((dp.W - dh.W) ** 2)) + float(np.sum((dp.u - dh.u) ** 2))
                         + float(np.sum((dp.v - dh.v) ** 2)))
            self._psi = (-lin - 0.5 * hat / sigma + 0.5 * env / sigma - self.plan.reg_value
                         + 0.5 * ap.tau / sigma * prox_term)
        return self._psi

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            ap, pd, dp = self.ap, self.pd, self.dp
            r = ap.tau / ap.sigma
            dh = ap.anchor_dual
            AXB, r1, c1 = pd.forward(self.plan.value)
            gW = AXB - pd.constraints.S + r * (dp.W - dh.W)
            gu = r1 + self.y - pd.alpha + r * (dp.u - dh.u)
            gv = c1 + self.z - pd.beta + r * (dp.v - dh.v)
            self._grad = pd.pack(gW, gu, gv)
        return self._grad

    def primal(self) -> PrimalPoint:
        return PrimalPoint(self.plan.value, self.y, self.z)

    def delta(self) -> DeltaTriple:
        ap, pd, dp = self.ap, self.pd, self.dp
        ah, dh = ap.anchor_primal, ap.anchor_dual
        dpr = np.concatenate([(self.plan.value - ah.X).ravel(), self.y - ah.y, self.z - ah.z])
        dd = pd.pack(dp.W - dh.W, dp.u - dh.u, dp.v - dh.v)
        return DeltaTriple(self.grad, dpr, dd)

    def cone_masks(self):
        cs = self.pd.constraints
        return cone_mask(cs.cone_r, self.yarg), cone_mask(cs.cone_c, self.zarg)


def eval_Psi(ap: ALParams, dp: DualPoint, pd: ProblemData) -> float:
    return SubproblemEval(ap, dp, pd).psi


def grad_Psi(ap: ALParams, dp: DualPoint, pd: ProblemData) -> np.ndarray:
    return SubproblemEval(ap, dp, pd).grad


def delta_residuals(ap: ALParams, dp_tilde: DualPoint, pd: ProblemData):
    ev = SubproblemEval(ap, dp_tilde, pd)
    return ev.delta(), ev.primal()


def feasibility(pd: ProblemData, pt: PrimalPoint) -> float:
    """Primal constraint violation used in result tables (feas)."""
    from .model import ConeKind

    cs = pd.constraints
    AXB, r1, c1 = pd.forward(pt.X)
    num = np.sqrt(np.sum((r1 + pt.y - pd.alpha) ** 2) + np.sum((c1 + pt.z - pd.beta) ** 2)
                  + np.sum((AXB - cs.S) ** 2))
    eq = num / (1.0 + np.linalg.norm(pd.alpha) + np.linalg.norm(pd.beta) + np.linalg.norm(cs.S))
    neg = np.linalg.norm(np.minimum(pt.X, 0.0)) / (1.0 + np.linalg.norm(pt.X))

    def polar(kind, w):
        # distance-type violation of w in the cone: {0} or the nonnegative orthant
        return np.linalg.norm(w) if kind is ConeKind.ZERO else np.linalg.norm(np.minimum(w, 0.0))

    py = polar(cs.cone_r, pt.y) / (1.0 + np.linalg.norm(pt.y))
    pz = polar(cs.cone_c, pt.z) / (1.0 + np.linalg.norm(pt.z))
    return float(max(eq, neg, py, pz))


def kkt_residuals(pd: ProblemData, pt: PrimalPoint, dp: DualPoint) -> ResidualReport:
    cs = pd.constraints
    X, y, z = pt.X, pt.y, pt.z
    Z = pd.adjoint(dp.W, dp.u, dp.v) - pd.C
    eta_X = np.linalg.norm(X - prox_p(X + Z, 1.0, pd.reg)) / (1.0 + np.linalg.norm(pd.C))
    eta_y = np.linalg.norm(y - prox_cone(cs.cone_r, 1.0, y + dp.u)) / (1.0 + np.linalg.norm(y) + np.linalg.norm(dp.u))
    eta_z = np.linalg.norm(z - prox_cone(cs.cone_c, 1.0, z + dp.v)) / (1.0 + np.linalg.norm(z) + np.linalg.norm(dp.v))
    AXB, r1, c1 = pd.forward(X)
    num = np.sqrt(np.sum((r1 + y - pd.alpha) ** 2) + np.sum((c1 + z - pd.beta) ** 2) + np.sum((AXB - cs.S) ** 2))
    eta_feas = num / (1.0 + np.linalg.norm(pd.alpha) + np.linalg.norm(pd.beta) + np.linalg.norm(cs.S))
    pobj = primal_objective(pd, pt)
    dobj, dist = dual_objective(pd, dp)
    eta_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    comps = [float(eta_X), float(eta_y), float(eta_z), float(eta_feas), float(eta_gap)]
    return ResidualReport(*comps, max(comps), pobj, dobj, dist, feasibility(pd, pt))
