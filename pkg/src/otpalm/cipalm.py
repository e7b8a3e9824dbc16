"""Corrected inexact proximal augmented Lagrangian method (outer loop).

Each outer iteration approximately minimizes the proximal subproblem with
semismooth Newton, stopping on a relative error test, and then applies a
correction step to the dual variables.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .auglag import ALParams, DeltaTriple, ResidualReport, SubproblemEval, kkt_residuals
from .model import DualPoint, PrimalPoint, ProblemData, Regularizer
from .ssn import SsnConfig, ssn_solve


# inexactness policies

@dataclass(frozen=True)
class Relative:
    rho: float = 0.01

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")

    def describe(self) -> str:
        return f"relative(rho={self.rho:g})"


@dataclass(frozen=True)
class AbsoluteA:
    eps: Callable[[int], float]
    label: str = "absA"

    def describe(self) -> str:
        return self.label


@dataclass(frozen=True)
class AbsoluteB:
    delta: Callable[[int], float]
    label: str = "absB"

    def describe(self) -> str:
        return self.label


@dataclass(frozen=True)
class AbsoluteAB:
    eps: Callable[[int], float]
    delta: Callable[[int], float]
    label: str = "absAB"

    def describe(self) -> str:
        return self.label


def power_sequence(c0: float, p: float) -> Callable[[int], float]:
    """``k -> c0 / (k + 1)^p``."""
    return lambda k: c0 / (k + 1.0) ** p


def snipal_policy(eps0=1.0, p=1.1, delta0=1.0, q=1.1, kind="AB"):
    """Absolute criteria with power-law tolerance sequences."""
    eps, dlt = power_sequence(eps0, p), power_sequence(delta0, q)
    if kind == "A":
        return AbsoluteA(eps, f"absA(eps0={eps0:g},p={p:g})")
    if kind == "B":
        return AbsoluteB(dlt, f"absB(delta0={delta0:g},q={q:g})")
    return AbsoluteAB(eps, dlt, f"absAB(eps0={eps0:g},p={p:g},delta0={delta0:g},q={q:g})")


def check_inexact(policy, k: int, ap: ALParams, dt: DeltaTriple) -> bool:
    sig, tau = ap.sigma, ap.tau
    lhs = dt.norm
    fac = min(math.sqrt(tau), 1.0) / sig
    dist = math.sqrt(tau * dt.norm_d ** 2 + dt.norm_p ** 2)
    if isinstance(policy, Relative):
        return lhs <= fac * policy.rho * dist
    if isinstance(policy, AbsoluteA):
        return lhs <= fac * policy.eps(k)
    if isinstance(policy, AbsoluteB):
        return lhs <= fac * policy.delta(k) * dist
    if isinstance(policy, AbsoluteAB):
        return lhs <= fac * policy.eps(k) and lhs <= fac * policy.delta(k) * dist
    raise TypeError(f"unknown policy {policy!r}")


# parameter schedules

def _default_growth(k: int) -> float:
    return 1.0 + (k + 1.0) ** -1.1


def _default_sigma(k: int) -> float:
    return min(1e4, max(1e-4, 1.5 ** min(k, 100)))


@dataclass(frozen=True)
class Schedules:
    tau0: float = 5.0
    tau_growth: Callable[[int], float] = _default_growth
    sigma: Callable[[int], float] = _default_sigma

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")


def schedule_values(schedules: Schedules, k: int):
    """``(tau_k, sigma_k)`` with ``tau_{k+1} = growth(k) * tau_k``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    tau = schedules.tau0
    for i in range(k):
        tau *= schedules.tau_growth(i)
    return tau, schedules.sigma(k)


def check_schedules(schedules: Schedules, n: int = 10_000, tau_min: float = 1e-12) -> bool:
    """Numerical check that tau_k stays bounded below and the growth factors are summable."""
    tau = schedules.tau0
    total = 0.0
    for k in range(n):
        g = schedules.tau_growth(k)
        if g < 0:
            return False
        total += max(g - 1.0, 0.0)
        tau *= g
        if tau < tau_min or schedules.sigma(k) <= 0:
            return False
    return math.isfinite(total)


# configuration and report

class Status(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    TIMEOUT = "TimeOut"


@dataclass(frozen=True)
class SolverConfig:
    policy: object = field(default_factory=Relative)
    schedules: Schedules = field(default_factory=Schedules)
    tol: float = 1e-6
    maxiter: int = 1000
    max_time: float = math.inf
    apply_correction: bool = True
    ssn: SsnConfig = field(default_factory=SsnConfig)
    warm_start: object = None
    scale_data: bool = True
    record_iterates: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class IterRecord:
    k: int
    sigma: float
    tau: float
    inner_iters: int
    linear_solves: int
    residuals: ResidualReport
    inner_note: str = ""


@dataclass
class SolveReport:
    status: Status
    outer_iters: int
    linear_systems_solved: int
    primal: PrimalPoint
    dual: DualPoint
    residuals: ResidualReport
    history: list
    initial_residuals: ResidualReport
    time: float
    warm_start: dict | None = None
    trace: list | None = None
    notes: list = field(default_factory=list)
    work_problem: ProblemData | None = None  # the (possibly rescaled) data the trace refers to

    @property
    def eta(self) -> float:
        return self.residuals.eta

    @property
    def pobj(self) -> float:
        return self.residuals.pobj


def correction_step(ap: ALParams, dp_tilde: DualPoint, pt_tilde: PrimalPoint, pd: ProblemData,
                    apply_correction: bool = True):
    """Dual correction ``dual^k - (sigma/tau) * primal residual at the tilde point``."""
    if not apply_correction:
        return dp_tilde, pt_tilde
    r = ap.sigma / ap.tau
    dh = ap.anchor_dual
    AXB, r1, c1 = pd.forward(pt_tilde.X)
    W = dh.W - r * (AXB - pd.constraints.S)
    u = dh.u - r * (r1 + pt_tilde.y - pd.alpha)
    v = dh.v - r * (c1 + pt_tilde.z - pd.beta)
    return DualPoint(W, u, v), pt_tilde


def _scaled(pd: ProblemData):
    """Uniformly rescaled copy of ``pd`` with the primal and dual scale factors."""
    cs = pd.constraints
    sd = 1.0 + float(np.linalg.norm(pd.C))
    sp_ = 1.0 + float(np.sqrt(np.sum(pd.alpha ** 2) + np.sum(pd.beta ** 2) + np.sum(cs.S ** 2)))
    reg = Regularizer(pd.reg.lambda1 / sd, pd.reg.lambda2 * sp_ / sd, pd.reg.partition)
    cs2 = type(cs)(cs.A, cs.B, cs.S / sp_, cs.cone_r, cs.cone_c, cs.preset,
                   None if cs.mass is None else cs.mass / sp_)
    return ProblemData(pd.C / sd, pd.alpha / sp_, pd.beta / sp_, cs2, reg, dict(pd.meta)), sp_, sd


def solve(pd: ProblemData, cfg: SolverConfig = SolverConfig(), init=None) -> SolveReport:
    """Run the outer loop from ``init = (DualPoint, PrimalPoint)`` or a warm start."""
    t0 = time.perf_counter()
    orig = pd
    sp_, sd = 1.0, 1.0
    if cfg.scale_data:
        pd, sp_, sd = _scaled(pd)

    def unscale(dp: DualPoint, pt: PrimalPoint):
        if not cfg.scale_data:
            return dp, pt
        return (DualPoint(dp.W * sd, dp.u * sd, dp.v * sd), PrimalPoint(pt.X * sp_, pt.y * sp_, pt.z * sp_))

    def residuals(dp, pt):
        d, p = unscale(dp, pt)
        return kkt_residuals(orig, p, d)

    ws_stats = None
    if init is not None:
        dp = DualPoint(*(np.array(a, float) / (sd if cfg.scale_data else 1.0) for a in (init[0].W, init[0].u, init[0].v)))
        pt = PrimalPoint(*(np.array(a, float) / (sp_ if cfg.scale_data else 1.0) for a in (init[1].X, init[1].y, init[1].z)))
    elif cfg.warm_start is not None:
        from .admm import warm_start

        dp, pt, ws_stats = warm_start(pd, cfg.warm_start, measure=residuals)
    else:
        dp, pt = pd.zero_dual(), pd.zero_primal()

    res = residuals(dp, pt)
    initial = res
    history = []
    trace = [] if cfg.record_iterates else None
    notes = []
    best = (res.eta, dp, pt, res)
    lin = 0
    k = 0
    status = None
    while True:
        if res.eta < cfg.tol:
            status = Status.CONVERGED
            break
        if k >= cfg.maxiter:
            status = Status.MAX_ITER
            break
        if time.perf_counter() - t0 > cfg.max_time:
            status = Status.TIMEOUT
            break
        tau, sigma = schedule_values(cfg.schedules, k)
        ap = ALParams(sigma, tau, pt, dp)
        policy = cfg.policy
        ev, stats = ssn_solve(ap, dp, pd, cfg.ssn, stop=lambda dt, _k=k, _ap=ap: check_inexact(policy, _k, _ap, dt))
        if stats.note:
            notes.append(f"k={k}: {stats.note}")
        lin += stats.linear_solves
        pt_t = ev.primal()
        dp_new, pt_new = correction_step(ap, ev.dp, pt_t, pd, cfg.apply_correction)
        if trace is not None:
            dt = ev.delta()
            trace.append(dict(k=k, sigma=sigma, tau=tau, anchor_dual=dp, anchor_primal=pt,
                              dual_tilde=ev.dp, primal_tilde=pt_t, delta=dt,
                              dual_next=dp_new, primal_next=pt_new))
        dp, pt = dp_new, pt_new
        res = residuals(dp, pt)
        history.append(IterRecord(k, sigma, tau, stats.iterations, stats.linear_solves, res, stats.note))
        k += 1
        if res.eta < best[0]:
            best = (res.eta, dp, pt, res)

    if status is not Status.CONVERGED:
        _, dp, pt, res = best
    dp, pt = unscale(dp, pt)
    return SolveReport(status, k, lin, pt, dp, res, history, initial, time.perf_counter() - t0,
                       ws_stats, trace, notes, pd)
