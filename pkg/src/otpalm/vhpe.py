"""Variable-metric hybrid proximal extragradient iterations on affine monotone operators.

Used to exercise the convergence theory numerically: Fejer monotonicity in a
varying metric, vanishing step quantities and the linear rate under an error
bound. Also replays stored proximal ALM iterates through the same criterion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CriterionViolated, RateUndefined

Vec = np.ndarray


@dataclass
class MonotoneOperatorSpec:
    """Affine operator ``T(x) = G x + h`` with ``G + G^T`` positive semidefinite."""

    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, float))
        self.h = np.asarray(self.h, float).ravel()
        if self.G.shape != (self.h.size, self.h.size):
            raise ValueError("G must be square with the size of h")
        if np.linalg.eigvalsh(self.sym).min() < -1e-12:
            raise ValueError("operator is not monotone")

    @property
    def dim(self) -> int:
        return self.h.size

    @property
    def sym(self) -> np.ndarray:
        return 0.5 * (self.G + self.G.T)

    def __call__(self, x) -> Vec:
        return self.G @ x + self.h

    def resolvent(self, c: float, M, x) -> Vec:
        """Exact solution of ``0 in c M T(z) + z - x``."""
        return np.linalg.solve(np.eye(self.dim) + c * M @ self.G, x - c * M @ self.h)

    def zero(self) -> Vec:
        z, *_ = np.linalg.lstsq(self.G, -self.h, rcond=None)
        if np.linalg.norm(self(z)) > 1e-9 * (1 + np.linalg.norm(self.h)):
            raise ValueError("operator has no zero")
        return z

    def null_basis(self, tol=1e-12) -> np.ndarray:
        U, s, Vt = np.linalg.svd(self.G)
        r = int(np.sum(s > tol * max(s.max(initial=0.0), 1.0)))
        return Vt[r:].T

    def kappa(self) -> float:
        """Error-bound constant ``1 / (smallest nonzero singular value of G)``."""
        s = np.linalg.svd(self.G, compute_uv=False)
        s = s[s > 1e-12 * max(s.max(initial=0.0), 1.0)]
        if s.size == 0:
            return 0.0
        return float(1.0 / s.min())

    def enlargement_eps(self, x, d) -> float:
        """Smallest ``eps`` with ``d`` in the eps-enlargement of ``T`` at ``x``.

        ``inf_y <T(y) - d, y - x> = -r^T Gs^+ r / 4`` with ``r = T(x) - d``;
        infinite when ``r`` leaves the range of the symmetric part.
        """
        r = self(x) - d
        Gs = self.sym
        w, V = np.linalg.eigh(Gs)
        cut = 1e-12 * max(abs(w).max(initial=0.0), 1.0)
        c = V.T @ r
        if np.any(np.abs(c[w <= cut]) > 1e-10 * (1 + np.linalg.norm(r))):
            return math.inf
        pos = w > cut
        return float(0.25 * np.sum(c[pos] ** 2 / w[pos]))

    def dist(self, x, Minv=None, witness=None) -> float:
        """Distance from ``x`` to the zero set in the norm ``||.||_Minv``."""
        x0 = self.zero() if witness is None else np.asarray(witness, float)
        N = self.null_basis()
        r = np.asarray(x, float) - x0
        Minv = np.eye(self.dim) if Minv is None else Minv
        if N.shape[1]:
            # weighted projection onto x0 + range(N)
            coef = np.linalg.solve(N.T @ Minv @ N, N.T @ Minv @ r)
            r = r - N @ coef
        return float(np.sqrt(max(r @ Minv @ r, 0.0)))


@dataclass
class MetricSequence:
    """Step sizes ``c_k``, metrics ``M_k`` and the summable slack ``eta_k``."""

    c: Callable[[int], float]
    M: Callable[[int], np.ndarray]
    eta: Callable[[int], float]
    lam_lo: float
    lam_hi: float

    @classmethod
    def constant(cls, dim: int, c: float = 1.0, M=None) -> "MetricSequence":
        M = np.eye(dim) if M is None else np.asarray(M, float)
        w = np.linalg.eigvalsh(M)
        return cls(lambda k: c, lambda k: M, lambda k: 0.0, float(w.min()), float(w.max()))

    @classmethod
    def growing(cls, dim: int, c0: float = 1.0, growth: float = 1.2, cmax: float = 1e3,
                tau0: float = 1.0, power: float = 1.1, seed: int = 0) -> "MetricSequence":
        """``M_k = Diag(1/tau_k, 1)``-style metrics with ``tau_{k+1} = (1 + (k+1)^-p) tau_k``."""
        rng = np.random.default_rng(seed)
        mask = rng.random(dim) < 0.5
        taus = [tau0]

        def tau(k):
            while len(taus) <= k:
                j = len(taus) - 1
                taus.append(taus[-1] * (1.0 + (j + 1.0) ** -power))
            return taus[k]

        def M(k):
            return np.diag(np.where(mask, 1.0 / tau(k), 1.0))

        # log tau_inf <= partial sum + integral bound on the tail of sum j^-p
        N = 100_000
        log_tau = math.log(tau0) + sum(math.log1p((j + 1.0) ** -power) for j in range(N))
        tau_inf = math.exp(log_tau + N ** (1.0 - power) / (power - 1.0))
        return cls(lambda k: min(c0 * growth ** k, cmax), M, lambda k: (k + 1.0) ** -power,
                   min(1.0 / tau_inf, 1.0), max(1.0 / tau0, 1.0))

    def audit(self, n: int = 200, tol: float = 1e-12) -> None:
        """Check the standing assumptions on the first ``n`` terms; raise ValueError on violation."""
        c_min = math.inf
        total = 0.0
        prev = None
        for k in range(n):
            ck = self.c(k)
            Mk = np.asarray(self.M(k), float)
            ek = self.eta(k)
            if not ck > 0 or ek < 0:
                raise ValueError(f"c_k or eta_k out of range at k={k}")
            c_min = min(c_min, ck)
            if np.abs(Mk - Mk.T).max() > tol:
                raise ValueError(f"M_{k} is not symmetric")
            w = np.linalg.eigvalsh(Mk)
            if w.min() < self.lam_lo - tol or w.max() > self.lam_hi + tol:
                raise ValueError(f"eigenvalues of M_{k} leave [{self.lam_lo}, {self.lam_hi}]")
            if prev is not None:
                Mp, ep = prev
                if np.linalg.eigvalsh(Mk - Mp / (1.0 + ep)).min() < -tol:
                    raise ValueError(f"metric decreases too fast at k={k}")
            prev = (Mk, ek)
            total += ek
        if not (c_min > 0 and math.isfinite(total)):
            raise ValueError("c_k not bounded away from zero or eta not summable")


@dataclass
class Step:
    x_next: Vec
    x_tilde: Vec
    d: Vec
    eps: float


def _mnorm2(v, Minv) -> float:
    return float(v @ Minv @ v)


def criterion_gap(c, M, x, x_tilde, d, eps, rho) -> float:
    """``lhs - rhs`` of the relative inexactness test (nonpositive when satisfied)."""
    Minv = np.linalg.inv(M)
    lhs = _mnorm2(c * M @ d + x_tilde - x, Minv) + 2.0 * c * eps
    return lhs - rho ** 2 * _mnorm2(x_tilde - x, Minv)


def exact_oracle(spec: MonotoneOperatorSpec, c, M, x, rho):
    z = spec.resolvent(c, M, x)
    return z, spec(z), 0.0


def perturbed_oracle(rng, scale: float = 1.0, max_halvings: int = 80):
    """Inexact oracle: random perturbation of the exact resolvent plus an eps-enlargement slack.

    The perturbation is halved until the relative test holds, so the triplet is
    admissible by construction.
    """

    def oracle(spec: MonotoneOperatorSpec, c, M, x, rho):
        z = spec.resolvent(c, M, x)
        if rho == 0 or np.linalg.norm(z - x) == 0:
            return z, spec(z), 0.0
        e = rng.standard_normal(spec.dim)
        r = spec.sym @ rng.standard_normal(spec.dim)
        t = scale * np.linalg.norm(z - x) / max(np.linalg.norm(e), 1e-300)
        for _ in range(max_halvings):
            xt = z + t * e
            rr = t * r / max(np.linalg.norm(r), 1e-300) * np.linalg.norm(z - x)
            d = spec(xt) - rr
            eps = spec.enlargement_eps(xt, d)
            if criterion_gap(c, M, x, xt, d, eps, rho) <= 0:
                return xt, d, eps
            t *= 0.5
        return z, spec(z), 0.0

    return oracle


def vhpe_step(spec, metric: MetricSequence, k: int, x, rho: float, oracle=exact_oracle) -> Step:
    c, M = metric.c(k), np.asarray(metric.M(k), float)
    xt, d, eps = oracle(spec, c, M, x, rho)
    if eps < 0:
        raise CriterionViolated("negative enlargement")
    if isinstance(spec, MonotoneOperatorSpec) and eps < spec.enlargement_eps(xt, d) - 1e-12:
        raise CriterionViolated("d is outside the claimed enlargement")
    gap = criterion_gap(c, M, x, xt, d, eps, rho)
    if gap > 1e-12 * (1.0 + np.dot(x, x)):
        raise CriterionViolated(f"relative test fails by {gap:.3e}")
    return Step(x - c * M @ d, xt, d, eps)


@dataclass
class Trajectory:
    x: list = field(default_factory=list)
    x_tilde: list = field(default_factory=list)
    d: list = field(default_factory=list)
    eps: list = field(default_factory=list)

    @property
    def step_norms(self) -> np.ndarray:
        """``||x_tilde^{k+1} - x^k||``."""
        return np.array([np.linalg.norm(t - x) for t, x in zip(self.x_tilde, self.x)])

    @property
    def d_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(d) for d in self.d])


def vhpe_solve(spec, metric: MetricSequence, x0, rho: float, iters: int, oracle=exact_oracle) -> Trajectory:
    tr = Trajectory([np.asarray(x0, float)])
    x = tr.x[0]
    for k in range(iters):
        st = vhpe_step(spec, metric, k, x, rho, oracle)
        tr.x_tilde.append(st.x_tilde)
        tr.d.append(st.d)
        tr.eps.append(st.eps)
        tr.x.append(st.x_next)
        x = st.x_next
    return tr


def metric_distances(tr: Trajectory, spec: MonotoneOperatorSpec, metric: MetricSequence, witness=None):
    """``dist_{M_k^{-1}}(x^k, zero set)`` along the trajectory."""
    return np.array([spec.dist(x, np.linalg.inv(metric.M(k)), witness) for k, x in enumerate(tr.x)])


def fejer_gap(tr: Trajectory, spec: MonotoneOperatorSpec, metric: MetricSequence, witness=None) -> np.ndarray:
    """``dist_{k+1}(x^{k+1}) - (1 + eta_k) dist_k(x^k)``; nonpositive up to roundoff."""
    dist = metric_distances(tr, spec, metric, witness)
    eta = np.array([metric.eta(k) for k in range(len(dist) - 1)])
    return dist[1:] - (1.0 + eta) * dist[:-1]


def rate_mu(rho: float, eta_k: float, kappa: float, lambda_lo: float, c_k: float) -> float:
    """Linear-rate factor under an error bound with constant ``kappa``."""
    if not 0 <= rho < 1:
        raise RateUndefined("rho must lie in [0, 1)")
    r = rho / (1.0 - rho)
    den = 1.0 - r
    if den <= 0:
        raise RateUndefined("rho >= 1/2 leaves no contraction")
    if math.isinf(c_k):
        tail = 0.0
    else:
        tail = (1.0 + r) * kappa / math.sqrt(kappa ** 2 + lambda_lo ** 2 * c_k ** 2)
    return (1.0 + eta_k) / den * (r + tail)


def contraction_ratios(tr, spec, metric, witness=None) -> np.ndarray:
    dist = metric_distances(tr, spec, metric, witness)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dist[:-1] > 0, dist[1:] / dist[:-1], 0.0)


# replay of proximal ALM iterates

@dataclass
class BridgeStep:
    k: int
    lhs: float
    rhs: float
    update_error: float
    subgradient_error: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs


def _plan_subgradient_error(pd, X, G) -> float:
    """Violation of ``G in d p(X)`` for the nonnegative group-quadratic term."""
    reg = pd.reg
    part = reg.partition
    x = X.ravel()
    g = G.ravel() - reg.lambda2 * x
    worst = 0.0
    for k in range(part.n_groups):
        idx = part.index[part.ptr[k]:part.ptr[k + 1]]
        xg, gg = x[idx], g[idx]
        nx = np.linalg.norm(xg)
        rad = reg.lambda1 * part.omega[k]
        if nx > 0:
            r = gg - rad * xg / nx
            on = xg > 0
            worst = max(worst, np.abs(r[on]).max(initial=0.0), np.maximum(r[~on], 0.0).max(initial=0.0))
        else:
            worst = max(worst, np.linalg.norm(np.maximum(gg, 0.0)) - rad)
    return float(worst)


def _cone_subgradient_error(kind, y, g) -> float:
    from .model import ConeKind

    if kind is ConeKind.ZERO:
        return float(np.abs(y).max(initial=0.0))
    # normal cone of the orthant at y: g <= 0 and g_i = 0 where y_i > 0
    return float(max(np.maximum(g, 0.0).max(initial=0.0), np.abs(g[y > 0]).max(initial=0.0),
                     np.maximum(-y, 0.0).max(initial=0.0)))


def replay_cipalm(pd, trace, rho: float):
    """Re-check every stored outer step as a VHPE step in the metric ``Diag(tau I, I)``.

    ``d`` is rebuilt from the operator at the tilde point, then the update identity,
    the relative test with zero enlargement and the subgradient inclusion are measured.
    """
    out = []
    for rec in trace:
        s, t = rec["sigma"], rec["tau"]
        dh, ph = rec["anchor_dual"], rec["anchor_primal"]
        dt, pt = rec["dual_tilde"], rec["primal_tilde"]
        dn, pn = rec["dual_next"], rec["primal_next"]
        AXB, r1, c1 = pd.forward(pt.X)
        cs = pd.constraints
        d_dual = pd.pack(AXB - cs.S, r1 + pt.y - pd.alpha, c1 + pt.z - pd.beta)
        d_X = (ph.X - pt.X) / s
        d_y = (ph.y - pt.y) / s
        d_z = (ph.z - pt.z) / s
        # x^{k+1} = x^k - sigma Lambda^{-1} d
        up = [pd.pack(dh.W, dh.u, dh.v) - (s / t) * d_dual - pd.pack(dn.W, dn.u, dn.v),
              ph.X - s * d_X - pn.X, ph.y - s * d_y - pn.y, ph.z - s * d_z - pn.z]
        upd = max(float(np.abs(u).max(initial=0.0)) for u in up)
        delta_d = pd.pack(dt.W - dh.W, dt.u - dh.u, dt.v - dh.v)
        delta_p = np.concatenate([(pt.X - ph.X).ravel(), pt.y - ph.y, pt.z - ph.z])
        vd = (s / t) * d_dual + delta_d
        vp = np.concatenate([(s * d_X).ravel(), s * d_y, s * d_z]) + delta_p
        lhs = t * float(vd @ vd) + float(vp @ vp)
        rhs = rho ** 2 * (t * float(delta_d @ delta_d) + float(delta_p @ delta_p))
        # primal parts of the operator: d_X in C - A*(w) + dp(X), d_y in -u + dp_r(y), ...
        K = pd.C - pd.adjoint(dt.W, dt.u, dt.v)
        sub = max(_plan_subgradient_error(pd, pt.X, d_X - K),
                  _cone_subgradient_error(cs.cone_r, pt.y, d_y + dt.u),
                  _cone_subgradient_error(cs.cone_c, pt.z, d_z + dt.v))
        out.append(BridgeStep(rec["k"], lhs, rhs, upd, sub))
    return out
