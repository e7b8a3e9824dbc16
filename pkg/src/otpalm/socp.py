"""Second-order cone reformulation written as a line-based text file.

Variables are laid out as ``[vec(X) (m*n), r, s, t_1..t_|G|]``; ``r, s`` exist only
when ``lambda2 > 0`` and ``t`` only when ``lambda1 > 0``. The problem is

    min  <C, X> + lambda1 <omega, t> + lambda2 s
    s.t. lb <= rows(x) <= ub,  X >= 0,  r = 1,
         (r, s, vec X) in QR   (2 r s >= ||X||^2, r, s >= 0),
         (t_G, x_G) in Q       (t_G >= ||x_G||).

File layout::

    SOCP 1
    VARS <total> X <mn> R <0|1> S <0|1> T <|G|>
    OBJ <nnz>
    <index> <coef>
    ROWS <count>
    <lb> <ub> <nnz> <index> <coef> ...
    BOUNDS <count>
    <index> <lb> <ub>
    CONES <count>
    QR <dim> <index> ...
    Q <dim> <index> ...
    END
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceFormatError
from .model import ConeKind, ProblemData


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


@dataclass
class SocpProblem:
    n_vars: int
    blocks: dict
    c: np.ndarray
    rows: list = field(default_factory=list)  # (lb, ub, idx, coef)
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    cones: list = field(default_factory=list)  # (kind, idx)

    def objective(self, x) -> float:
        return float(np.dot(self.c, x))

    def violation(self, x) -> float:
        """Largest violation of rows, bounds and cones at ``x``."""
        x = np.asarray(x, float)
        worst = 0.0
        for lb, ub, idx, coef in self.rows:
            v = float(np.dot(coef, x[idx]))
            worst = max(worst, lb - v, v - ub)
        worst = max(worst, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        for kind, idx in self.cones:
            z = x[idx]
            if kind == "QR":
                worst = max(worst, float(z[2:] @ z[2:]) - 2.0 * z[0] * z[1], -z[0], -z[1])
            else:
                worst = max(worst, float(np.linalg.norm(z[1:])) - z[0])
        return worst


def build_socp(pd: ProblemData) -> SocpProblem:
    m, n = pd.m, pd.n
    mn = m * n
    cs = pd.constraints
    reg = pd.reg
    part = reg.partition
    has_q = reg.lambda2 > 0
    has_t = reg.lambda1 > 0
    nr = 1 if has_q else 0
    nt = part.n_groups if has_t else 0
    off_r, off_s, off_t = mn, mn + nr, mn + 2 * nr
    total = mn + 2 * nr + nt
    blocks = dict(X=mn, R=nr, S=nr, T=nt)
    c = np.zeros(total)
    c[:mn] = pd.C.ravel()
    if has_q:
        c[off_s] = reg.lambda2
    if has_t:
        c[off_t:off_t + nt] = reg.lambda1 * part.omega
    rows = []
    cols = np.arange(mn).reshape(m, n)
    for p in range(cs.A.shape[0]):
        for q in range(cs.B.shape[1]):
            coef = np.outer(cs.A[p], cs.B[:, q]).ravel()
            nz = np.flatnonzero(coef)
            rows.append((float(cs.S[p, q]), float(cs.S[p, q]), nz, coef[nz]))
    for i in range(m):
        lo = pd.alpha[i] if cs.cone_r is ConeKind.ZERO else -math.inf
        rows.append((float(lo), float(pd.alpha[i]), cols[i], np.ones(n)))
    for j in range(n):
        lo = pd.beta[j] if cs.cone_c is ConeKind.ZERO else -math.inf
        rows.append((float(lo), float(pd.beta[j]), cols[:, j], np.ones(m)))
    if has_q:
        rows.append((1.0, 1.0, np.array([off_r]), np.ones(1)))
    lb = np.full(total, -math.inf)
    ub = np.full(total, math.inf)
    lb[:mn] = 0.0
    cones = []
    if has_q:
        cones.append(("QR", np.concatenate([[off_r, off_s], np.arange(mn)])))
    if has_t:
        for g in range(nt):
            cones.append(("Q", np.concatenate([[off_t + g], part.index[part.ptr[g]:part.ptr[g + 1]]])))
    return SocpProblem(total, blocks, c, rows, lb, ub, cones)


def dumps(sp: SocpProblem) -> str:
    out = ["SOCP 1"]
    b = sp.blocks
    out.append(f"VARS {sp.n_vars} X {b['X']} R {b['R']} S {b['S']} T {b['T']}")
    nz = np.flatnonzero(sp.c)
    out.append(f"OBJ {nz.size}")
    out.extend(f"{i} {_fmt(sp.c[i])}" for i in nz)
    out.append(f"ROWS {len(sp.rows)}")
    for lb, ub, idx, coef in sp.rows:
        terms = " ".join(f"{int(i)} {_fmt(v)}" for i, v in zip(idx, coef))
        out.append(f"{_fmt(lb)} {_fmt(ub)} {len(idx)} {terms}".rstrip())
    bnd = [i for i in range(sp.n_vars) if not (sp.lb[i] == -math.inf and sp.ub[i] == math.inf)]
    out.append(f"BOUNDS {len(bnd)}")
    out.extend(f"{i} {_fmt(sp.lb[i])} {_fmt(sp.ub[i])}" for i in bnd)
    out.append(f"CONES {len(sp.cones)}")
    for kind, idx in sp.cones:
        out.append(f"{kind} {len(idx)} " + " ".join(str(int(i)) for i in idx))
    out.append("END")
    return "\n".join(out) + "\n"


def write_socp(pd: ProblemData, path) -> SocpProblem:
    sp = build_socp(pd)
    with open(path, "w") as fh:
        fh.write(dumps(sp))
    return sp


def loads(text: str) -> SocpProblem:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    it = iter(lines)

    def expect(tag):
        try:
            parts = next(it).split()
        except StopIteration as exc:
            raise InstanceFormatError(f"unexpected end of file, wanted {tag}") from exc
        if parts[0] != tag:
            raise InstanceFormatError(f"expected {tag}, found {parts[0]}")
        return parts

    try:
        expect("SOCP")
        v = expect("VARS")
        total = int(v[1])
        blocks = {v[i]: int(v[i + 1]) for i in range(2, len(v), 2)}
        c = np.zeros(total)
        for _ in range(int(expect("OBJ")[1])):
            i, val = next(it).split()
            c[int(i)] = float(val)
        rows = []
        for _ in range(int(expect("ROWS")[1])):
            p = next(it).split()
            k = int(p[2])
            idx = np.array([int(p[3 + 2 * j]) for j in range(k)], dtype=np.int64)
            coef = np.array([float(p[4 + 2 * j]) for j in range(k)])
            rows.append((float(p[0]), float(p[1]), idx, coef))
        lb = np.full(total, -math.inf)
        ub = np.full(total, math.inf)
        for _ in range(int(expect("BOUNDS")[1])):
            i, lo, hi = next(it).split()
            lb[int(i)], ub[int(i)] = float(lo), float(hi)
        cones = []
        for _ in range(int(expect("CONES")[1])):
            p = next(it).split()
            if p[0] not in ("QR", "Q"):
                raise InstanceFormatError(f"unknown cone {p[0]}")
            idx = np.array([int(x) for x in p[2:]], dtype=np.int64)
            if idx.size != int(p[1]):
                raise InstanceFormatError("cone dimension does not match its index list")
            cones.append((p[0], idx))
        expect("END")
    except (ValueError, IndexError, StopIteration) as exc:
        raise InstanceFormatError(f"malformed SOCP file: {exc}") from exc
    return SocpProblem(total, blocks, c, rows, lb, ub, cones)


def read_socp(path) -> SocpProblem:
    with open(path) as fh:
        return loads(fh.read())


def lift(pd: ProblemData, X) -> np.ndarray:
    """SOCP point for a plan: ``r = 1``, ``s = ||X||^2 / 2``, ``t_G = ||x_G||``."""
    X = np.asarray(X, float)
    reg = pd.reg
    parts = [X.ravel()]
    if reg.lambda2 > 0:
        parts.append(np.array([1.0, 0.5 * float(np.vdot(X, X))]))
    if reg.lambda1 > 0:
        parts.append(reg.partition.norms(X))
    return np.concatenate(parts)
