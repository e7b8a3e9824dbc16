"""JSON instance files.

Fields: ``m, n, cost`` (row-major, m*n doubles), ``alpha, beta``, ``constraint``
(``type`` plus the data that type needs), optional ``groups`` (lists of 0-based
``[i, j]`` pairs) and ``omega``, ``lambda1, lambda2``. An optional ``meta`` object
carries generator details (family, seed, support points, labels).
Floats are written with Python's shortest round-trip representation.
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import InstanceFormatError, OTPalmError
from .model import (ConeKind, GroupPartition, Preset, ProblemData, Regularizer, build_classical,
                    build_custom, build_martingale, build_partial)


def _tolist(a):
    return np.asarray(a, float).tolist()


def _meta_to_json(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        if isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, (np.integer, np.floating)):
            out[k] = v.item()
        elif isinstance(v, (str, int, float, bool, list)) or v is None:
            out[k] = v
    return out


def to_dict(pd: ProblemData) -> dict:
    cs = pd.constraints
    doc = dict(m=pd.m, n=pd.n, cost=_tolist(pd.C.ravel()), alpha=_tolist(pd.alpha), beta=_tolist(pd.beta))
    if cs.preset is Preset.CLASSICAL:
        con = dict(type="classical")
    elif cs.preset is Preset.PARTIAL:
        con = dict(type="partial", s=float(cs.S[0, 0]))
    elif cs.preset is Preset.MARTINGALE:
        P = cs.S / np.where(pd.alpha[:, None] > 0, pd.alpha[:, None], 1.0)
        P = np.asarray(pd.meta.get("P", P), float)
        con = dict(type="martingale", P=P.tolist(), Q=_tolist(cs.B))
    else:
        con = dict(type="custom", A=_tolist(cs.A), B=_tolist(cs.B), S=_tolist(cs.S),
                   cone_r=cs.cone_r.value, cone_c=cs.cone_c.value)
    doc["constraint"] = con
    part = pd.reg.partition
    if not part.is_singletons:
        doc["groups"] = [p.tolist() for p in part.groups()]
    if not part.is_singletons or np.any(part.omega != 1.0):
        doc["omega"] = _tolist(part.omega)
    doc["lambda1"] = float(pd.reg.lambda1)
    doc["lambda2"] = float(pd.reg.lambda2)
    meta = _meta_to_json(pd.meta)
    if meta:
        doc["meta"] = meta
    return doc


def dumps(pd: ProblemData) -> str:
    return json.dumps(to_dict(pd), separators=(",", ":"))


def write_instance(pd: ProblemData, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(pd))
        fh.write("\n")


def _arr(doc, key, shape=None):
    if key not in doc:
        raise InstanceFormatError(f"missing field '{key}'")
    try:
        a = np.asarray(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"field '{key}' is not numeric") from exc
    if shape is not None:
        try:
            a = a.reshape(shape)
        except ValueError as exc:
            raise InstanceFormatError(f"field '{key}' has {a.size} entries, expected shape {shape}") from exc
    return a


def from_dict(doc: dict) -> ProblemData:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance must be a JSON object")
    try:
        m, n = int(doc["m"]), int(doc["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError("fields 'm' and 'n' must be integers") from exc
    if m < 1 or n < 1:
        raise InstanceFormatError("m and n must be positive")
    C = _arr(doc, "cost", (m, n))
    alpha = _arr(doc, "alpha", (m,))
    beta = _arr(doc, "beta", (n,))
    l1 = float(doc.get("lambda1", 0.0))
    l2 = float(doc.get("lambda2", 0.0))
    omega = doc.get("omega")
    if "groups" in doc:
        part = GroupPartition.from_pairs(doc["groups"], m, n, None if omega is None else np.asarray(omega, float))
    else:
        part = GroupPartition.singletons(m, n, None if omega is None else np.asarray(omega, float))
    reg = Regularizer(l1, l2, part)
    meta = dict(doc.get("meta") or {})
    for k in ("P", "Q", "labels"):
        if k in meta:
            meta[k] = np.asarray(meta[k])
    con = doc.get("constraint", {"type": "classical"})
    kind = con.get("type") if isinstance(con, dict) else None
    if kind == "classical":
        return build_classical(C, alpha, beta, reg, meta)
    if kind == "partial":
        if "s" not in con:
            raise InstanceFormatError("partial constraint needs 's'")
        return build_partial(C, alpha, beta, float(con["s"]), reg, meta)
    if kind == "martingale":
        P = _arr(con, "P").reshape(m, -1)
        Q = _arr(con, "Q").reshape(n, -1)
        return build_martingale(C, alpha, beta, P, Q, reg, meta)
    if kind == "custom":
        try:
            cr = ConeKind(con.get("cone_r", "zero"))
            cc = ConeKind(con.get("cone_c", "zero"))
        except ValueError as exc:
            raise InstanceFormatError("cone must be 'zero' or 'nonneg'") from exc
        A = _arr(con, "A")
        B = _arr(con, "B")
        A = A.reshape(-1, m) if A.size else np.zeros((0, m))
        B = B.reshape(n, -1) if B.size else np.zeros((n, 0))
        S = _arr(con, "S", (A.shape[0], B.shape[1]))
        return build_custom(C, alpha, beta, A, B, S, cr, cc, reg, meta)
    raise InstanceFormatError(f"unknown constraint type {kind!r}")


def loads(text: str) -> ProblemData:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON: {exc}") from exc
    try:
        return from_dict(doc)
    except InstanceFormatError:
        raise
    except (OTPalmError, ValueError, TypeError, KeyError) as exc:
        raise InstanceFormatError(str(exc)) from exc


def read_instance(path) -> ProblemData:
    with open(path) as fh:
        return loads(fh.read())


def digest(pd: ProblemData) -> str:
    """Short content hash used as an instance id."""
    return hashlib.sha256(dumps(pd).encode()).hexdigest()[:12]
