"""Pure numpy versions of the grouped kernels (same signatures as the compiled core)."""
import numpy as np


def _segment_sum(vals, ptr):
    if ptr.size <= 1:
        return np.zeros(0)
    return np.add.reduceat(vals, ptr[:-1]) if vals.size else np.zeros(ptr.size - 1)


def group_prox(x, index, ptr, inv_scale, zeta, out, wnorm):
    xp = np.maximum(x[index], 0.0)
    nrm = np.sqrt(_segment_sum(xp * xp, ptr)) * inv_scale
    wnorm[:] = nrm
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(nrm > zeta, (1.0 - zeta / nrm) * inv_scale, 0.0)
    out[index] = xp * np.repeat(f, np.diff(ptr))


def group_rank1_apply(y, index, ptr, what, coef, out):
    w = what[index]
    s = _segment_sum(w * y[index], ptr) * coef
    out[index] += w * np.repeat(s, np.diff(ptr))


def group_sq_norms(x, index, ptr, out):
    v = x[index]
    out[:] = _segment_sum(v * v, ptr)
