import numpy as np
from hypothesis import given, settings, strategies as st

from otpalm import kernels
from otpalm.model import GroupPartition


def _part(rng, m, n):
    return GroupPartition.column_classes(rng.integers(0, 3, m), n)


def test_group_prox_matches_per_group_formula(backend, rng):
    part = _part(rng, 6, 5)
    x = rng.standard_normal(30)
    zeta = rng.uniform(0, 1, part.n_groups)
    out = np.empty(30)
    wn = np.empty(part.n_groups)
    backend.group_prox(x, part.index, part.ptr, 0.5, zeta, out, wn)
    for g in range(part.n_groups):
        idx = part.index[part.ptr[g]:part.ptr[g + 1]]
        w = 0.5 * np.maximum(x[idx], 0)
        nrm = np.linalg.norm(w)
        assert wn[g] == np.float64(nrm) or abs(wn[g] - nrm) < 1e-15
        want = np.zeros_like(w) if nrm <= zeta[g] else (1 - zeta[g] / nrm) * w
        np.testing.assert_allclose(out[idx], want, atol=1e-15)


def test_rank1_apply_and_sq_norms(backend, rng):
    part = _part(rng, 5, 4)
    y = rng.standard_normal(20)
    what = rng.random(20)
    coef = rng.random(part.n_groups)
    out = np.zeros(20)
    backend.group_rank1_apply(y, part.index, part.ptr, what, coef, out)
    sq = np.empty(part.n_groups)
    backend.group_sq_norms(y, part.index, part.ptr, sq)
    for g in range(part.n_groups):
        idx = part.index[part.ptr[g]:part.ptr[g + 1]]
        np.testing.assert_allclose(out[idx], coef[g] * what[idx] * (what[idx] @ y[idx]), atol=1e-14)
        assert sq[g] == np.float64(y[idx] @ y[idx]) or abs(sq[g] - y[idx] @ y[idx]) < 1e-14


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_backends_agree(m, n, seed, scale):
    rng = np.random.default_rng(seed)
    part = _part(rng, m, n)
    x = rng.standard_normal(m * n)
    zeta = rng.uniform(0, 1, part.n_groups)
    res = []
    for be in [kernels.python_backend] + ([kernels.compiled_backend] if kernels.compiled_backend else []):
        out = np.empty(m * n)
        wn = np.empty(part.n_groups)
        be.group_prox(x, part.index, part.ptr, scale, zeta, out, wn)
        res.append((out, wn))
    for out, wn in res[1:]:
        np.testing.assert_allclose(out, res[0][0], atol=1e-14)
        np.testing.assert_allclose(wn, res[0][1], atol=1e-14)


def test_selected_backend_is_reported():
    assert kernels.BACKEND in ("python", "cython")
    if kernels.compiled_backend is None:
        assert kernels.BACKEND == "python"
