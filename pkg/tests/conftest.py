from contextlib import contextmanager

import numpy as np
import pytest

from otpalm import kernels
from otpalm.model import GroupPartition, Regularizer, build_classical

BACKENDS = [kernels.python_backend] + ([kernels.compiled_backend] if kernels.compiled_backend else [])


@pytest.fixture(params=BACKENDS, ids=lambda b: b.__name__.rsplit(".", 1)[-1])
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tiny_lp(m=2, n=2, C=None, alpha=None, beta=None):
    C = np.array([[0.0, 1.0], [1.0, 0.0]]) if C is None else np.asarray(C, float)
    m, n = C.shape
    alpha = np.full(m, 1.0 / m) if alpha is None else alpha
    beta = np.full(n, 1.0 / n) if beta is None else beta
    return build_classical(C, alpha, beta)


def random_reg_instance(rng, m, n, lambda1=1.0, lambda2=1.0, n_labels=2):
    C = rng.uniform(0.0, 1.0, (m, n))
    alpha = rng.uniform(0.2, 1.0, m)
    beta = rng.uniform(0.2, 1.0, n)
    alpha /= alpha.sum()
    beta /= beta.sum()
    labels = rng.integers(0, n_labels, m)
    part = GroupPartition.column_classes(labels, n)
    return build_classical(C, alpha, beta, Regularizer(lambda1, lambda2, part))


# acceptance bookkeeping: one PASS/FAIL line per criterion at the end of the run
ACCEPTANCE: dict = {}


@contextmanager
def criterion(num: int, title: str):
    info = {"detail": ""}
    try:
        yield info
    except BaseException:
        ACCEPTANCE[num] = (False, title, info["detail"])
        raise
    ACCEPTANCE[num] = (True, title, info["detail"])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        tr.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
