"""Backend selection for the grouped kernels.

The compiled core is used when it was built; set ``OTPALM_KERNELS=python`` to
force the numpy fallback.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
try:
    from . import _kernels_c as compiled_backend
except ImportError:
    pass

if compiled_backend is not None and os.environ.get("OTPALM_KERNELS", "").lower() != "python":
    backend = compiled_backend
    BACKEND = "cython"
else:
    backend = python_backend
    BACKEND = "python"

group_prox = backend.group_prox
group_rank1_apply = backend.group_rank1_apply
group_sq_norms = backend.group_sq_norms
