"""Group-quadratic regularized optimal transport via a corrected inexact proximal ALM."""
from .admm import AdmmConfig, warm_start
from .auglag import ALParams, kkt_residuals
from .cipalm import (AbsoluteA, AbsoluteAB, AbsoluteB, Relative, Schedules, SolverConfig,
                     SolveReport, Status, snipal_policy, solve)
from .kernels import BACKEND as KERNEL_BACKEND
from .model import (ConeKind, DualPoint, GroupPartition, PrimalPoint, ProblemData, Regularizer,
                    build_classical, build_custom, build_martingale, build_partial,
                    dual_objective, primal_objective, validate)
from .ssn import SsnConfig

__version__ = "0.1.0"
