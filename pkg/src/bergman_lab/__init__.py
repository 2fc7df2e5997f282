"""Numerical laboratory for Bergman kernels of generalized complex ellipsoids."""

__version__ = "0.1.0"

from .ellipsoid import (  # noqa: E402
    EllipsoidSpec,
    ball,
    defect,
    enumerate_indices,
    log_moment,
    moment,
    volume,
)
from .kernel import (  # noqa: E402
    EvalResult,
    KernelSeries,
    SeriesBudgetError,
    ball_kernel_closed,
    build_series,
    eval_kernel,
    eval_reinhardt,
    pick_cap,
    polydisc_kernel_closed,
    tail_estimate,
)

__all__ = [
    "EllipsoidSpec",
    "ball",
    "defect",
    "enumerate_indices",
    "log_moment",
    "moment",
    "volume",
    "EvalResult",
    "KernelSeries",
    "SeriesBudgetError",
    "ball_kernel_closed",
    "build_series",
    "eval_kernel",
    "eval_reinhardt",
    "pick_cap",
    "polydisc_kernel_closed",
    "tail_estimate",
]
