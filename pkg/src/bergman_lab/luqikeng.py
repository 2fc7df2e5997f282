"""Zero search for ellipsoid kernels and the convergence/covering experiments.

``K(z, w)`` depends on the pair only through ``t_k = z_k conj(w_k)``, and the
set of attainable moduli ``|t_k|`` is exactly ``{rho >= 0 : sum rho_k^m_k < 1}``
(take ``|z_k| = |w_k| = sqrt(rho_k)``; conversely
``(r_k s_k)^m <= (r_k^2m + s_k^2m) / 2``). The search therefore runs over
``2n`` real parameters (moduli and phases) instead of ``4n``.

A finite search cannot prove that a kernel has no zeros. ``ZeroFound`` is a
genuine certificate up to the stated error bound; ``PositiveOnSearch`` is
evidence only, over the searched region and the points visited.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .ellipsoid import EllipsoidSpec, check_point, defect, volume
from .kernel import (
    KernelSeries,
    build_series,
    eval_reinhardt,
    fast_value,
    polydisc_kernel_closed,
    tail_estimate,
)
from .transforms import check_bell_covering_law

__all__ = [
    "ModuliRegion",
    "achievable_moduli",
    "SearchConfig",
    "SearchReport",
    "ZERO_FOUND",
    "POSITIVE",
    "UNCERTIFIED",
    "zero_search",
    "search_series",
    "certifiable_delta",
    "doctored_disc_series",
    "doctored_disc_roots",
    "zero_transfer_experiment",
    "TransferReport",
    "ramadanov_experiment",
    "RamadanovRow",
]

log = logging.getLogger(__name__)

ZERO_FOUND = "ZeroFound"
POSITIVE = "PositiveOnSearch"
UNCERTIFIED = "Uncertified"


@dataclass(frozen=True)
class ModuliRegion:
    """``{rho in R^n_{>=0} : sum rho_k^m_k < level}``; ``level = 1`` is the
    full set of attainable ``|z_k conj(w_k)|``."""

    spec: EllipsoidSpec
    level: float = 1.0

    def value(self, rho) -> float:
        rho = np.abs(np.asarray(rho, dtype=float))
        return float(np.sum(rho**self.spec.m))

    def contains(self, rho) -> bool:
        rho = np.asarray(rho, dtype=float)
        return bool(np.all(rho >= 0) and self.value(rho) < self.level)

    __contains__ = contains

    def shrunk(self, delta: float) -> "ModuliRegion":
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        return ModuliRegion(self.spec, self.level * (1.0 - delta))

    def from_cube(self, u) -> np.ndarray:
        """Stick-breaking map from ``[0, 1]^n`` onto the closed region."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        w = np.empty_like(u)
        left = 1.0
        for k in range(len(u)):
            w[k] = left * u[k]
            left -= w[k]
        return (self.level * w) ** (1.0 / self.spec.m)

    def boundary_samples(self, resolution: int = 16) -> np.ndarray:
        """Lattice points of the simplex ``sum w = 1`` mapped to the outer boundary."""
        n = self.spec.dim
        pts = [
            np.array(c, dtype=float) / resolution
            for c in product(range(resolution + 1), repeat=n)
            if sum(c) == resolution
        ]
        return np.array([(self.level * w) ** (1.0 / self.spec.m) for w in pts])


def achievable_moduli(spec: EllipsoidSpec) -> ModuliRegion:
    return ModuliRegion(spec)


@dataclass(frozen=True)
class SearchConfig:
    cap: int = 60
    starts: int = 64
    seed: int = 0
    max_iters: int = 4000
    xatol: float = 1e-13
    fatol: float = 1e-32
    delta: Union[float, str] = 0.05
    zero_threshold: float = 1e-10
    tail_tolerance: float = 1e-6
    fix_angles: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")
        if self.delta != "auto" and not 0.0 < float(self.delta) < 1.0:
            raise ValueError("delta must lie in (0, 1) or be 'auto'")


@dataclass
class SearchReport:
    spec: str
    status: str
    min_abs: float
    argmin_t: list[complex]
    evaluations: int
    margin: float
    error_bound: float
    threshold: float
    delta: float
    best_start: int
    kernel_at_origin: float
    grid_certificate: Optional[dict] = None
    starts: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["argmin_t"] = [[float(c.real), float(c.imag)] for c in self.argmin_t]
        return d


def certifiable_delta(
    series: KernelSeries,
    tolerance: float = 1e-6,
    ladder: Sequence[float] = tuple(round(0.05 * k, 2) for k in range(1, 20)),
) -> Optional[float]:
    """Smallest ``delta`` on the ladder whose shrunk region has a valid tail
    bound below ``tolerance * K(0,0)`` along its outer boundary.

    Tail bounds grow with every ``rho_k``, so the boundary carries the worst
    case. ``None`` when no ladder value qualifies.
    """
    c0 = math.exp(series.log_coeffs[0])
    region = achievable_moduli(series.spec)
    for delta in ladder:
        ok = True
        for rho in region.shrunk(delta).boundary_samples():
            tail = tail_estimate(series, rho)
            if not (tail.valid and tail.bound <= tolerance * c0):
                ok = False
                break
        if ok:
            return float(delta)
    return None


def _fold(x: np.ndarray) -> np.ndarray:
    """Reflect real numbers into [0, 1] (triangle wave)."""
    y = np.mod(x, 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def _point(region: ModuliRegion, x: np.ndarray, n: int, fix_angles: bool) -> np.ndarray:
    rho = region.from_cube(_fold(x[:n]))
    theta = np.zeros(n) if fix_angles else x[n:]
    return rho * np.exp(1j * theta)


def _one_start(series, region, cfg, scale, start):
    n = series.spec.dim
    rng = np.random.default_rng([cfg.seed, start])
    x0 = rng.uniform(0.0, 1.0, n)
    if not cfg.fix_angles:
        x0 = np.concatenate([x0, rng.uniform(0.0, 2.0 * math.pi, n)])

    def objective(x):
        v = fast_value(series, _point(region, x, n, cfg.fix_angles)) / scale
        return v.real * v.real + v.imag * v.imag

    opts = dict(maxiter=cfg.max_iters, maxfev=2 * cfg.max_iters, xatol=cfg.xatol, fatol=cfg.fatol)
    res = minimize(objective, x0, method="Nelder-Mead", options=opts)
    nfev = res.nfev
    # one restart from the best vertex clears most premature simplex collapses
    res2 = minimize(objective, res.x, method="Nelder-Mead", options=opts)
    nfev += res2.nfev
    best = res2.x if res2.fun <= res.fun else res.x
    t = _point(region, best, n, cfg.fix_angles)
    ev = eval_reinhardt(series, t)
    return abs(ev.value), t, ev, nfev


def search_series(series: KernelSeries, cfg: SearchConfig) -> SearchReport:
    """Multistart simplex search for the minimum of ``|F(t)|`` on the shrunk
    moduli region of ``series.spec``."""
    spec = series.spec
    c0 = math.exp(series.log_coeffs[0]) * float(series.signs[0] or 1.0)
    scale = abs(c0)
    if cfg.delta == "auto":
        delta = certifiable_delta(series, cfg.tail_tolerance)
        certify = delta is not None
        delta = 0.95 if delta is None else delta
    else:
        delta, certify = float(cfg.delta), True
    region = achievable_moduli(spec).shrunk(delta)

    starts = range(cfg.starts)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda s: _one_start(series, region, cfg, scale, s), starts))
    else:
        results = [_one_start(series, region, cfg, scale, s) for s in starts]

    best_start = min(range(len(results)), key=lambda i: (results[i][0], i))
    min_abs, t, ev, _ = results[best_start]
    evaluations = int(sum(r[3] for r in results))

    err = ev.error_bound
    threshold = cfg.zero_threshold * scale
    if not (certify and ev.valid):
        status, margin = UNCERTIFIED, float("nan")
    elif min_abs < threshold and threshold > err:
        # distance below the threshold after allowing for evaluation error
        status, margin = ZERO_FOUND, threshold - min_abs - err
    elif min_abs - err > 0:
        status, margin = POSITIVE, min_abs - err
    else:
        status, margin = UNCERTIFIED, min_abs - err
    log.info("search %s: %s min|K|=%.3e err=%.3e", spec.label(), status, min_abs, err)
    return SearchReport(
        spec=spec.label(),
        status=status,
        min_abs=float(min_abs),
        argmin_t=[complex(c) for c in t],
        evaluations=evaluations,
        margin=float(margin),
        error_bound=float(err),
        threshold=float(threshold),
        delta=float(delta),
        best_start=int(best_start),
        kernel_at_origin=float(c0),
        starts=cfg.starts,
    )


def zero_search(spec: EllipsoidSpec, cfg: SearchConfig = SearchConfig()) -> SearchReport:
    return search_series(build_series(spec, cfg.cap), cfg)


def doctored_disc_series(cap: int = 60) -> KernelSeries:
    """Disc kernel coefficients ``(k+1)/pi`` with the degree-1 sign flipped.

    Its sum is ``((1 - t)^-2 - 4 t) / pi``, which vanishes where
    ``4 t^3 - 8 t^2 + 4 t - 1 = 0``; two of those roots lie in the unit disc.
    """
    base = build_series(EllipsoidSpec((1.0,)), cap)
    coeffs = np.exp(base.log_coeffs)
    coeffs[1] = -coeffs[1]
    return base.with_coefficients(coeffs)


def doctored_disc_roots() -> np.ndarray:
    """Roots of the doctored series inside the unit disc (closed form)."""
    roots = np.roots([4.0, -8.0, 4.0, -1.0])
    return roots[np.abs(roots) < 1.0]


@dataclass
class TransferReport:
    m: tuple[float, ...]
    j: int
    upstairs: SearchReport
    downstairs: SearchReport
    covering_residual: float
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "m": list(self.m),
            "j": self.j,
            "upstairs": self.upstairs.to_dict(),
            "downstairs": self.downstairs.to_dict(),
            "covering_residual": self.covering_residual,
            "consistent": self.consistent,
        }


def _pair_for(t: Sequence[complex], nudge: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """A pair ``(z, w)`` with ``z_k conj(w_k) = t_k`` and ``|z_k| = |w_k|``;
    zero coordinates are pushed to ``nudge`` to stay off branch points."""
    t = np.asarray(t, dtype=complex)
    rho = np.maximum(np.abs(t), nudge)
    theta = np.angle(t)
    z = np.sqrt(rho).astype(complex)
    w = np.sqrt(rho) * np.exp(-1j * theta)
    return z, w


def zero_transfer_experiment(
    m: Sequence[float],
    j: int,
    cfg: SearchConfig = SearchConfig(),
    tol: float = 1e-6,
) -> TransferReport:
    """Search on the cover ``Omega_{j m}`` and on ``Omega_m``, then check the
    covering identity at the downstairs minimiser's preimages."""
    base = EllipsoidSpec(tuple(m))
    j = int(j)
    if j < 1:
        raise ValueError("j must be a positive integer")
    down = zero_search(base, cfg)
    if j == 1:
        return TransferReport(base.exponents, 1, down, down, 0.0, True)
    up = zero_search(base.scaled(j), cfg)

    z, w = _pair_for(down.argmin_t)
    # keep the pair strictly inside the target after nudging
    scale = 1.0
    while defect(base, z * scale) >= 1.0 or defect(base, w * scale) >= 1.0:
        scale *= 0.999
    z, w = z * scale, w * scale
    z_up = z ** (1.0 / j)
    check = check_bell_covering_law(j, base, z_up, w, caps=(j * cfg.cap, cfg.cap))
    consistent = check.residual <= tol and not (
        up.status == POSITIVE and down.status == ZERO_FOUND
    )
    return TransferReport(base.exponents, j, up, down, check.residual, bool(consistent))


@dataclass(frozen=True)
class RamadanovRow:
    j: int
    point: tuple[complex, ...]
    value: float
    limit: float
    abs_diff: float
    rel_diff: float
    tail_bound: float


def ramadanov_experiment(
    m: Sequence[float],
    j_list: Sequence[int],
    test_points: Sequence,
    cap: int = 60,
) -> list[RamadanovRow]:
    """Diagonal kernel values of ``Omega_{j m}`` against the bidisc limit.

    Rows are ordered by increasing ``j``, then by test point.
    """
    base = EllipsoidSpec(tuple(m))
    if base.dim != 2:
        raise ValueError("the convergence experiment is set up in dimension 2")
    js = sorted(int(j) for j in j_list)
    if not js or js[0] < 1:
        raise ValueError("j values must be positive integers")
    points = [check_point(base, p) for p in test_points]
    for j in js:
        spec = base.scaled(j)
        for p in points:
            if defect(spec, p) >= 1.0:
                raise ValueError(f"test point {p} is outside Omega_(j*m) for j={j}")
    rows = []
    for j in js:
        series = build_series(base.scaled(j), cap)
        for p in points:
            ev = eval_reinhardt(series, p * np.conj(p))
            limit = polydisc_kernel_closed(p, p).real
            diff = abs(ev.value.real - limit)
            rows.append(
                RamadanovRow(j, tuple(complex(c) for c in p), ev.value.real, limit, diff, diff / limit, ev.tail_bound)
            )
    return rows
