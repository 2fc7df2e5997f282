"""Bergman kernels of generalized ellipsoids as truncated Reinhardt series.

Monomials are orthogonal on a Reinhardt domain, so

    K(z, w) = sum_alpha c_alpha z^alpha conj(w)^alpha,   c_alpha = 1 / ||z^alpha||^2,

and the kernel depends on the pair only through ``t_k = z_k conj(w_k)``.
Coefficients are stored as logs; terms are formed as
``exp(log c + alpha . log|t|) * exp(i alpha . arg t)`` so nothing overflows at
high degree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .ellipsoid import (
    EllipsoidSpec,
    check_point,
    count_indices,
    defect,
    index_array,
    log_moments,
    volume,
)

__all__ = [
    "SeriesBudgetError",
    "KernelSeries",
    "EvalResult",
    "TailEstimate",
    "MAX_SERIES_TERMS",
    "build_series",
    "eval_reinhardt",
    "eval_kernel",
    "tail_estimate",
    "pick_cap",
    "ball_kernel_closed",
    "polydisc_kernel_closed",
    "disc_kernel_closed",
]

MAX_SERIES_TERMS = 5_000_000


class SeriesBudgetError(MemoryError):
    """Raised when a coefficient table would exceed the configured budget."""


@dataclass(frozen=True, eq=False)
class KernelSeries:
    """Truncated kernel series; immutable once built.

    ``alphas`` holds every multi-index of degree <= ``cap`` in graded-lex
    order and ``log_coeffs[i]`` is ``log |c_alpha|``. ``signs`` is all ones
    for a genuine Bergman kernel; other values only appear in hand-built
    validation series.
    """

    spec: EllipsoidSpec
    cap: int
    alphas: np.ndarray
    log_coeffs: np.ndarray
    signs: np.ndarray
    layer_starts: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.alphas, self.log_coeffs, self.signs, self.layer_starts):
            arr.setflags(write=False)

    @property
    def n_terms(self) -> int:
        return len(self.log_coeffs)

    @property
    def degrees(self) -> np.ndarray:
        return self.alphas.sum(axis=1)

    def coefficient(self, alpha) -> float:
        alpha = tuple(int(a) for a in alpha)
        d = sum(alpha)
        if d > self.cap:
            raise KeyError(alpha)
        lo, hi = self.layer_starts[d], self.layer_starts[d + 1]
        for i in range(lo, hi):
            if tuple(self.alphas[i]) == alpha:
                return float(self.signs[i] * math.exp(self.log_coeffs[i]))
        raise KeyError(alpha)

    def with_coefficients(self, coeffs) -> "KernelSeries":
        """A series on the same index set with arbitrary real coefficients."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != self.log_coeffs.shape:
            raise ValueError("coefficient vector does not match the index set")
        with np.errstate(divide="ignore"):
            logc = np.log(np.abs(coeffs))
        return KernelSeries(
            self.spec,
            self.cap,
            self.alphas,
            logc,
            np.sign(coeffs),
            self.layer_starts,
        )

    def __call__(self, z, w) -> complex:
        return eval_kernel(self, z, w).value


class EvalResult(NamedTuple):
    value: complex
    tail_bound: float
    valid: bool
    abs_sum: float = 0.0

    @property
    def error_bound(self) -> float:
        """Tail bound plus a generous rounding allowance."""
        return self.tail_bound + 64 * np.finfo(float).eps * self.abs_sum


class TailEstimate(NamedTuple):
    bound: float
    ratio: float
    valid: bool


def build_series(spec: EllipsoidSpec, cap: int, max_terms: Optional[int] = None) -> KernelSeries:
    """Coefficients ``1/||z^alpha||^2`` for every ``|alpha| <= cap``."""
    cap = int(cap)
    if cap < 0:
        raise ValueError("cap must be non-negative")
    budget = MAX_SERIES_TERMS if max_terms is None else int(max_terms)
    size = count_indices(spec.dim, cap)
    if size > budget:
        raise SeriesBudgetError(
            f"cap={cap} needs {size} coefficients in dimension {spec.dim}; budget is {budget}"
        )
    alphas = index_array(spec, cap)
    logc = -log_moments(spec, alphas)
    starts = np.array([count_indices(spec.dim, d - 1) if d > 0 else 0 for d in range(cap + 2)])
    return KernelSeries(spec, cap, alphas, logc, np.ones(len(logc)), starts)


def _log_abs_terms(series: KernelSeries, rho: np.ndarray) -> np.ndarray:
    """``log |c_alpha| + alpha . log rho`` with ``0 * log 0`` taken as 0."""
    out = series.log_coeffs.copy()
    for k in range(series.spec.dim):
        ak = series.alphas[:, k]
        if rho[k] > 0:
            out += ak * math.log(rho[k])
        else:
            out[ak > 0] = -np.inf
    return out


def _terms(series: KernelSeries, t: np.ndarray) -> np.ndarray:
    rho = np.abs(t)
    phase = series.alphas @ np.angle(t)
    mag = np.exp(_log_abs_terms(series, rho))
    return series.signs * mag * np.exp(1j * phase)


def _layer_sums(series: KernelSeries, values: np.ndarray) -> list[float]:
    s = series.layer_starts
    return [math.fsum(values[s[d]:s[d + 1]]) for d in range(series.cap + 1)]


def tail_estimate(series: KernelSeries, rho) -> TailEstimate:
    """Geometric bound on ``sum_{|alpha| > cap} |c_alpha| rho^alpha``.

    The growth factor ``r`` is the largest ratio of consecutive layer sums
    over the last three degree layers; the omitted tail is then bounded by
    ``L_cap * r / (1 - r)``. This is a ratio-test certificate: it is sound
    when layer ratios are non-increasing past the cap, which holds for the
    ellipsoid kernels. ``r >= 1`` yields ``valid=False`` and an infinite bound.
    """
    rho = np.abs(np.asarray(rho, dtype=float)).reshape(-1)
    if rho.shape[0] != series.spec.dim:
        raise ValueError("rho has the wrong dimension")
    if not np.any(rho > 0):
        return TailEstimate(0.0, 0.0, True)
    layers = _layer_sums(series, np.exp(_log_abs_terms(series, rho)))
    cap = series.cap
    if cap < 1:
        return TailEstimate(math.inf, math.inf, False)
    ratios = []
    for d in range(max(1, cap - 2), cap + 1):
        if layers[d - 1] <= 0.0:
            if layers[d] > 0.0:
                return TailEstimate(math.inf, math.inf, False)
            continue
        ratios.append(layers[d] / layers[d - 1])
    if not ratios:
        return TailEstimate(0.0, 0.0, True)
    r = max(ratios)
    if r >= 1.0:
        return TailEstimate(math.inf, r, False)
    return TailEstimate(layers[cap] * r / (1.0 - r), r, True)


def in_moduli_region(spec: EllipsoidSpec, rho) -> bool:
    rho = np.abs(np.asarray(rho, dtype=float))
    return float(np.sum(rho ** spec.m)) < 1.0


def eval_reinhardt(series: KernelSeries, t) -> EvalResult:
    """Sum the series at ``t`` (``t_k = z_k conj(w_k)``).

    Terms are added per degree layer with :func:`math.fsum` and the layers
    combined the same way, so the result does not depend on how the caller
    chunks work. ``valid`` is False outside the achievable-moduli region or
    when no tail certificate is available.
    """
    t = check_point(series.spec, t)
    terms = _terms(series, t)
    re = _layer_sums(series, terms.real)
    im = _layer_sums(series, terms.imag)
    value = complex(math.fsum(re), math.fsum(im))
    tail = tail_estimate(series, np.abs(t))
    inside = in_moduli_region(series.spec, np.abs(t))
    return EvalResult(
        value=value,
        tail_bound=tail.bound,
        valid=bool(inside and tail.valid),
        abs_sum=float(np.sum(np.abs(terms))),
    )


def eval_kernel(series: KernelSeries, z, w) -> EvalResult:
    z = check_point(series.spec, z)
    w = check_point(series.spec, w)
    for name, p in (("z", z), ("w", w)):
        if defect(series.spec, p) >= 1.0:
            raise ValueError(f"{name}={p} is not inside the domain")
    return eval_reinhardt(series, z * np.conj(w))


def fast_value(series: KernelSeries, t: np.ndarray) -> complex:
    """Plain numpy sum of the series; used inside optimisation loops."""
    return complex(np.sum(_terms(series, np.asarray(t, dtype=complex))))


def pick_cap(
    spec: EllipsoidSpec,
    rho,
    tol: float,
    start: int = 8,
    max_terms: Optional[int] = None,
) -> KernelSeries:
    """Double the cap until the tail bound at ``rho`` is below ``tol``.

    Raises :class:`SeriesBudgetError` once the next doubling would exceed
    the coefficient budget.
    """
    cap = max(int(start), 1)
    while True:
        series = build_series(spec, cap, max_terms=max_terms)
        tail = tail_estimate(series, rho)
        if tail.valid and tail.bound <= tol:
            return series
        cap *= 2


def ball_kernel_closed(z, w, n: Optional[int] = None) -> complex:
    """``n!/pi^n (1 - <z, w>)^-(n+1)`` for the unit ball of C^n."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    n = len(z) if n is None else n
    if len(z) != n or len(w) != n:
        raise ValueError("point dimension does not match n")
    ip = complex(np.sum(z * np.conj(w)))
    if abs(ip) >= 1.0:
        raise ValueError(f"|<z, w>| = {abs(ip)} >= 1; the closed form is singular or divergent")
    return math.factorial(n) / math.pi**n * (1.0 - ip) ** (-(n + 1))


def disc_kernel_closed(z, w) -> complex:
    return ball_kernel_closed(z, w, 1)


def polydisc_kernel_closed(z, w) -> complex:
    """Product of disc kernels ``(1/pi) (1 - z_k conj(w_k))^-2``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if z.shape != w.shape:
        raise ValueError("z and w must have the same dimension")
    t = z * np.conj(w)
    if np.any(np.abs(t) >= 1.0):
        raise ValueError("some factor z_k conj(w_k) has modulus >= 1")
    out = 1.0 + 0j
    for tk in t:
        out *= (1.0 / math.pi) * (1.0 - tk) ** (-2)
    return complex(out)


def kernel_at_origin(spec: EllipsoidSpec) -> float:
    return 1.0 / volume(spec)
