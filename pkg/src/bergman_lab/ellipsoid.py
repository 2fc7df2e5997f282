"""Generalized complex ellipsoids and their monomial moments.

The domain with exponent vector ``m`` is

    {z in C^n : |z_1|^(2 m_1) + ... + |z_n|^(2 m_n) < 1}.

Monomials are orthogonal on it, and the squared norm of ``z^alpha`` has the
closed form (polar coordinates, then ``s_k = r_k^(2 m_k)`` turns the radial
integral into a Dirichlet integral over the simplex)

    ||z^alpha||^2 = pi^n / prod(m_k) * prod Gamma((alpha_k + 1) / m_k)
                    / Gamma(1 + sum (alpha_k + 1) / m_k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "EllipsoidSpec",
    "check_point",
    "check_index",
    "defect",
    "log_moment",
    "log_moments",
    "moment",
    "volume",
    "enumerate_indices",
    "index_array",
    "count_indices",
    "ball",
    "polydisc_limit_volume",
]


@dataclass(frozen=True)
class EllipsoidSpec:
    """A generalized complex ellipsoid given by its exponent vector.

    Integer exponents give the classical domains; ``(1, ..., 1)`` is the unit
    ball. Positive non-integer exponents are accepted for exploratory runs.
    """

    exponents: tuple[float, ...]

    def __post_init__(self):
        exps = tuple(float(e) for e in self.exponents)
        if len(exps) == 0:
            raise ValueError("an ellipsoid needs at least one exponent")
        for e in exps:
            if not (math.isfinite(e) and e > 0):
                raise ValueError(f"exponents must be positive and finite, got {e!r}")
        object.__setattr__(self, "exponents", exps)

    @property
    def dim(self) -> int:
        return len(self.exponents)

    @property
    def m(self) -> np.ndarray:
        return np.asarray(self.exponents, dtype=float)

    @property
    def is_ball(self) -> bool:
        return all(e == 1.0 for e in self.exponents)

    @property
    def is_integral(self) -> bool:
        return all(float(e).is_integer() for e in self.exponents)

    def scaled(self, j: int) -> "EllipsoidSpec":
        """The ellipsoid with every exponent multiplied by ``j``."""
        return EllipsoidSpec(tuple(j * e for e in self.exponents))

    def permuted(self, perm: Sequence[int]) -> "EllipsoidSpec":
        return EllipsoidSpec(tuple(self.exponents[p] for p in perm))

    def label(self) -> str:
        return ",".join(_fmt_exponent(e) for e in self.exponents)

    @classmethod
    def parse(cls, text: str) -> "EllipsoidSpec":
        """Parse a comma separated exponent list such as ``"1,2"``."""
        parts = [p.strip() for p in str(text).split(",") if p.strip()]
        if not parts:
            raise ValueError(f"cannot parse exponent list {text!r}")
        return cls(tuple(float(p) for p in parts))

    def __contains__(self, z) -> bool:
        return defect(self, z) < 1.0


def _fmt_exponent(e: float) -> str:
    return str(int(e)) if float(e).is_integer() else repr(float(e))


def ball(n: int) -> EllipsoidSpec:
    return EllipsoidSpec((1.0,) * n)


def check_point(spec: EllipsoidSpec, z) -> np.ndarray:
    """Coerce ``z`` to a complex vector of the spec's dimension."""
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != spec.dim:
        raise ValueError(
            f"point has {arr.shape[-1]} coordinates, domain dimension is {spec.dim}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite coordinates")
    return arr


def check_index(spec: EllipsoidSpec, alpha) -> tuple[int, ...]:
    a = tuple(int(v) for v in np.atleast_1d(alpha))
    if len(a) != spec.dim:
        raise ValueError(f"multi-index {a} has length {len(a)}, expected {spec.dim}")
    if any(v < 0 for v in a):
        raise ValueError(f"multi-index entries must be non-negative, got {a}")
    return a


def defect(spec: EllipsoidSpec, z) -> float | np.ndarray:
    """``sum_k |z_k|^(2 m_k)``; the point is inside iff this is below 1.

    Works on a single point or on an array of points (last axis = coords).
    """
    arr = check_point(spec, z)
    val = np.sum(np.abs(arr) ** (2.0 * spec.m), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def log_moment(spec: EllipsoidSpec, alpha) -> float:
    """Log of ``int_Omega |z^alpha|^2 dV``, computed in log scale."""
    a = np.asarray(check_index(spec, alpha), dtype=float)
    m = spec.m
    shape = (a + 1.0) / m
    return float(
        spec.dim * math.log(math.pi)
        - np.sum(np.log(m))
        + sum(math.lgamma(x) for x in shape)
        - math.lgamma(1.0 + float(np.sum(shape)))
    )


def log_moments(spec: EllipsoidSpec, alphas: np.ndarray) -> np.ndarray:
    """Vectorized :func:`log_moment` over an ``(N, n)`` integer array."""
    alphas = np.asarray(alphas)
    if alphas.ndim != 2 or alphas.shape[1] != spec.dim:
        raise ValueError(f"expected an (N, {spec.dim}) index array")
    shape = (alphas + 1.0) / spec.m
    return (
        spec.dim * math.log(math.pi)
        - float(np.sum(np.log(spec.m)))
        + np.sum(gammaln(shape), axis=1)
        - gammaln(1.0 + np.sum(shape, axis=1))
    )


def moment(spec: EllipsoidSpec, alpha) -> float:
    return math.exp(log_moment(spec, alpha))


def volume(spec: EllipsoidSpec) -> float:
    return math.exp(log_moment(spec, (0,) * spec.dim))


def polydisc_limit_volume(n: int) -> float:
    """Volume of the unit polydisc, the limit of the ellipsoids as m -> inf."""
    return math.pi**n


def count_indices(n: int, cap: int) -> int:
    return math.comb(cap + n, n)


def enumerate_indices(spec_or_dim: EllipsoidSpec | int, cap: int) -> list[tuple[int, ...]]:
    """All multi-indices with total degree <= cap, in graded-lex order.

    Degrees ascend; within one degree the tuples ascend lexicographically,
    e.g. ``(0, 2), (1, 1), (2, 0)``.
    """
    n = spec_or_dim.dim if isinstance(spec_or_dim, EllipsoidSpec) else int(spec_or_dim)
    if cap < 0:
        raise ValueError("cap must be non-negative")
    out: list[tuple[int, ...]] = []
    for d in range(cap + 1):
        out.extend(sorted(_indices_of_degree(n, d)))
    return out


def _indices_of_degree(n: int, d: int) -> Iterable[tuple[int, ...]]:
    for combo in combinations_with_replacement(range(n), d):
        alpha = [0] * n
        for k in combo:
            alpha[k] += 1
        yield tuple(alpha)


def index_array(spec_or_dim: EllipsoidSpec | int, cap: int) -> np.ndarray:
    """:func:`enumerate_indices` as an ``(N, n)`` int64 array."""
    n = spec_or_dim.dim if isinstance(spec_or_dim, EllipsoidSpec) else int(spec_or_dim)
    idx = enumerate_indices(n, cap)
    return np.array(idx, dtype=np.int64).reshape(len(idx), n)
