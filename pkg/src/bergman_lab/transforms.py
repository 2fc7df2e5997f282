"""Explicit holomorphic maps between ellipsoids and kernel-identity checkers.

Maps act on the last axis of complex arrays, so a single point ``(n,)`` and
a batch ``(..., n)`` are handled alike by the private ``_apply``/``_det``
methods; the public :meth:`HoloMap.apply` validates a single point.
"""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .ellipsoid import EllipsoidSpec, ball, check_point, defect
from .kernel import (
    KernelSeries,
    ball_kernel_closed,
    build_series,
    eval_kernel,
)

__all__ = [
    "HoloMap",
    "Rotation",
    "Permutation",
    "BallAutomorphism",
    "PowerMap",
    "Composition",
    "BranchPointError",
    "apply",
    "jacobian_det",
    "local_inverses",
    "closed_form_kernel",
    "check_biholomorphic_law",
    "check_bell_covering_law",
    "CoveringCheck",
    "rotation_invariance_residual",
]

Kernel = Union[KernelSeries, Callable[[np.ndarray, np.ndarray], complex]]


class BranchPointError(ValueError):
    """A power-map branch was requested at a point with a zero coordinate."""


class HoloMap:
    """Base class: a holomorphic map ``source -> target``."""

    source: EllipsoidSpec
    target: EllipsoidSpec
    biholomorphic: bool = True

    def _apply(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _det(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "HoloMap":
        raise TypeError(f"{type(self).__name__} has no global inverse")

    def descriptor(self) -> str:
        raise NotImplementedError

    def apply(self, z) -> np.ndarray:
        z = check_point(self.source, z)
        if np.any(np.atleast_1d(defect(self.source, z)) >= 1.0):
            raise ValueError(f"{z} is not inside the source domain {self.source.label()}")
        out = self._apply(z)
        assert np.all(np.atleast_1d(defect(self.target, out)) < 1.0), "image left the target"
        return out

    def jacobian_det(self, z) -> complex:
        z = check_point(self.source, z)
        return complex(self._det(z))

    def __call__(self, z) -> np.ndarray:
        return self.apply(z)

    def then(self, other: "HoloMap") -> "Composition":
        """``other o self``."""
        return Composition((self, other))


@dataclass(frozen=True)
class Rotation(HoloMap):
    spec: EllipsoidSpec
    angles: tuple[float, ...]

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles)
        if len(angles) != self.spec.dim:
            raise ValueError("one angle per coordinate is required")
        object.__setattr__(self, "angles", angles)

    @property
    def source(self):
        return self.spec

    @property
    def target(self):
        return self.spec

    def _phases(self):
        return np.exp(1j * np.asarray(self.angles))

    def _apply(self, z):
        return z * self._phases()

    def _det(self, z):
        return np.broadcast_to(np.prod(self._phases()), np.shape(z)[:-1])[()]

    def inverse(self):
        return Rotation(self.spec, tuple(-a for a in self.angles))

    def descriptor(self):
        return "rotation(" + ";".join(f"{a:.17g}" for a in self.angles) + ")"


@dataclass(frozen=True)
class Permutation(HoloMap):
    """``(z_1, ..., z_n) -> (z_perm[0], ..., z_perm[n-1])``."""

    spec: EllipsoidSpec
    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(self.spec.dim)):
            raise ValueError(f"{perm} is not a permutation of 0..{self.spec.dim - 1}")
        object.__setattr__(self, "perm", perm)

    @property
    def source(self):
        return self.spec

    @property
    def target(self):
        return self.spec.permuted(self.perm)

    @property
    def sign(self) -> int:
        perm, sign = list(self.perm), 1
        for i in range(len(perm)):
            while perm[i] != i:
                k = perm[i]
                perm[i], perm[k] = perm[k], perm[i]
                sign = -sign
        return sign

    def _apply(self, z):
        return z[..., list(self.perm)]

    def _det(self, z):
        return np.broadcast_to(complex(self.sign), np.shape(z)[:-1])[()]

    def inverse(self):
        return Permutation(self.target, tuple(int(i) for i in np.argsort(self.perm)))

    def descriptor(self):
        return "permutation(" + ";".join(map(str, self.perm)) + ")"


@dataclass(frozen=True)
class BallAutomorphism(HoloMap):
    """Automorphism of the unit ball sending 0 to ``a``.

    ``T_a(z) = (a + P_a z + s_a Q_a z) / (1 + <z, a>)`` where ``P_a`` projects
    onto ``a``, ``Q_a = I - P_a`` and ``s_a = sqrt(1 - |a|^2)``. ``T_0`` is
    the identity and ``T_a^{-1} = T_{-a}``.
    """

    center: tuple[complex, ...]

    def __post_init__(self):
        a = tuple(complex(c) for c in self.center)
        if not a:
            raise ValueError("center must be non-empty")
        if sum(abs(c) ** 2 for c in a) >= 1.0:
            raise ValueError("ball automorphism center must satisfy |a| < 1")
        object.__setattr__(self, "center", a)

    @property
    def source(self):
        return ball(len(self.center))

    @property
    def target(self):
        return self.source

    def _apply(self, z):
        a = np.asarray(self.center)
        a2 = float(np.sum(np.abs(a) ** 2))
        za = np.sum(z * np.conj(a), axis=-1)[..., None]
        if a2 == 0.0:
            return np.array(z, dtype=complex)
        pz = za / a2 * a
        s = math.sqrt(1.0 - a2)
        return (a + pz + s * (z - pz)) / (1.0 + za)

    def _det(self, z):
        a = np.asarray(self.center)
        n = len(a)
        a2 = float(np.sum(np.abs(a) ** 2))
        za = np.sum(z * np.conj(a), axis=-1)
        return (1.0 - a2) ** ((n + 1) / 2) / (1.0 + za) ** (n + 1)

    def inverse(self):
        return BallAutomorphism(tuple(-c for c in self.center))

    def descriptor(self):
        return "ball_automorphism(" + ";".join(_fmt_complex(c) for c in self.center) + ")"


@dataclass(frozen=True)
class PowerMap(HoloMap):
    """``z -> (z_1^j, ..., z_n^j)``, a proper j^n-sheeted map onto ``target``."""

    j: int
    base: EllipsoidSpec
    biholomorphic = False

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 1:
            raise ValueError("power map exponent must be a positive integer")
        object.__setattr__(self, "j", int(self.j))

    @property
    def source(self):
        return self.base.scaled(self.j)

    @property
    def target(self):
        return self.base

    @property
    def biholomorphic(self) -> bool:  # noqa: F811
        return self.j == 1

    def _apply(self, z):
        return z**self.j

    def _det(self, z):
        n = np.shape(z)[-1]
        return self.j**n * np.prod(z ** (self.j - 1), axis=-1)

    def inverse(self):
        if self.j == 1:
            return self
        return super().inverse()

    def descriptor(self):
        return f"power({self.j})"

    def local_inverses(self, W) -> list[tuple[np.ndarray, complex]]:
        return local_inverses(self, W)


@dataclass(frozen=True)
class Composition(HoloMap):
    """Maps applied left to right: ``maps[-1] o ... o maps[0]``."""

    maps: tuple[HoloMap, ...]

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("empty composition")
        for f, g in zip(maps, maps[1:]):
            if f.target != g.source:
                raise ValueError(
                    f"{f.descriptor()} lands in {f.target.label()} but "
                    f"{g.descriptor()} starts from {g.source.label()}"
                )
        object.__setattr__(self, "maps", maps)

    @property
    def source(self):
        return self.maps[0].source

    @property
    def target(self):
        return self.maps[-1].target

    @property
    def biholomorphic(self) -> bool:  # noqa: F811
        return all(f.biholomorphic for f in self.maps)

    def _apply(self, z):
        for f in self.maps:
            z = f._apply(z)
        return z

    def _det(self, z):
        det = 1.0 + 0j
        for f in self.maps:
            det = det * f._det(z)
            z = f._apply(z)
        return det

    def inverse(self):
        return Composition(tuple(f.inverse() for f in reversed(self.maps)))

    def descriptor(self):
        return " then ".join(f.descriptor() for f in self.maps)


def _fmt_complex(c: complex) -> str:
    return f"{c.real:.17g}{c.imag:+.17g}j"


def apply(map: HoloMap, z) -> np.ndarray:
    return map.apply(z)


def jacobian_det(map: HoloMap, z) -> complex:
    return map.jacobian_det(z)


def local_inverses(map: PowerMap, W) -> list[tuple[np.ndarray, complex]]:
    """All ``j^n`` local inverses of the power map at ``W``.

    Branch ``(a_1, ..., a_n)`` sends ``W`` to ``(omega^a_k W_k^(1/j))_k`` with
    the principal root and ``omega = exp(2 pi i / j)``; the second entry is
    the Jacobian determinant of that branch at ``W``. Branches come in
    ``itertools.product`` order of the root indices.
    """
    W = check_point(map.target, W)
    if np.any(W == 0):
        raise BranchPointError(f"W={W} has a zero coordinate (branch point)")
    j = map.j
    roots = W ** (1.0 / j)
    omega = cmath.exp(2j * math.pi / j)
    out = []
    for choice in itertools.product(range(j), repeat=len(W)):
        rot = np.array([omega**a for a in choice])
        pre = rot * roots
        inv = complex(np.prod(rot / (j * roots ** (j - 1))))
        out.append((pre, inv))
    return out


def closed_form_kernel(spec: EllipsoidSpec) -> Optional[Callable[[np.ndarray, np.ndarray], complex]]:
    """Closed-form kernel when one exists: the disc (any exponent) and the ball."""
    if spec.dim == 1:
        return lambda z, w: ball_kernel_closed(z, w, 1)
    if spec.is_ball:
        n = spec.dim
        return lambda z, w: ball_kernel_closed(z, w, n)
    return None


def _evaluate(K: Kernel, z, w) -> tuple[complex, float]:
    if isinstance(K, KernelSeries):
        r = eval_kernel(K, z, w)
        return r.value, r.error_bound
    return complex(K(np.asarray(z), np.asarray(w))), 0.0


def check_biholomorphic_law(map: HoloMap, K1: Kernel, K2: Kernel, pairs) -> float:
    """Max relative residual of ``K1(z,w) = J(z) K2(F z, F w) conj(J(w))``.

    ``K1`` is the source kernel and ``K2`` the target kernel; each may be a
    :class:`KernelSeries` or a callable ``(z, w) -> complex``.
    """
    if not map.biholomorphic:
        raise ValueError(f"{map.descriptor()} is not a biholomorphism")
    worst = 0.0
    for z, w in pairs:
        lhs, _ = _evaluate(K1, z, w)
        fz, fw = map.apply(z), map.apply(w)
        k2, _ = _evaluate(K2, fz, fw)
        jz, jw = map.jacobian_det(z), map.jacobian_det(w)
        rhs = jz * k2 * np.conj(jw)
        res = abs(lhs - rhs) / abs(lhs) if lhs != 0 else abs(rhs)
        worst = max(worst, float(res))
    return worst


class CoveringCheck(NamedTuple):
    residual: float
    lhs: complex
    rhs: complex
    lhs_tail: float
    rhs_tail: float
    caps: tuple[int, int]


def check_bell_covering_law(
    j: int,
    target_spec: EllipsoidSpec,
    z,
    W,
    caps: Sequence[int] = (60, 60),
    closed_forms: bool = True,
    source_kernel: Optional[Kernel] = None,
    target_kernel: Optional[Kernel] = None,
) -> CoveringCheck:
    """Residual of the covering identity for ``F = PowerMap(j)``::

        K_target(F z, W) J_F(z) = sum_branches K_source(z, b(W)) conj(J_b(W))

    ``caps = (source cap, target cap)``. Closed forms replace the series
    where available unless ``closed_forms`` is False; explicit kernels win
    over both.
    """
    fmap = PowerMap(j, target_spec)
    src, tgt = fmap.source, fmap.target
    caps = (int(caps[0]), int(caps[1]))
    if source_kernel is None:
        source_kernel = (closed_forms and closed_form_kernel(src)) or build_series(src, caps[0])
    if target_kernel is None:
        target_kernel = (closed_forms and closed_form_kernel(tgt)) or build_series(tgt, caps[1])

    z = check_point(src, z)
    W = check_point(tgt, W)
    if defect(tgt, W) >= 1.0:
        raise ValueError("W is not inside the target domain")
    branches = local_inverses(fmap, W)

    fz = fmap.apply(z)
    det = fmap.jacobian_det(z)
    k2, e2 = _evaluate(target_kernel, fz, W)
    lhs = k2 * det
    lhs_tail = e2 * abs(det)

    rhs, rhs_tail = 0j, 0.0
    for pre, inv in branches:
        k1, e1 = _evaluate(source_kernel, z, pre)
        rhs += k1 * np.conj(inv)
        rhs_tail += e1 * abs(inv)
    # relative to |lhs|; the tail bounds are reported, not folded in, so an
    # invalid bound cannot mask a discrepancy
    residual = abs(lhs - rhs) / abs(lhs) if lhs != 0 else abs(rhs)
    return CoveringCheck(float(residual), complex(lhs), complex(rhs), lhs_tail, rhs_tail, caps)


def rotation_invariance_residual(series: KernelSeries, z, w, angles) -> float:
    """Relative change of ``K(z, w)`` when both points get the same rotation."""
    rot = Rotation(series.spec, tuple(angles))
    k0 = eval_kernel(series, z, w).value
    k1 = eval_kernel(series, rot.apply(z), rot.apply(w)).value
    return abs(k1 - k0) / abs(k0)
