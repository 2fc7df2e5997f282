"""Bergman projection on ellipsoids by quadrature.

Radial integration is iterated over coordinates. For coordinate ``i`` the
remaining budget is ``b = 1 - r_i^(2 m_i)`` and the inner coordinates are
scaled by ``b^(1/(2 m_k))``, so the inner integrand of every monomial is a
polynomial and Gauss-Legendre is exact there. The outer interval is split at
``r_i^(2 m_i) = 1/2``; on the upper piece ``b = v^q`` with ``q`` the lcm of the
inner exponents, which turns the endpoint factor ``b^gamma`` into a polynomial
in ``v``. Angles use the equispaced rule, and angular moments are read off
an FFT per radial node.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .ellipsoid import (
    EllipsoidSpec,
    check_point,
    defect,
    index_array,
    log_moments,
)
from .transforms import HoloMap

__all__ = [
    "QuadratureGrid",
    "default_resolution",
    "TestFunction",
    "Constant",
    "Monomial",
    "AntiHolomorphicMonomial",
    "RadialBump",
    "Product",
    "Pullback",
    "SeriesFunction",
    "ProjectedFunction",
    "integrate",
    "inner",
    "project",
    "idempotence_check",
    "continuation_radius_proxy",
    "ContinuationEstimate",
    "bell_projection_identity_check",
    "sample_points",
]

_CHUNK = 32


def default_resolution(n: int) -> tuple[int, int]:
    """(radial nodes per coordinate, angular nodes per coordinate)."""
    return {1: (64, 64), 2: (48, 64)}.get(n, (16, 24))


def _gauss(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return a + (x + 1.0) * (b - a) / 2.0, w * (b - a) / 2.0


def _split_power(exponents: Sequence[float]) -> int:
    if all(float(e).is_integer() for e in exponents):
        return reduce(math.lcm, (int(e) for e in exponents), 1)
    return 8


def _radial_rule(m: np.ndarray, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(N, n)`` and weights for ``int f(r) prod r_k dr_k`` over
    ``sum r_k^(2 m_k) < 1``."""
    if len(m) == 1:
        r, w = _gauss(nodes, 0.0, 1.0)
        return r[:, None], w * r

    inner_r, inner_w = _radial_rule(m[1:], nodes)
    mi = float(m[0])
    half = max(nodes // 2, 1)
    c = 0.5 ** (1.0 / (2.0 * mi))
    # lower piece: r in [0, c]
    r_lo, w_lo = _gauss(half, 0.0, c)
    w_lo = w_lo * r_lo
    # upper piece: b = 1 - r^(2m) = v^q, v in [0, (1/2)^(1/q)]
    q = _split_power(m[1:])
    v, wv = _gauss(nodes - half, 0.0, 0.5 ** (1.0 / q))
    r_hi = (1.0 - v**q) ** (1.0 / (2.0 * mi))
    w_hi = wv * (q / (2.0 * mi)) * v ** (q - 1) * (1.0 - v**q) ** (1.0 / mi - 1.0)

    outer_r = np.concatenate([r_lo, r_hi])
    outer_w = np.concatenate([w_lo, w_hi])
    budget = 1.0 - outer_r ** (2.0 * mi)

    scale = budget[:, None] ** (1.0 / (2.0 * m[1:]))[None, :]
    jac = np.prod(budget[:, None] ** (1.0 / m[1:])[None, :], axis=1)
    R = np.concatenate(
        [
            np.repeat(outer_r, len(inner_r))[:, None],
            (scale[:, None, :] * inner_r[None, :, :]).reshape(-1, len(m) - 1),
        ],
        axis=1,
    )
    W = (outer_w * jac)[:, None] * inner_w[None, :]
    return R, W.reshape(-1)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor rule on an ellipsoid: iterated Gauss radial nodes times
    equispaced angles. Weights include the ``prod r_k`` Jacobian and the
    ``(2 pi / Q)^n`` angular factor."""

    spec: EllipsoidSpec
    radial: int
    angular: int
    radii: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    support: float = 1.0

    @classmethod
    def build(
        cls,
        spec: EllipsoidSpec,
        radial: Optional[int] = None,
        angular: Optional[int] = None,
        support: float = 1.0,
    ) -> "QuadratureGrid":
        """``support < 1`` restricts the rule to ``{defect < support}``; only
        valid for integrands that vanish outside that set."""
        dr, da = default_resolution(spec.dim)
        radial = dr if radial is None else int(radial)
        angular = da if angular is None else int(angular)
        if radial < 2 or angular < 1:
            raise ValueError("grid needs at least 2 radial and 1 angular node")
        if not 0.0 < support <= 1.0:
            raise ValueError("support must lie in (0, 1]")
        R, W = _radial_rule(spec.m, radial)
        if support < 1.0:
            R = R * support ** (1.0 / (2.0 * spec.m))
            W = W * support ** float(np.sum(1.0 / spec.m))
        W = W * (2.0 * math.pi / angular) ** spec.dim
        R.setflags(write=False)
        W.setflags(write=False)
        return cls(spec, radial, angular, R, W, float(support))

    @classmethod
    def for_function(cls, g, spec: EllipsoidSpec, radial=None, angular=None) -> "QuadratureGrid":
        """Grid fitted to ``g``: a radial bump, bare or pulled back by a map
        that preserves the defect, gets a support-matched rule."""
        return cls.build(spec, radial, angular, _support_of(g))

    def refined(self) -> "QuadratureGrid":
        return QuadratureGrid.build(self.spec, 2 * self.radial, 2 * self.angular, self.support)

    @property
    def n_nodes(self) -> int:
        return len(self.weights) * self.angular**self.spec.dim

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights) * self.angular**self.spec.dim

    def phases(self) -> np.ndarray:
        """``(Q^n, n)`` unit phases, C-order over the angle tensor."""
        n, Q = self.spec.dim, self.angular
        theta = 2.0 * math.pi * np.arange(Q) / Q
        mesh = np.meshgrid(*([theta] * n), indexing="ij")
        return np.exp(1j * np.stack([g.reshape(-1) for g in mesh], axis=1))

    def chunk_points(self, start: int, stop: int) -> np.ndarray:
        """Points ``(stop - start, Q^n, n)`` for a block of radial nodes."""
        return self.radii[start:stop, None, :] * self.phases()[None, :, :]

    def chunks(self) -> list[tuple[int, int]]:
        N = len(self.weights)
        return [(s, min(s + _CHUNK, N)) for s in range(0, N, _CHUNK)]


class TestFunction:
    """A function on the domain, evaluated on point arrays ``(..., n)``."""

    __test__ = False  # keep pytest from collecting this class

    def evaluate(self, Z: np.ndarray, spec: EllipsoidSpec) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, Z, spec: EllipsoidSpec) -> np.ndarray:
        return self.evaluate(np.asarray(Z, dtype=complex), spec)


@dataclass(frozen=True)
class Constant(TestFunction):
    value: complex = 1.0

    def evaluate(self, Z, spec):
        return np.full(Z.shape[:-1], complex(self.value))


@dataclass(frozen=True)
class Monomial(TestFunction):
    alpha: tuple[int, ...]

    def evaluate(self, Z, spec):
        return np.prod(Z ** np.asarray(self.alpha), axis=-1)


@dataclass(frozen=True)
class AntiHolomorphicMonomial(TestFunction):
    alpha: tuple[int, ...]

    def evaluate(self, Z, spec):
        return np.prod(np.conj(Z) ** np.asarray(self.alpha), axis=-1)


@dataclass(frozen=True)
class RadialBump(TestFunction):
    """``exp(-1 / (1 - (s / radius)^2))`` for ``s < radius``, else 0, where
    ``s = sum |z_k|^(2 m_k)`` is the defect of the domain it is used on."""

    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius < 1.0:
            raise ValueError("bump support radius must lie in (0, 1)")

    def evaluate(self, Z, spec):
        s = np.sum(np.abs(Z) ** (2.0 * spec.m), axis=-1) / self.radius
        out = np.zeros(s.shape, dtype=complex)
        inside = s < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
        return out


@dataclass(frozen=True)
class Product(TestFunction):
    factors: tuple[TestFunction, ...]

    def evaluate(self, Z, spec):
        out = np.ones(Z.shape[:-1], dtype=complex)
        for f in self.factors:
            out = out * f.evaluate(Z, spec)
        return out


@dataclass(frozen=True)
class Pullback(TestFunction):
    """``z -> J_F(z) g(F(z))`` (or ``g(F(z))`` with ``jacobian=False``)."""

    g: TestFunction
    map: HoloMap
    jacobian: bool = True

    def evaluate(self, Z, spec):
        FZ = self.map._apply(Z)
        out = self.g.evaluate(FZ, self.map.target)
        if self.jacobian:
            out = out * self.map._det(Z)
        return out


def _support_of(g) -> float:
    from .transforms import Permutation, Rotation

    while isinstance(g, Pullback) and isinstance(g.map, (Rotation, Permutation)):
        g = g.g
    return g.radius if isinstance(g, RadialBump) else 1.0


@dataclass(frozen=True, eq=False)
class SeriesFunction(TestFunction):
    """A truncated monomial series treated as an ordinary function."""

    pf: "ProjectedFunction"

    def evaluate(self, Z, spec):
        return self.pf.evaluate_many(Z)

    def grid_values(self, grid, a, b):
        return self.pf.grid_values(grid, a, b)


@dataclass(frozen=True, eq=False)
class ProjectedFunction:
    """Monomial expansion ``sum_alpha coeffs[i] z^alpha`` of a projection."""

    spec: EllipsoidSpec
    cap: int
    alphas: np.ndarray
    coeffs: np.ndarray
    grid: tuple[int, int] = (0, 0)
    stable: Optional[bool] = None
    max_refinement_change: Optional[float] = None

    def coefficient(self, alpha) -> complex:
        alpha = np.asarray(alpha)
        hit = np.nonzero(np.all(self.alphas == alpha, axis=1))[0]
        if len(hit) == 0:
            raise KeyError(tuple(alpha))
        return complex(self.coeffs[hit[0]])

    def evaluate_many(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=complex)
        flat = Z.reshape(-1, self.spec.dim)
        out = np.empty(flat.shape[0], dtype=complex)
        for s in range(0, flat.shape[0], 4096):
            block = flat[s : s + 4096]
            mon = np.ones((block.shape[0], len(self.coeffs)), dtype=complex)
            for k in range(self.spec.dim):
                mon *= _power_table(block[:, k], self.cap)[:, self.alphas[:, k]]
            out[s : s + 4096] = mon @ self.coeffs
        return out.reshape(Z.shape[:-1])

    def grid_values(self, grid: "QuadratureGrid", a: int, b: int) -> np.ndarray:
        """Values on radial nodes ``a:b`` times all angles, via inverse FFT."""
        n, Q = self.spec.dim, grid.angular
        if self.cap >= Q:
            return self.evaluate_many(grid.chunk_points(a, b))
        spec_arr = np.zeros((b - a,) + (Q,) * n, dtype=complex)
        ralpha = np.prod(grid.radii[a:b, None, :] ** self.alphas[None, :, :], axis=2)
        spec_arr[(slice(None),) + tuple(self.alphas.T)] = ralpha * self.coeffs[None, :]
        vals = np.fft.ifftn(spec_arr, axes=tuple(range(1, n + 1))) * Q**n
        return vals.reshape(b - a, -1)

    def __call__(self, z) -> complex:
        z = check_point(self.spec, z)
        return complex(self.evaluate_many(z[None, :])[0])

    def rows(self) -> list[list]:
        return [
            [*map(int, a), float(c.real), float(c.imag)]
            for a, c in zip(self.alphas, self.coeffs)
        ]

    def header(self) -> list[str]:
        return [f"alpha_{k + 1}" for k in range(self.spec.dim)] + ["coeff_real", "coeff_imag"]


def _power_table(x: np.ndarray, cap: int) -> np.ndarray:
    """Columns ``x^0 .. x^cap`` by repeated multiplication."""
    out = np.empty((len(x), cap + 1), dtype=complex)
    out[:, 0] = 1.0
    for p in range(1, cap + 1):
        out[:, p] = out[:, p - 1] * x
    return out


def _map_chunks(grid: QuadratureGrid, work: Callable[[int, int], np.ndarray], threads: int):
    chunks = grid.chunks()
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: work(*c), chunks))
    else:
        parts = [work(*c) for c in chunks]
    # fixed chunking and a fixed-order reduction keep the result independent of threads
    return np.sum(np.stack(parts), axis=0)


def integrate(grid: QuadratureGrid, f, threads: int = 1) -> complex:
    """``int_Omega f dV``; ``f`` is a :class:`TestFunction` or a callable on
    point arrays."""
    ev = _grid_evaluator(f, grid)

    def work(a, b):
        vals = ev(a, b)
        return np.array([np.sum(grid.weights[a:b] * vals.sum(axis=1))])

    return complex(_map_chunks(grid, work, threads)[0])


def inner(grid: QuadratureGrid, f, h, threads: int = 1) -> complex:
    """``<f, h> = int f conj(h) dV``."""
    ef, eh = _grid_evaluator(f, grid), _grid_evaluator(h, grid)

    def work(a, b):
        vals = ef(a, b) * np.conj(eh(a, b))
        return np.array([np.sum(grid.weights[a:b] * vals.sum(axis=1))])

    return complex(_map_chunks(grid, work, threads)[0])


def _grid_evaluator(f, grid: QuadratureGrid):
    """``(a, b) -> values (b - a, Q^n)`` on a block of radial nodes."""
    if hasattr(f, "grid_values"):
        return lambda a, b: f.grid_values(grid, a, b)
    ev = _evaluator(f, grid.spec)
    return lambda a, b: ev(grid.chunk_points(a, b))


def _evaluator(f, spec):
    if isinstance(f, TestFunction):
        return lambda Z: f.evaluate(Z, spec)
    if isinstance(f, ProjectedFunction):
        return f.evaluate_many
    return f


def _projection_coefficients(g, grid: QuadratureGrid, cap: int, threads: int):
    spec = grid.spec
    n, Q = spec.dim, grid.angular
    if cap >= Q:
        raise ValueError(f"cap={cap} needs more than {Q} angular nodes")
    alphas = index_array(spec, cap)
    ev = _grid_evaluator(g, grid)
    flat_idx = np.ravel_multi_index(tuple(alphas.T), (Q,) * n)

    def work(a, b):
        vals = ev(a, b).reshape((b - a,) + (Q,) * n)
        # mean over angles of g * exp(-i alpha.theta)
        spectrum = np.fft.fftn(vals, axes=tuple(range(1, n + 1))).reshape(b - a, -1)
        ghat = spectrum[:, flat_idx]
        ralpha = np.prod(grid.radii[a:b, None, :] ** alphas[None, :, :], axis=2)
        return np.sum(grid.weights[a:b, None] * ralpha * ghat, axis=0)

    inner_products = _map_chunks(grid, work, threads)
    norms = np.exp(log_moments(spec, alphas))
    return alphas, inner_products / norms


def project(
    g,
    spec: EllipsoidSpec,
    grid: Optional[QuadratureGrid] = None,
    cap: int = 20,
    refine_check: bool = False,
    tol: float = 1e-8,
    threads: int = 1,
) -> ProjectedFunction:
    """Coefficients ``<g, z^alpha> / ||z^alpha||^2`` for ``|alpha| <= cap``.

    With ``refine_check`` the projection is repeated on the doubled grid and
    ``stable`` records whether every coefficient moved by at most ``tol``.
    """
    grid = QuadratureGrid.build(spec) if grid is None else grid
    if grid.spec != spec:
        raise ValueError("grid was built for a different domain")
    alphas, coeffs = _projection_coefficients(g, grid, cap, threads)
    stable = change = None
    if refine_check:
        _, fine = _projection_coefficients(g, grid.refined(), cap, threads)
        change = float(np.max(np.abs(fine - coeffs)))
        stable = change <= tol
    return ProjectedFunction(spec, cap, alphas, coeffs, (grid.radial, grid.angular), stable, change)


def sample_points(spec: EllipsoidSpec, count: int = 16, max_defect: float = 0.5, seed: int = 0) -> np.ndarray:
    """Deterministic interior sample with defect at most ``max_defect``."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        z = rng.uniform(-1, 1, spec.dim) + 1j * rng.uniform(-1, 1, spec.dim)
        if defect(spec, z) <= max_defect:
            pts.append(z)
    return np.array(pts)


def idempotence_check(
    g,
    spec: EllipsoidSpec,
    grid: Optional[QuadratureGrid] = None,
    cap: int = 20,
    points=None,
    threads: int = 1,
) -> float:
    """``max |P(Pg) - Pg|`` over sample points."""
    grid = QuadratureGrid.build(spec) if grid is None else grid
    pf = project(g, spec, grid, cap, threads=threads)
    ppf = project(SeriesFunction(pf), spec, grid, cap, threads=threads)
    pts = sample_points(spec) if points is None else np.asarray(points, dtype=complex)
    return float(np.max(np.abs(ppf.evaluate_many(pts) - pf.evaluate_many(pts))))


class ContinuationEstimate(NamedTuple):
    radius: float
    low_confidence: bool
    used: int


def continuation_radius_proxy(
    pf: ProjectedFunction, layers: int = 3, rel_floor: float = 1e-12, min_used: int = 2
) -> ContinuationEstimate:
    """Root-test estimate ``max |c_alpha|^(1/|alpha|)`` over the top layers.

    Coefficients at or below ``rel_floor`` times the largest coefficient
    count as zero (quadrature noise). Fewer than ``min_used`` surviving
    coefficients makes the estimate low-confidence; none at all gives 0,
    the signature of a polynomial.
    """
    deg = pf.alphas.sum(axis=1)
    mags = np.abs(pf.coeffs)
    scale = float(mags.max()) if len(mags) else 0.0
    top = (deg > max(pf.cap - layers, 0)) & (mags > rel_floor * scale)
    used = int(np.count_nonzero(top))
    if used == 0:
        return ContinuationEstimate(0.0, True, 0)
    r = float(np.max(mags[top] ** (1.0 / deg[top])))
    return ContinuationEstimate(r, used < min_used, used)


def bell_projection_identity_check(
    map: HoloMap,
    g: TestFunction,
    grids: Optional[tuple[QuadratureGrid, QuadratureGrid]] = None,
    cap: int = 20,
    points=None,
    threads: int = 1,
) -> float:
    """``max_z |P_1(J (g o F))(z) - J(z) (P_2 g)(F z)|`` for a biholomorphism ``F``."""
    if not map.biholomorphic:
        raise ValueError(f"{map.descriptor()} is not a biholomorphism")
    src, tgt = map.source, map.target
    if grids is None:
        grids = (QuadratureGrid.for_function(Pullback(g, map), src), QuadratureGrid.for_function(g, tgt))
    g1, g2 = grids
    left = project(Pullback(g, map), src, g1, cap, threads=threads)
    right = project(g, tgt, g2, cap, threads=threads)
    pts = sample_points(src) if points is None else np.asarray(points, dtype=complex)
    lhs = left.evaluate_many(pts)
    rhs = map._det(pts) * right.evaluate_many(map._apply(pts))
    return float(np.max(np.abs(lhs - rhs)))
