"""Symmetry-reduced grids, fields and the discrete energy building blocks.

Two reductions are supported:

* ``RadialGrid``: u(x) = u(|x|) in dimension N on 0 = r_0 < ... < r_{n-1} = r_max.
* ``BiradialGrid``: N = 4 with x = (x1, x2) in R^2 x R^2 and u depending on
  (t, s) = (|x1|, |x2|); antisymmetric fields satisfy u(t, s) = -u(s, t).

Quadrature weights are exact measures of the dual cells (the cell around each
node bounded by midpoints), so they are positive at the origin and sum to the
volume of the ball of radius r_max. The Dirichlet energy is the staggered form

    D(u) = sum over edges c_e (u_j - u_i)^2 = u^T K u,

whose exact gradient defines the discrete Laplacian ``-Δ_h u = K u / w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import PchipInterpolator, RegularGridInterpolator
from scipy.sparse.linalg import factorized

from .errors import DomainError
from .nonlin import Nonlinearity


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def _dual_boundaries(nodes: np.ndarray) -> np.ndarray:
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    return np.concatenate(([0.0], mid, [nodes[-1]]))


def _edge_flux_apply(u, coef, axis):
    """Return the contribution of one family of edges to K u."""
    f = coef * np.diff(u, axis=axis)
    pad_lo = [(0, 0)] * u.ndim
    pad_hi = [(0, 0)] * u.ndim
    pad_lo[axis] = (1, 0)
    pad_hi[axis] = (0, 1)
    return np.pad(f, pad_lo) - np.pad(f, pad_hi)


def _shifted_solver(grid, mass: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Factorize ``K + diag(mass)`` on the active nodes of ``grid``."""
    idx = np.flatnonzero(grid.active.ravel())
    A = grid.stiffness[idx][:, idx] + sp.diags(np.asarray(mass).ravel()[idx])
    lu = factorized(A.tocsc())
    shape = grid.shape

    def solve(b):
        x = np.zeros(b.size)
        x[idx] = lu(np.ascontiguousarray(b.ravel()[idx]))
        return x.reshape(shape)

    return solve


@dataclass(frozen=True, eq=False)
class RadialGrid:
    N: int
    r_max: float
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    grading: str = "uniform"

    kind = "radial"

    @property
    def shape(self):
        return (self.n,)

    @property
    def omega(self) -> float:
        return sphere_area(self.N)

    @cached_property
    def edge_coef(self) -> np.ndarray:
        r, h = self.nodes, np.diff(self.nodes)
        mid = 0.5 * (r[1:] + r[:-1])
        return self.omega * mid ** (self.N - 1) / h

    @cached_property
    def active(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[-1] = False
        return mask

    def dirichlet_form(self, u: np.ndarray) -> float:
        return float(np.dot(self.edge_coef, np.diff(u) ** 2))

    def apply_K(self, u: np.ndarray) -> np.ndarray:
        return _edge_flux_apply(u, self.edge_coef, 0)

    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        c = self.edge_coef
        diag = np.zeros(self.n)
        diag[:-1] += c
        diag[1:] += c
        return sp.diags([diag, -c, -c], [0, 1, -1], format="csc")

    @cached_property
    def solve_K(self) -> Callable[[np.ndarray], np.ndarray]:
        """Solve ``K x = b`` with homogeneous Dirichlet data on inactive nodes."""
        return _shifted_solver(self, np.zeros(self.shape))

    def solve_shifted(self, mass: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        """Solver for ``K + diag(mass)``, same boundary handling as ``solve_K``."""
        return _shifted_solver(self, mass)

    def integrate_values(self, hv: np.ndarray) -> float:
        return float(np.dot(self.weights, hv))


def _cut_cell_moment(a, b, c, d, R):
    """``int_a^b int_c^d t s 1{t^2+s^2<R^2} ds dt`` for arrays of cells."""
    t1 = np.sqrt(np.maximum(R * R - d * d, 0.0))
    t2 = np.sqrt(np.maximum(R * R - c * c, 0.0))
    hi1 = np.minimum(b, t1)
    part1 = np.where(hi1 > a, 0.25 * (d * d - c * c) * (hi1 * hi1 - a * a), 0.0)
    lo2, hi2 = np.maximum(a, t1), np.minimum(b, t2)
    F = lambda t: 0.25 * (R * R - c * c) * t * t - t**4 / 8.0
    part2 = np.where(hi2 > lo2, F(hi2) - F(lo2), 0.0)
    return part1 + part2


@dataclass(frozen=True, eq=False)
class BiradialGrid:
    """Grid in (t, s) = (|x1|, |x2|) for x in R^2 x R^2, truncated to the ball of radius r_max."""

    r_max: float
    n: int
    axis: np.ndarray
    weights: np.ndarray

    N = 4
    kind = "biradial"

    @property
    def shape(self):
        return (self.n, self.n)

    @cached_property
    def _coords(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def inside(self) -> np.ndarray:
        T, S = self._coords
        return T * T + S * S < self.r_max**2

    @property
    def active(self) -> np.ndarray:
        return self.inside

    @cached_property
    def _edge_coefs(self):
        x, b = self.axis, _dual_boundaries(self.axis)
        sigma = 0.5 * (b[1:] ** 2 - b[:-1] ** 2)
        mid = 0.5 * (x[1:] + x[:-1])
        h = np.diff(x)
        ct = (2 * math.pi) ** 2 * (mid / h)[:, None] * sigma[None, :]
        return ct, np.ascontiguousarray(ct.T)

    def dirichlet_form(self, u: np.ndarray) -> float:
        ct, cs = self._edge_coefs
        return float(np.sum(ct * np.diff(u, axis=0) ** 2) + np.sum(cs * np.diff(u, axis=1) ** 2))

    def apply_K(self, u: np.ndarray) -> np.ndarray:
        ct, cs = self._edge_coefs
        return _edge_flux_apply(u, ct, 0) + _edge_flux_apply(u, cs, 1)

    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        n = self.n
        ct, cs = self._edge_coefs
        idx = np.arange(n * n).reshape(n, n)
        rows, cols, vals = [], [], []
        for coef, a, b in ((ct, idx[:-1, :], idx[1:, :]), (cs, idx[:, :-1], idx[:, 1:])):
            a, b, c = a.ravel(), b.ravel(), coef.ravel()
            rows += [a, b, a, b]
            cols += [a, b, b, a]
            vals += [c, c, -c, -c]
        K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n * n, n * n))
        return K.tocsc()

    @cached_property
    def solve_K(self) -> Callable[[np.ndarray], np.ndarray]:
        """Solve ``K x = b`` with homogeneous Dirichlet data on inactive nodes."""
        return _shifted_solver(self, np.zeros(self.shape))

    def solve_shifted(self, mass: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        """Solver for ``K + diag(mass)``, same boundary handling as ``solve_K``."""
        return _shifted_solver(self, mass)

    def integrate_values(self, hv: np.ndarray) -> float:
        # pair (i, j) with (j, i) so odd integrands of antisymmetric fields cancel exactly
        w = self.weights
        iu = np.triu_indices(self.n, 1)
        pairs = w[iu] * (hv[iu] + hv.T[iu])
        return float(np.sum(pairs) + np.dot(np.diag(w), np.diag(hv)))


@dataclass(frozen=True, eq=False)
class Field:
    grid: RadialGrid | BiradialGrid
    values: np.ndarray
    antisymmetric: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise DomainError(f"values of shape {v.shape} do not match grid shape {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.grid.N

    def with_values(self, values) -> "Field":
        return Field(self.grid, values, self.antisymmetric)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, c: float):
        return self.with_values(c * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "Field"):
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values, self.antisymmetric and other.antisymmetric)

    def __sub__(self, other: "Field"):
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values, self.antisymmetric and other.antisymmetric)


def _same_grid(a: Field, b: Field):
    if a.grid is not b.grid:
        raise DomainError("fields live on different grids")


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def build_radial_grid(N: int, r_max: float, n: int, grading: str = "uniform",
                      ratio: float = 50.0) -> RadialGrid:
    """Radial grid with exact dual-cell weights ``omega/N (b_{i+1}^N - b_i^N)``.

    ``grading="geometric"`` makes the spacing grow geometrically so that the
    last spacing is ``ratio`` times the first.
    """
    if N < 3:
        raise DomainError(f"dimension must be >= 3, got {N}")
    if not (r_max > 0 and math.isfinite(r_max)):
        raise DomainError(f"r_max must be positive, got {r_max}")
    if n < 16:
        raise DomainError(f"need at least 16 nodes, got {n}")
    if grading == "uniform":
        nodes = np.linspace(0.0, r_max, n)
    elif grading == "geometric":
        q = ratio ** (1.0 / (n - 2))
        steps = q ** np.arange(n - 1)
        nodes = np.concatenate(([0.0], np.cumsum(steps)))
        nodes *= r_max / nodes[-1]
        nodes[-1] = r_max
    else:
        raise DomainError(f"unknown grading {grading!r}")
    b = _dual_boundaries(nodes)
    weights = sphere_area(N) / N * np.diff(b**N)
    return RadialGrid(N=N, r_max=float(r_max), n=int(n), nodes=nodes, weights=weights, grading=grading)


def build_biradial_grid(r_max: float, n: int) -> BiradialGrid:
    """Uniform (t, s) grid on [0, r_max]^2 with cut-cell weights of the 4-ball."""
    if not (r_max > 0 and math.isfinite(r_max)):
        raise DomainError(f"r_max must be positive, got {r_max}")
    if n < 16:
        raise DomainError(f"need at least 16 nodes per axis, got {n}")
    axis = np.linspace(0.0, r_max, n)
    b = _dual_boundaries(axis)
    t_lo, s_lo = np.meshgrid(b[:-1], b[:-1], indexing="ij")
    t_hi, s_hi = np.meshgrid(b[1:], b[1:], indexing="ij")
    W = (2 * math.pi) ** 2 * _cut_cell_moment(t_lo, t_hi, s_lo, s_hi, r_max)
    W = 0.5 * (W + W.T)
    return BiradialGrid(r_max=float(r_max), n=int(n), axis=axis, weights=W)


def sample(grid, profile: Callable, antisymmetric: bool = False) -> Field:
    """Sample ``profile(r)`` (radial) or ``profile(t, s)`` (biradial) on the nodes.

    Biradial values outside the ball of radius r_max are set to zero.
    """
    if grid.kind == "radial":
        if antisymmetric:
            raise DomainError("antisymmetry is only defined on biradial grids")
        vals = np.broadcast_to(np.asarray(profile(grid.nodes), dtype=float), grid.shape).copy()
    else:
        T, S = grid._coords
        P = np.broadcast_to(np.asarray(profile(T, S), dtype=float), grid.shape).copy()
        if not np.all(np.isfinite(P)):
            raise DomainError("profile is not finite on the nodes")
        if antisymmetric:
            P = 0.5 * (P - P.T)
        P[~grid.inside] = 0.0
        vals = P
    if not np.all(np.isfinite(vals)):
        raise DomainError("profile is not finite on the nodes")
    return Field(grid, vals, antisymmetric)


def zeros(grid) -> Field:
    return Field(grid, np.zeros(grid.shape), grid.kind == "biradial")


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------


def dirichlet(u: Field) -> float:
    """Discrete ``int |grad u|^2`` (midpoint rule on the staggered differences)."""
    return u.grid.dirichlet_form(u.values)


def integrate(u: Field, h: Callable) -> float:
    """Quadrature of ``h(u)`` against the grid measure; ``h`` acts on arrays."""
    return u.grid.integrate_values(np.asarray(h(u.values), dtype=float))


def neg_laplacian(u: Field) -> np.ndarray:
    """Node values of ``-Δ_h u = K u / w`` (zero where the weight vanishes)."""
    Ku = u.grid.apply_K(u.values)
    w = u.grid.weights
    return np.divide(Ku, w, out=np.zeros_like(Ku), where=w > 0)


def energy_gradient(u: Field, nl: Nonlinearity, eps: float) -> Field:
    """L^2 representer of ``v -> J_eps'(u) v``: ``-Δ_h u - g_plus(u) + phi_eps(u) g_minus(u)``.

    Satisfies ``sum_i w_i grad_i v_i = d/dt J_eps(u + t v)|_{t=0}`` exactly for
    the discrete energy.
    """
    if u.antisymmetric and not nl.odd:
        raise DomainError("antisymmetric fields require an odd nonlinearity")
    if not (0.0 <= eps < 1.0):
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    rep = neg_laplacian(u) - nl.g_eps(u.values, eps, u.N)
    rep = np.where(u.grid.weights > 0, rep, 0.0)
    if u.antisymmetric:
        rep = 0.5 * (rep - rep.T)
    return Field(u.grid, rep, u.antisymmetric)


# ---------------------------------------------------------------------------
# dilation
# ---------------------------------------------------------------------------


def dilate(u: Field, lam: float) -> Field:
    """Resample ``x -> u(lam x)`` on the same grid by monotone cubic interpolation."""
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"dilation factor must be positive, got {lam}")
    if lam == 1.0:
        return u
    g = u.grid
    if g.kind == "radial":
        # slopes of underflowing tails overflow harmlessly inside the interpolant
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            f = PchipInterpolator(g.nodes, u.values, extrapolate=False)
            vals = np.nan_to_num(f(lam * g.nodes), nan=0.0)
        return Field(g, vals)
    T, S = g._coords
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        f = RegularGridInterpolator((g.axis, g.axis), u.values, method="pchip",
                                    bounds_error=False, fill_value=0.0)
        vals = f(np.stack([lam * T, lam * S], axis=-1))
    if u.antisymmetric:
        vals = 0.5 * (vals - vals.T)
    vals[~g.inside] = 0.0
    return Field(g, vals, u.antisymmetric)
