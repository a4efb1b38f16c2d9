"""Concentration-compactness instrumentation for sequences of fields.

``local_mass_sup`` measures the largest L^2 mass a ball of fixed radius can
capture (the quantity whose vanishing forces subcritical integrals to vanish),
and ``brezis_lieb_defect`` tracks how far ``int psi(u_n)`` is from splitting
into the contributions of a limit and a remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc, gamma

from .errors import DomainError
from .grid import Field, _dual_boundaries


@dataclass(frozen=True)
class FieldSequence:
    """Ordered fields sharing one grid."""

    fields: tuple[Field, ...]

    def __init__(self, fields: Sequence[Field]):
        fields = tuple(fields)
        if fields:
            grid = fields[0].grid
            for f in fields:
                if f.grid is not grid:
                    raise DomainError("sequence members must share one grid")
                if not np.all(np.isfinite(f.values)):
                    raise DomainError("sequence members must have finite values")
        object.__setattr__(self, "fields", fields)

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    def __getitem__(self, i):
        return self.fields[i]


def _ball_volume(N: int, R):
    return math.pi ** (N / 2) / gamma(N / 2 + 1) * np.asarray(R, dtype=float) ** N


def _cap(N: int, R, a):
    """Volume of ``{x in B(0, R) : x_1 > a}``, any real a."""
    R, a = np.broadcast_arrays(np.asarray(R, float), np.asarray(a, float))
    full = _ball_volume(N, R)
    if N == 3:
        h = np.clip(R - a, 0.0, 2 * R)
        return math.pi * h * h * (3 * R - h) / 3.0
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.clip(1.0 - (a / R) ** 2, 0.0, 1.0)
        half = 0.5 * full * betainc((N + 1) / 2, 0.5, x)
    out = np.where(a >= 0, half, full - half)
    out = np.where(a >= R, 0.0, out)
    return np.where(a <= -R, full, out)


def _lens(N: int, R1, R2, d):
    """Volume of ``B(0, R1) ∩ B(d e_1, R2)`` for d > 0 (broadcasting)."""
    R1, d = np.broadcast_arrays(np.asarray(R1, float), np.asarray(d, float))
    a1 = (d * d + R1 * R1 - R2 * R2) / (2 * d)
    out = _cap(N, R1, a1) + _cap(N, R2, d - a1)
    out = np.where(d >= R1 + R2, 0.0, out)
    out = np.where(d + R1 <= R2, _ball_volume(N, R1), out)
    return np.where(d + R2 <= R1, _ball_volume(N, R2), out)


def _axis_masses(grid, sq: np.ndarray, radius: float, chunk_cells: int = 2_000_000) -> np.ndarray:
    """Ball masses for every node taken as center, in blocks of centers."""
    N, b, y = grid.N, _dual_boundaries(grid.nodes), grid.nodes
    out = np.empty(y.size)
    out[0] = float(np.dot(sq, np.diff(_ball_volume(N, np.minimum(b, radius)))))
    lo = np.maximum(np.searchsorted(b, y - radius) - 1, 0)
    hi = np.minimum(np.searchsorted(b, y + radius) + 1, b.size - 1)
    width = int(np.max(hi - lo)) + 1
    k = np.arange(width)
    step = max(1, chunk_cells // width)
    for start in range(1, y.size, step):
        sl = slice(start, min(start + step, y.size))
        idx = np.minimum(lo[sl, None] + k[None, :], b.size - 1)
        cum = _lens(N, b[idx], radius, y[sl, None])
        cells = np.minimum(idx[:, :-1], sq.size - 1)
        out[sl] = np.sum(sq[cells] * np.diff(cum, axis=1), axis=1)
    return out


def local_mass_sup(u: Field, radius: float) -> float:
    """Largest mass ``int_B(y, radius) u^2`` over centers y on the symmetry axis.

    Each quadrature cell is a spherical shell; its overlap with the ball is an
    exact difference of lens volumes. Centers run over the grid nodes, so for
    off-center concentration the result is a lower bound of the full supremum.

    Parameters
    ----------
    u : Field
        Radial field.
    radius : float
        In ``(0, r_max / 2]``.
    """
    g = u.grid
    if g.kind != "radial":
        raise DomainError("local_mass_sup is defined for radial fields")
    if not (0.0 < radius <= 0.5 * g.r_max):
        raise DomainError(f"radius must lie in (0, r_max/2], got {radius}")
    sq = u.values ** 2
    if not np.any(sq):
        return 0.0
    return float(np.max(_axis_masses(g, sq, radius)))


def brezis_lieb_defect(seq: FieldSequence | Sequence[Field], psi: Callable, limit: Field) -> list[float]:
    """``|int psi(u_n) - int psi(u_n - limit) - int psi(limit)|`` for each member.

    ``psi`` must vanish at 0 and act elementwise on arrays.
    """
    seq = seq if isinstance(seq, FieldSequence) else FieldSequence(seq)
    quad = limit.grid.integrate_values
    psi_limit = quad(psi(limit.values))
    out = []
    for u in seq:
        if u.grid is not limit.grid:
            raise DomainError("sequence and limit live on different grids")
        a = quad(psi(u.values))
        c = quad(psi(u.values - limit.values))
        out.append(abs(a - c - psi_limit))
    return out
