"""Energies, the dilation projection onto the Pohozaev manifold and sharp constants.

With ``D = int |grad u|^2`` and ``Q = int G_plus(u) - G_minus_eps(u)``, the
dilation ``u(r .)`` with ``r = sqrt(2* Q / D)`` lands on the manifold
``D = 2* Q`` and its energy has the closed form

    Phi(u) = (1/2 - 1/2*) D^(N/2) (2* Q)^(-(N-2)/2),

which is invariant under every dilation of u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid as _grid
from .errors import DomainError, EmptyAdmissibleSet
from .grid import Field
from .nonlin import Nonlinearity, critical_exponent

# Q below this fraction of (int G_plus + int G_minus_eps) is treated as zero
ADMISSIBLE_RTOL = 1e-12
MASS_TOL = 1e-6


@dataclass(frozen=True)
class EnergyReport:
    dirichlet: float
    int_G_plus: float
    int_G_minus_eps: float
    J_eps: float
    pohozaev_residual: float
    eps: float

    @property
    def Q(self) -> float:
        return self.int_G_plus - self.int_G_minus_eps

    def on_manifold(self, rtol: float = 1e-3) -> bool:
        return abs(self.pohozaev_residual) <= rtol * self.dirichlet


def _check_eps(eps):
    if not (0.0 <= eps < 1.0):
        raise DomainError(f"eps must lie in [0, 1), got {eps}")


def _potential_parts(grid, values, nl: Nonlinearity, eps: float):
    G_plus, _ = nl.split(values)
    G_minus_eps = nl.G_minus_eps(values, eps, grid.N)
    return grid.integrate_values(G_plus), grid.integrate_values(G_minus_eps)


def energy(u: Field, nl: Nonlinearity, eps: float = 0.0) -> EnergyReport:
    """Assemble ``J_eps = D/2 + int G_minus_eps - int G_plus`` and the Pohozaev residual."""
    _check_eps(eps)
    D = _grid.dirichlet(u)
    Ip, Im = _potential_parts(u.grid, u.values, nl, eps)
    two_star = critical_exponent(u.N)
    return EnergyReport(
        dirichlet=D,
        int_G_plus=Ip,
        int_G_minus_eps=Im,
        J_eps=0.5 * D + Im - Ip,
        pohozaev_residual=D - two_star * (Ip - Im),
        eps=eps,
    )


def _require_admissible(D, Ip, Im):
    Q = Ip - Im
    if D <= 0.0:
        raise DomainError("the zero field has no projection onto the Pohozaev manifold")
    if not Q > ADMISSIBLE_RTOL * (Ip + Im):
        raise EmptyAdmissibleSet(f"int G_plus - int G_minus_eps = {Q:.3e} is not positive")
    return Q


def projection_factor(u: Field, nl: Nonlinearity, eps: float = 0.0) -> float:
    """The dilation factor ``r(u) = sqrt(2* Q) / sqrt(D)``."""
    rep = energy(u, nl, eps)
    Q = _require_admissible(rep.dirichlet, rep.int_G_plus, rep.int_G_minus_eps)
    return math.sqrt(critical_exponent(u.N) * Q / rep.dirichlet)


def project(u: Field, nl: Nonlinearity, eps: float = 0.0) -> Field:
    """Dilate u onto the regularized Pohozaev manifold (resampled on the same grid)."""
    r = projection_factor(u, nl, eps)
    out = _grid.dilate(u, r)
    vals = np.where(u.grid.active, out.values, 0.0)
    return out.with_values(vals)


def level_from_parts(N: int, D: float, Q: float) -> float:
    two_star = critical_exponent(N)
    return (0.5 - 1.0 / two_star) * D ** (N / 2.0) * (two_star * Q) ** (-(N - 2) / 2.0)


def reduced_level(u: Field, nl: Nonlinearity, eps: float = 0.0) -> float:
    """Energy of the projected field, evaluated without resampling."""
    _check_eps(eps)
    D = _grid.dirichlet(u)
    Ip, Im = _potential_parts(u.grid, u.values, nl, eps)
    Q = _require_admissible(D, Ip, Im)
    return level_from_parts(u.N, D, Q)


def normalize_to_sphere(u: Field) -> Field:
    """Dilate u so that its Dirichlet energy is 1: ``u(D^(1/(N-2)) .)``."""
    D = _grid.dirichlet(u)
    if D <= 0.0:
        raise DomainError("cannot normalize the zero field")
    return _grid.dilate(u, D ** (1.0 / (u.N - 2)))


def sharp_constant(N: int, level: float) -> float:
    """Optimal constant ``2* (1/2 - 1/2*)^(-2/(N-2)) level^(2/(N-2))``."""
    if not level > 0:
        raise DomainError(f"level must be positive, got {level}")
    two_star = critical_exponent(N)
    # 1/2 - 1/2* = 1/N
    return two_star * (N * level) ** (2.0 / (N - 2))


def _s2logs(s):
    a = np.abs(s)
    return np.where(a > 0, s * s * np.log(np.where(a > 0, a, 1.0)), 0.0)


def _require_unit_mass(u: Field):
    mass = _grid.integrate(u, np.square)
    if abs(mass - 1.0) > MASS_TOL:
        raise DomainError(f"field must have unit L^2 mass, got {mass:.12g}")


def optimal_alpha(u: Field) -> float:
    """Maximizer ``(N-2)/4 - int u^2 log|u|`` of the scaled log-Sobolev form."""
    _require_unit_mass(u)
    return (u.N - 2) / 4.0 - _grid.integrate(u, _s2logs)


def log_sobolev_gap(u: Field) -> float:
    """``(N/4) log(2/(pi e N) D) - int u^2 log|u|`` for unit-mass u; zero on Gaussians."""
    _require_unit_mass(u)
    N = u.N
    D = _grid.dirichlet(u)
    return N / 4.0 * math.log(2.0 / (math.pi * math.e * N) * D) - _grid.integrate(u, _s2logs)


def gausson(N: int):
    """The explicit solution ``exp((N-1)/2 - r^2/2)`` of the logarithmic equation."""
    return lambda r: np.exp(0.5 * (N - 1) - 0.5 * np.asarray(r) ** 2)


def gausson_level(N: int) -> float:
    """Closed-form least energy ``e^(N-1) pi^(N/2) / 2`` of the logarithmic problem."""
    return math.exp(N - 1) * math.pi ** (N / 2.0) / 2.0
