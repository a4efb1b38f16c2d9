"""Least-energy solutions by descent of the reduced functional on a Dirichlet sphere.

The reduced functional ``Phi(u) = (1/N) D^(N/2) (2* Q)^(-(N-2)/2)`` is minimized
over ``{D(u) = D0}``. Each step

1. forms the derivative of Phi and its Riesz representer in the Dirichlet
   inner product (one sparse solve with the stiffness matrix K),
2. removes the component along u (tangent space of the sphere),
3. takes an Armijo backtracking step and retracts by rescaling to ``D = D0``.

Spheres of different radii are dilations of each other and Phi is dilation
invariant, so D0 only fixes the spatial scale of the iterate. After
convergence the iterate is dilated onto the Pohozaev manifold; when that
dilation is far from 1 the descent restarts from the projected field so the
final profile lives at its natural scale.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from . import grid as _grid
from . import pohozaev as _pz
from .errors import DomainError, EmptyAdmissibleSet, LineSearchFailure, NoGroundState, NumericalError
from .grid import Field
from .nonlin import Nonlinearity, critical_exponent

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (0.5, 0.25, 0.125, 0.0625, 0.0)


@dataclass
class SolverOptions:
    tol: float = 1e-6
    max_iter: int = 50_000
    armijo: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    min_step: float = 1e-12
    abs_every: int = 25
    metric_every: int = 10
    regauge: bool = True
    regauge_tol: float = 0.05
    max_regauge: int = 4
    seed: Callable | None = None
    amplitudes: Sequence[float] = tuple(np.geomspace(1e-3, 1e3, 121))


@dataclass
class SolveResult:
    field: Field
    report: _pz.EnergyReport
    level: float
    level_history: list[float]
    iterations: int
    converged: bool
    eps_final: float
    grad_norm: float
    sphere_field: Field
    stationary: bool = False
    eps_levels: list[tuple[float, float]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# reduced functional on raw node values
# ---------------------------------------------------------------------------


class _Reduced:
    """Phi and its Dirichlet-metric gradient on node arrays of one grid."""

    def __init__(self, grid, nl: Nonlinearity, eps: float):
        self.grid, self.nl, self.eps = grid, nl, eps
        self.N = grid.N
        self.two_star = critical_exponent(self.N)
        self.mask = grid.active
        self.antisym = grid.kind == "biradial"

    def parts(self, u):
        D = self.grid.dirichlet_form(u)
        G_plus, _ = self.nl.split(u)
        Ip = self.grid.integrate_values(G_plus)
        Im = self.grid.integrate_values(self.nl.G_minus_eps(u, self.eps, self.N))
        return D, Ip, Im

    def level(self, u):
        """Return (Phi, D, Q) or None when u is not admissible."""
        D, Ip, Im = self.parts(u)
        Q = Ip - Im
        if D <= 0 or not Q > _pz.ADMISSIBLE_RTOL * (Ip + Im):
            return None
        return _pz.level_from_parts(self.N, D, Q), D, Q

    def derivative(self, u, Phi, D, Q):
        """Nodal derivative vector ``b`` of Phi (so ``dPhi(u)[v] = b . v``)."""
        w = self.grid.weights
        b = Phi * (self.N * self.grid.apply_K(u) / D
                   - 0.5 * (self.N - 2) / Q * w * self.nl.g_eps(u, self.eps, self.N))
        return np.where(self.mask, b, 0.0)

    def metric(self, u, D, Q):
        """Solver for ``K + kappa W max(-g_eps(u)/u, 0)``, a model of the Hessian."""
        kappa = 0.5 * (self.N - 2) * D / (self.N * Q)
        nz = u != 0
        ratio = np.zeros_like(u)
        ratio[nz] = -self.nl.g_eps(u[nz], self.eps, self.N) / u[nz]
        mass = kappa * self.grid.weights * np.clip(np.nan_to_num(ratio, posinf=0.0), 0.0, None)
        if self.antisym:
            mass = 0.5 * (mass + mass.T)
        return self.grid.solve_shifted(np.where(self.mask, mass, 0.0))

    def tangent_step(self, u, b, solve):
        """Metric gradient projected onto ``{v : (Ku) . v = 0}`` and its slope ``b . d``."""
        Ku = np.where(self.mask, self.grid.apply_K(u), 0.0)
        d, z = solve(b), solve(Ku)
        if self.antisym:
            d, z = 0.5 * (d - d.T), 0.5 * (z - z.T)
        d = d - (np.sum(Ku * d) / np.sum(Ku * z)) * z
        return d, float(np.sum(b * d))

    def tangent_l2(self, u, b):
        """L^2 norm of the tangent part of the L^2 representer of dPhi."""
        w = np.where(self.mask, self.grid.weights, 1.0)
        Ku = np.where(self.mask, self.grid.apply_K(u), 0.0)
        bb, bk, kk = np.sum(b * b / w), np.sum(b * Ku / w), np.sum(Ku * Ku / w)
        return math.sqrt(max(bb - bk * bk / kk, 0.0))

    def retract(self, v, D0):
        if self.antisym:
            v = 0.5 * (v - v.T)
        D = self.grid.dirichlet_form(v)
        return v * math.sqrt(D0 / D) if D > 0 else v


def _descend(red: _Reduced, u: np.ndarray, opts: SolverOptions, budget: int):
    D0 = red.grid.dirichlet_form(u)
    st = red.level(u)
    if st is None:
        raise EmptyAdmissibleSet("initial field is not admissible")
    Phi, D, Q = st
    history = [Phi]
    odd_radial = red.nl.odd and red.grid.kind == "radial" and opts.abs_every > 0
    it = 0
    grad_norm = math.inf
    converged = False
    solve = None
    while True:
        b = red.derivative(u, Phi, D, Q)
        grad_norm = red.tangent_l2(u, b)
        if grad_norm <= opts.tol * (1.0 + Phi):
            converged = True
            break
        if it >= budget:
            break
        if solve is None or it % opts.metric_every == 0:
            solve = red.metric(u, D, Q)
        d, slope = red.tangent_step(u, b, solve)
        scale = D / (red.N * Phi)
        alpha = opts.initial_step
        accepted = None
        while alpha >= opts.min_step:
            v = red.retract(u - alpha * scale * d, D0)
            trial = red.level(v)
            if trial is not None and trial[0] <= Phi - opts.armijo * alpha * scale * slope:
                accepted = (v, trial)
                break
            alpha *= opts.backtrack
        if accepted is None:
            if slope > 0 and grad_norm > 1e-3 * (1.0 + Phi):
                raise LineSearchFailure(f"no descent step at iteration {it}, gradient norm {grad_norm:.3e}")
            log.debug("line search stalled at gradient norm %.3e", grad_norm)
            break
        u, (Phi, D, Q) = accepted
        it += 1
        if odd_radial and it % opts.abs_every == 0:
            v = red.retract(np.abs(u), D0)
            trial = red.level(v)
            if trial is not None and trial[0] <= Phi:
                u, (Phi, D, Q) = v, trial
        history.append(Phi)
    return u, Phi, D, Q, history, it, converged, grad_norm


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


def _seed_profiles(grid):
    """Gaussian seed first, then flat-topped ones of growing plateau width.

    Whether some amplitude makes ``a f`` admissible depends on the shape of f
    only up to dilation; nonlinearities whose positive part of G sits on a
    narrow band of values need a plateau that outweighs the transition layer.
    """
    radius = 0.4 * grid.r_max
    widths = [R for R in (2.0, 4.0, 8.0, 16.0, 32.0) if R <= radius]
    if grid.kind == "radial":
        yield lambda r: np.exp(-np.asarray(r) ** 2)
        for R in widths:
            yield lambda r, R=R: np.exp(-(np.asarray(r) / R) ** 8)
    else:
        yield lambda t, s: (t - s) * np.exp(-0.5 * (t * t + s * s))
        for R in widths:
            yield lambda t, s, R=R: np.tanh(4.0 * (t - s)) * np.exp(-((t * t + s * s) / (R * R)) ** 4)


def _node_radius(grid) -> np.ndarray:
    if grid.kind == "radial":
        return grid.nodes
    T, S = grid._coords
    return np.hypot(T, S)


def _fitting_factor(grid, values: np.ndarray, r: float, fill: float = 0.9, rel: float = 1e-4) -> float:
    """Dilation factor nearest to r that keeps ``|u| > rel max|u|`` inside ``fill r_max``.

    Phi does not see the scale, so when the Pohozaev-scale copy would be
    truncated by the domain the widest copy that fits is used instead.
    """
    mag = np.abs(values)
    support = _node_radius(grid)[mag > rel * mag.max()].max()
    return max(r, support / (fill * grid.r_max))


def initial_field(grid, nl: Nonlinearity, eps: float, opts: SolverOptions | None = None) -> Field:
    """Amplitude-scanned seed ``a f(r x)``, already dilated onto the Pohozaev manifold.

    ``opts.seed`` replaces the built-in seed shapes when given.
    """
    opts = opts or SolverOptions()
    antisym = grid.kind == "biradial"
    red = _Reduced(grid, nl, eps)
    profiles = [opts.seed] if opts.seed is not None else _seed_profiles(grid)
    best = None
    for prof in profiles:
        base = _grid.sample(grid, prof, antisymmetric=antisym)
        for a in opts.amplitudes:
            st = red.level(a * base.values)
            if st is not None and (best is None or st[0] < best[1]):
                best = (a, st[0], st[1], st[2], prof)
        if best is not None:
            break
    if best is None:
        raise EmptyAdmissibleSet(f"no seed with amplitude in [{min(opts.amplitudes):g}, "
                                 f"{max(opts.amplitudes):g}] gives a positive potential")
    a, _, D, Q, prof = best
    r = math.sqrt(red.two_star * Q / D)
    r = _fitting_factor(grid, _grid.sample(grid, prof, antisymmetric=antisym).values, r)
    if grid.kind == "radial":
        seeded = lambda x: a * prof(r * np.asarray(x))
    else:
        seeded = lambda t, s: a * prof(r * t, r * s)
    u = _grid.sample(grid, seeded, antisymmetric=antisym)
    return u.with_values(np.where(grid.active, u.values, 0.0))


# ---------------------------------------------------------------------------
# public solvers
# ---------------------------------------------------------------------------


def minimize(grid, nl: Nonlinearity, eps: float = 0.0, opts: SolverOptions | None = None,
             initial: Field | None = None) -> SolveResult:
    """Minimize the reduced functional of ``J_eps`` over a Dirichlet sphere.

    Parameters
    ----------
    grid : RadialGrid or BiradialGrid
    nl : Nonlinearity
        Must be odd on biradial grids.
    eps : float
        Regularization parameter in [0, 1).
    opts : SolverOptions, optional
    initial : Field, optional
        Starting field; its Dirichlet energy fixes the sphere. Defaults to
        ``initial_field``.

    Returns
    -------
    SolveResult
        ``field`` is the minimizer dilated onto the Pohozaev manifold,
        ``sphere_field`` the undilated iterate and ``level`` the closed-form
        reduced level.
    """
    opts = opts or SolverOptions()
    if not (0.0 <= eps < 1.0):
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    if grid.kind == "biradial" and not nl.odd:
        raise DomainError("the antisymmetric class requires an odd nonlinearity")
    u0 = initial if initial is not None else initial_field(grid, nl, eps, opts)
    if u0.grid is not grid:
        raise DomainError("initial field lives on a different grid")
    red = _Reduced(grid, nl, eps)
    u = np.where(grid.active, u0.values, 0.0)
    if red.antisym:
        u = 0.5 * (u - u.T)
    total = 0
    for attempt in range(opts.max_regauge + 1):
        u, Phi, D, Q, history, its, converged, grad_norm = _descend(red, u, opts, opts.max_iter - total)
        total += its
        r = _fitting_factor(grid, u, math.sqrt(red.two_star * Q / D))
        if not opts.regauge or abs(r - 1.0) <= opts.regauge_tol or attempt == opts.max_regauge:
            break
        if total >= opts.max_iter:
            break
        log.debug("regauging by dilation factor %.4f", r)
        moved = _grid.dilate(Field(grid, u, red.antisym), r).values
        u = np.where(grid.active, moved, 0.0)
    sphere = Field(grid, u, red.antisym)
    projected = _pz.project(sphere, nl, eps)
    report = _pz.energy(projected, nl, eps)
    ok = converged and report.on_manifold(1e-3)
    return SolveResult(field=projected, report=report, level=Phi, level_history=history,
                       iterations=total, converged=ok, eps_final=eps, grad_norm=grad_norm,
                       sphere_field=sphere, stationary=converged, eps_levels=[(eps, Phi)])


def validate_schedule(schedule: Sequence[float]) -> list[float]:
    sched = [float(e) for e in schedule]
    if not sched:
        raise DomainError("empty eps schedule")
    if sched[0] > 0.5:
        raise DomainError("first eps must be at most 1/2")
    if any(e < 0 for e in sched) or any(e == 0 for e in sched[:-1]):
        raise DomainError("eps values must be positive (only the last may be 0)")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise DomainError("eps schedule must be strictly decreasing")
    return sched


def _warm_start(grid, nl: Nonlinearity, eps: float, prev: Field, opts: SolverOptions):
    """Best admissible multiple ``a prev`` (a >= 1) for the next eps; ``a == 1`` keeps the sphere."""
    red = _Reduced(grid, nl, eps)
    best = None
    for a in (1.0, *np.geomspace(1.0, max(opts.amplitudes), 61)[1:]):
        st = red.level(a * prev.values)
        if st is not None and (best is None or st[0] < best[1]):
            best = (a, st[0])
    if best is None:
        return None, True
    return prev.with_values(best[0] * prev.values), best[0] != 1.0


def continuation(grid, nl: Nonlinearity, schedule: Sequence[float] = DEFAULT_SCHEDULE,
                 opts: SolverOptions | None = None, mono_tol: float = 1e-6) -> SolveResult:
    """Solve for each eps in turn, warm-started from the previous minimizer.

    The previous iterate is reused on its own Dirichlet sphere whenever it is
    admissible for the next eps and no amplitude multiple of it does better,
    so consecutive levels are compared at one spatial scale. The levels
    ``c_eps`` must be nondecreasing as eps decreases and bounded by the final
    level; a violation beyond ``mono_tol`` raises ``NumericalError``.
    """
    opts = opts or SolverOptions()
    sched = validate_schedule(schedule)
    res = minimize(grid, nl, sched[0], opts)
    levels = [(sched[0], res.level)]
    history = list(res.level_history)
    iters = res.iterations
    for eps in sched[1:]:
        start, moved = _warm_start(grid, nl, eps, res.sphere_field, opts)
        stage = opts if moved else replace(opts, regauge=False)
        res = minimize(grid, nl, eps, stage, initial=start)
        levels.append((eps, res.level))
        history += res.level_history
        iters += res.iterations
    c = [lv for _, lv in levels]
    if any(b < a - mono_tol for a, b in zip(c, c[1:])) or any(x > c[-1] + mono_tol for x in c):
        raise NumericalError(f"c_eps sequence is not monotone: {c}")
    res.eps_levels = levels
    res.level_history = history
    res.iterations = iters
    return res


def pde_residual(u: Field, nl: Nonlinearity) -> float:
    """Grid-measure L^2 norm of ``-Δ_h u - g(u)`` over the interior nodes."""
    r = _grid.neg_laplacian(u) - nl.g(u.values)
    mask = u.grid.active & (u.grid.weights > 0)
    return math.sqrt(float(np.sum(u.grid.weights[mask] * r[mask] ** 2)))


# ---------------------------------------------------------------------------
# shooting oracle
# ---------------------------------------------------------------------------


@dataclass
class ShootingOptions:
    r_max: float = 150.0
    amplitude_range: tuple[float, float] = (1e-4, 1e3)
    n_scan: int = 60
    width_tol: float = 1e-12
    rtol: float = 1e-11
    atol: float = 1e-14
    n_out: int = 20001
    tol: float = 1e-3


@dataclass
class ShotResult:
    field: Field
    amplitude: float
    dirichlet: float
    int_G: float
    level: float
    r_stop: float
    residual: float


def _shoot_once(nl: Nonlinearity, N: int, a: float, opts: ShootingOptions, dense: bool = False):
    """Integrate from u(0) = a; return ('over' | 'under', solution)."""
    ga = float(nl.g(np.array([a]))[0])
    if ga <= 0.0:
        return "under", None
    omega = _grid.sphere_area(N)
    r0 = 1e-6
    y0 = [a - ga * r0**2 / (2 * N), -ga * r0 / N, 0.0, 0.0]

    def rhs(r, y):
        u, v = y[0], y[1]
        gu = float(nl.g(np.array([u]))[0])
        Gu = float(nl.G(np.array([u]))[0])
        rn = r ** (N - 1)
        return [v, -(N - 1) / r * v - gu, omega * v * v * rn, omega * Gu * rn]

    cross = lambda r, y: y[0]
    cross.terminal, cross.direction = True, -1
    turn = lambda r, y: y[1]
    turn.terminal, turn.direction = True, 1
    sol = solve_ivp(rhs, (r0, opts.r_max), y0, method="RK45", rtol=opts.rtol, atol=opts.atol,
                    events=(cross, turn), dense_output=dense)
    if sol.t_events[0].size:
        return "over", sol
    return "under", sol


def _scan_amplitudes(nl: Nonlinearity, opts: ShootingOptions) -> np.ndarray:
    """Candidate center values where an overshoot is possible.

    A crossing needs ``G(a) > 0`` (the ODE energy ``u'^2/2 + G(u)`` decreases)
    and a start downwards needs ``g(a) > 0``. Each such interval is sampled
    geometrically and, when it ends at a zero of g, also with points
    accumulating at that zero, where overshoots of slowly leaving solutions
    live.
    """
    a_lo, a_hi = opts.amplitude_range
    probe = np.geomspace(a_lo, a_hi, 20 * opts.n_scan)
    ok = (nl.G(probe) > 0) & (nl.g(probe) > 0)
    out = []
    edges = np.flatnonzero(np.diff(np.concatenate(([0], ok.astype(int), [0]))))
    cond = lambda a: min(float(nl.G(np.array([a]))[0]), float(nl.g(np.array([a]))[0]))
    for i, j in zip(edges[::2], edges[1::2]):
        lo = brentq(cond, probe[i - 1], probe[i], xtol=1e-15, rtol=1e-15) if i > 0 else probe[0]
        hi = brentq(cond, probe[j - 1], probe[j], xtol=1e-15, rtol=1e-15) if j < probe.size else probe[-1]
        pts = [np.geomspace(lo, hi, opts.n_scan)]
        if j < probe.size:
            pts.append(hi - (hi - lo) * np.geomspace(1.0, 1e-13, opts.n_scan))
        out.append(np.unique(np.concatenate(pts)))
    return np.concatenate(out) if out else np.empty(0)


def shoot_detailed(nl: Nonlinearity, N: int, opts: ShootingOptions | None = None) -> ShotResult:
    """Bisect on the center value between overshoot and undershoot."""
    opts = opts or ShootingOptions()
    probe = np.geomspace(1e-6, 1e6, 2001)
    if not np.any(nl.G(probe) > 0) and (nl.xi0 is None or nl.G(np.array([nl.xi0]))[0] <= 0):
        raise NoGroundState("G is nowhere positive")
    lo = hi = None
    prev = None
    for a in _scan_amplitudes(nl, opts):
        kind, _ = _shoot_once(nl, N, a, opts)
        if prev is not None and prev[1] == "under" and kind == "over":
            lo, hi = prev[0], a
            break
        prev = (a, kind)
    if lo is None:
        raise NoGroundState("no undershoot/overshoot bracket in the amplitude scan")
    while hi - lo > opts.width_tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        kind, _ = _shoot_once(nl, N, mid, opts)
        if kind == "over":
            hi = mid
        else:
            lo = mid
    _, sol = _shoot_once(nl, N, lo, opts, dense=True)
    r_stop = float(sol.t[-1])
    D, IG = float(sol.y[2, -1]), float(sol.y[3, -1])
    out_grid = _grid.build_radial_grid(N, r_stop, opts.n_out)
    vals = np.empty(out_grid.n)
    r = out_grid.nodes
    inner = r >= sol.t[0]
    vals[inner] = sol.sol(r[inner])[0]
    vals[~inner] = lo
    u = Field(out_grid, vals)
    res = pde_residual(u, nl)
    if res > opts.tol:
        raise NumericalError(f"shooting profile residual {res:.3e} exceeds {opts.tol:.1e}", estimate=res)
    return ShotResult(field=u, amplitude=float(lo), dirichlet=D, int_G=IG, level=0.5 * D - IG,
                      r_stop=r_stop, residual=res)


def shoot(nl: Nonlinearity, N: int, opts: ShootingOptions | None = None) -> Field:
    """Ground-state profile by shooting; see ``shoot_detailed``."""
    return shoot_detailed(nl, N, opts).field


# ---------------------------------------------------------------------------
# nonradial gap
# ---------------------------------------------------------------------------


@dataclass
class GapOptions:
    radial_r_max: float = 40.0
    radial_points: int = 8192
    biradial_r_max: float = 40.0
    biradial_points: int = 256
    eps: float = 0.0
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(tol=1e-5))


@dataclass
class GapRecord:
    radial_level: float
    biradial_level: float
    ratio: float
    holds: bool
    radial: SolveResult
    biradial: SolveResult


def verify_nonradial_gap(nl: Nonlinearity, opts: GapOptions | None = None) -> GapRecord:
    """Compare the antisymmetric biradial level with twice the radial level in N = 4."""
    opts = opts or GapOptions()
    if not nl.odd:
        raise DomainError("the antisymmetric class requires an odd nonlinearity")
    if "N" in nl.params and int(nl.params["N"]) != 4:
        raise DomainError("the biradial reduction is built for N = 4 only")
    rg = _grid.build_radial_grid(4, opts.radial_r_max, opts.radial_points)
    bg = _grid.build_biradial_grid(opts.biradial_r_max, opts.biradial_points)
    rad = minimize(rg, nl, opts.eps, opts.solver)
    bir = minimize(bg, nl, opts.eps, opts.solver)
    ratio = bir.level / rad.level
    return GapRecord(radial_level=rad.level, biradial_level=bir.level, ratio=ratio,
                     holds=ratio > 2.0, radial=rad, biradial=bir)


# ---------------------------------------------------------------------------
# alignment helper
# ---------------------------------------------------------------------------


def align_dilation(u: Field, profile: Callable, bounds=(0.25, 4.0)) -> tuple[float, float]:
    """Best ``lam`` minimizing ``max |u - profile(lam r)|``; returns ``(lam, distance)``.

    The sign of u is normalized so that its largest-magnitude value is positive.
    """
    vals = u.values
    if vals[np.argmax(np.abs(vals))] < 0:
        vals = -vals
    r = u.grid.nodes
    dist = lambda lam: float(np.max(np.abs(vals - profile(lam * r))))
    res = minimize_scalar(dist, bounds=bounds, method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(res.fun)
