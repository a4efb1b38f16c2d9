"""Nonlinearities g, their primitives G and the positive/negative splitting.

Every nonlinearity answers the same questions for an array of field values
``s``: ``g(s)``, ``G(s)``, the split ``G = G_plus - G_minus`` with both parts
nonnegative, and the regularized negative part

    G_minus_eps(s) = int_0^s phi_eps(t) g_minus(t) dt,
    phi_eps(t) = min(1, (|t| / eps)^(2* - 1)).

Built-in kinds are odd and use exact antiderivatives; ``custom`` kinds fall back
to adaptive quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate, optimize
from scipy.special import hyp2f1

from .errors import DomainError, NumericalError

SPLIT_QUAD_TOL = 1e-10


def critical_exponent(N: int) -> float:
    """Return the Sobolev exponent 2* = 2N/(N-2)."""
    if N < 3:
        raise DomainError(f"dimension must be >= 3, got {N}")
    return 2.0 * N / (N - 2.0)


def phi_eps(eps: float, s, N: int):
    """Cutoff ``min(1, (|s|/eps)^(2*-1))``; ``eps = 0`` gives the indicator of s != 0."""
    if not (0.0 <= eps < 1.0):
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    a = np.abs(np.asarray(s, dtype=float))
    if eps == 0.0:
        out = (a > 0).astype(float)
    else:
        k = critical_exponent(N) - 1.0
        out = (np.minimum(a, eps) / eps) ** k
    return out if out.ndim else float(out)


def _check_finite(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DomainError("field values must be finite")
    return s


@dataclass(frozen=True)
class Nonlinearity:
    """Base class; use the factory functions below to build instances.

    Subclasses provide ``g`` and ``G`` on arrays and the splitting
    ``split`` / ``G_minus_eps``; the remaining helpers are derived here.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    odd: bool = True
    mass_class: str = "positive"
    xi0: float | None = None

    # -- interface -------------------------------------------------------
    def g(self, s):
        raise NotImplementedError

    def G(self, s):
        raise NotImplementedError

    def split(self, s):
        """Return ``(G_plus(s), G_minus(s))``."""
        raise NotImplementedError

    def G_minus_eps(self, s, eps: float, N: int):
        raise NotImplementedError

    # -- derived ---------------------------------------------------------
    def g_split(self, s):
        """Return ``(g_plus, g_minus)``, the derivatives of ``G_plus, G_minus``."""
        s = np.asarray(s, dtype=float)
        gv = self.g(s)
        pos = s >= 0
        # on s < 0 the roles flip, see the definition of G_plus for negative s
        g_plus = np.where(pos, np.maximum(gv, 0.0), np.minimum(gv, 0.0))
        g_minus = g_plus - gv
        return g_plus, g_minus

    def g_eps(self, s, eps: float, N: int):
        """Derivative of ``G_plus - G_minus_eps``."""
        g_plus, g_minus = self.g_split(s)
        return g_plus - phi_eps(eps, s, N) * g_minus

    def G_eps(self, s, eps: float, N: int):
        """``G_plus - G_minus_eps``."""
        G_plus, _ = self.split(s)
        return G_plus - self.G_minus_eps(s, eps, N)


# ---------------------------------------------------------------------------
# built-in odd kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _OddClosedForm(Nonlinearity):
    """Odd nonlinearity with exact primitives on the half line.

    Subclasses define ``_g_pos``, ``_G_pos`` and ``_moment`` (the weighted
    integral ``int_0^y (t/eps)^k g(t) dt``, for ``0 <= y <= eps``) together with the list of
    intervals of ``(0, inf)`` on which ``g < 0``.
    """

    def _g_pos(self, x):
        raise NotImplementedError

    def _G_pos(self, x):
        raise NotImplementedError

    def _moment(self, y, k, eps):
        raise NotImplementedError

    def _negative_intervals(self) -> list[tuple[float, float]]:
        raise NotImplementedError

    def g(self, s):
        s = _check_finite(s)
        return np.sign(s) * self._g_pos(np.abs(s))

    def G(self, s):
        s = _check_finite(s)
        return self._G_pos(np.abs(s))

    def _G_minus_pos(self, x):
        out = np.zeros_like(x)
        for a, b in self._negative_intervals():
            hi = np.clip(x, a, b)
            out -= self._G_pos(hi) - self._G_pos(np.asarray(a))
        return np.maximum(out, 0.0)

    def split(self, s):
        s = _check_finite(s)
        x = np.abs(s)
        G_minus = self._G_minus_pos(x)
        G_plus = np.maximum(self._G_pos(x) + G_minus, 0.0)
        return G_plus, G_minus

    def G_minus_eps(self, s, eps: float, N: int):
        if not (0.0 <= eps < 1.0):
            raise DomainError(f"eps must lie in [0, 1), got {eps}")
        s = _check_finite(s)
        x = np.abs(s)
        if eps == 0.0:
            return self._G_minus_pos(x)
        k = critical_exponent(N) - 1.0
        y = np.minimum(x, eps)
        out = np.zeros_like(x)
        for a, b in self._negative_intervals():
            # cutoff part on [0, eps]
            lo1, hi1 = np.minimum(a, y), np.minimum(b, y)
            out -= self._moment(hi1, k, eps) - self._moment(lo1, k, eps)
            # untouched part on [eps, inf)
            lo2 = max(a, eps)
            if lo2 < b:
                hi2 = np.clip(x, lo2, b)
                out -= self._G_pos(hi2) - self._G_pos(np.asarray(lo2))
        return np.maximum(out, 0.0)


@dataclass(frozen=True)
class Logarithmic(_OddClosedForm):
    """``G(s) = s^2 log|s|``, ``g(s) = 2 s log|s| + s`` (infinite mass)."""

    def _g_pos(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x * (2.0 * np.log(np.where(x > 0, x, 1.0)) + 1.0), 0.0)

    def _G_pos(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, x * x * np.log(np.where(x > 0, x, 1.0)), 0.0)

    def _moment(self, y, k, eps):
        y = np.asarray(y, dtype=float)
        j = k + 2.0
        safe = np.where(y > 0, y, eps)
        # (y/eps)^k y^2 stays representable even when eps^k underflows
        scale = (safe / eps) ** k * safe * safe
        val = scale * (2.0 * (np.log(safe) / j - 1.0 / j**2) + 1.0 / j)
        return np.where(y > 0, val, 0.0)

    def _negative_intervals(self):
        return [(0.0, math.exp(-0.5))]


@dataclass(frozen=True)
class CubicQuintic(_OddClosedForm):
    """``g(s) = |s|^(p-2) s - |s|^(2*-2) s - m s`` with ``2 < p < 2*``."""

    def _exps(self):
        return self.params["p"], critical_exponent(int(self.params["N"])), self.params["m"]

    def _g_pos(self, x):
        p, q, m = self._exps()
        return x ** (p - 1) - x ** (q - 1) - m * x

    def _G_pos(self, x):
        p, q, m = self._exps()
        x = np.asarray(x, dtype=float)
        return x**p / p - x**q / q - 0.5 * m * x * x

    def _moment(self, y, k, eps):
        p, q, m = self._exps()
        y = np.asarray(y, dtype=float)
        scale = (y / eps) ** k
        return scale * (y**p / (k + p) - y**q / (k + q) - m * y * y / (k + 2))

    def _negative_intervals(self):
        return list(self.params["_neg"])


@dataclass(frozen=True)
class ZeroMassDoublePower(_OddClosedForm):
    """``g(s) = |s|^(q-2) s / (1 + |s|^(q-p))`` with ``p < 2* < q``; g > 0 on s > 0."""

    def _g_pos(self, x):
        p, q = self.params["p"], self.params["q"]
        return x ** (q - 1) / (1.0 + x ** (q - p))

    def _G_pos(self, x):
        p, q = self.params["p"], self.params["q"]
        x = np.asarray(x, dtype=float)
        c = q / (q - p)
        return x**q / q * hyp2f1(1.0, c, c + 1.0, -(x ** (q - p)))

    def _moment(self, y, k, eps):  # never needed: no negative intervals
        raise NotImplementedError

    def _negative_intervals(self):
        return []


# ---------------------------------------------------------------------------
# custom kind
# ---------------------------------------------------------------------------


def _quad(f, a, b, what):
    # a failed quadrature is reported through NumericalError, not a warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=SPLIT_QUAD_TOL, epsrel=1e-12, limit=400)
    if err > SPLIT_QUAD_TOL * max(1.0, abs(val)):
        raise NumericalError(f"quadrature for {what} did not converge", estimate=err)
    return val


@dataclass(frozen=True)
class Custom(Nonlinearity):
    """Caller-supplied scalar rule ``g`` (and optionally ``G``); splitting by quadrature."""

    g_rule: Callable[[float], float] | None = None
    G_rule: Callable[[float], float] | None = None

    def _g1(self, t: float) -> float:
        return float(self.g_rule(t))

    def g(self, s):
        s = _check_finite(s)
        return np.vectorize(self._g1, otypes=[float])(s)

    def _G1(self, x: float) -> float:
        if self.G_rule is not None:
            return float(self.G_rule(x))
        if x == 0.0:
            return 0.0
        return _quad(self._g1, 0.0, x, "G")

    def G(self, s):
        s = _check_finite(s)
        return np.vectorize(self._G1, otypes=[float])(s)

    def _split1(self, x: float):
        if x == 0.0:
            return 0.0, 0.0
        if x > 0:
            G_plus = _quad(lambda t: max(self._g1(t), 0.0), 0.0, x, "G_plus")
        else:
            G_plus = _quad(lambda t: max(-self._g1(t), 0.0), x, 0.0, "G_plus")
        return G_plus, G_plus - self._G1(x)

    def split(self, s):
        s = _check_finite(s)
        vec = np.vectorize(self._split1, otypes=[float, float])
        return vec(s)

    def G_minus_eps(self, s, eps: float, N: int):
        if not (0.0 <= eps < 1.0):
            raise DomainError(f"eps must lie in [0, 1), got {eps}")
        s = _check_finite(s)

        def one(x):
            if x == 0.0:
                return 0.0
            if x > 0:
                f = lambda t: phi_eps(eps, t, N) * max(-self._g1(t), 0.0)
                return _quad(f, 0.0, x, "G_minus_eps")
            f = lambda t: phi_eps(eps, t, N) * max(self._g1(t), 0.0)
            return _quad(f, x, 0.0, "G_minus_eps")

        return np.vectorize(one, otypes=[float])(s)


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------


def logarithmic() -> Logarithmic:
    return Logarithmic(kind="logarithmic", params={}, odd=True, mass_class="infinite", xi0=math.e)


def cubic_quintic(N: int, p: float, m: float) -> CubicQuintic:
    """Cubic-quintic type nonlinearity ``|s|^(p-2)s - |s|^(2*-2)s - m s``."""
    q = critical_exponent(N)
    if not (2.0 < p < q):
        raise DomainError(f"p must lie in (2, 2*) = (2, {q:g}), got {p}")
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")

    # g(x)/x = x^(p-2) - x^(q-2) - m peaks at x* with x*^(q-p) = (p-2)/(q-2)
    h = lambda x: x ** (p - 2) - x ** (q - 2) - m
    x_star = ((p - 2) / (q - 2)) ** (1.0 / (q - p))
    if m == 0.0:
        neg = [(1.0, math.inf)]
    elif h(x_star) > 0:
        s1 = optimize.brentq(h, 0.0, x_star, xtol=1e-15, rtol=1e-15)
        hi = x_star * 2.0
        while h(hi) > 0:
            hi *= 2.0
        s2 = optimize.brentq(h, x_star, hi, xtol=1e-15, rtol=1e-15)
        neg = [(0.0, s1), (s2, math.inf)]
    else:
        neg = [(0.0, math.inf)]

    # witness for G > 0: maximize G on (0, s2)
    Gf = lambda x: x**p / p - x**q / q - 0.5 * m * x * x
    res = optimize.minimize_scalar(lambda x: -Gf(x), bounds=(0.0, 2.0), method="bounded",
                                   options={"xatol": 1e-12})
    xi0 = float(res.x) if Gf(res.x) > 0 else None
    mass = "zero" if m == 0 else "positive"
    return CubicQuintic(kind="cubic_quintic", params={"N": N, "p": p, "m": m, "_neg": tuple(neg)},
                        odd=True, mass_class=mass, xi0=xi0)


def zero_mass_double_power(N: int, p: float | None = None, q: float | None = None) -> ZeroMassDoublePower:
    """``|s|^(q-2)s / (1 + |s|^(q-p))``; defaults ``q = 2*+2``, ``p = 2*-1``."""
    c = critical_exponent(N)
    p = c - 1.0 if p is None else p
    q = c + 2.0 if q is None else q
    if not (2.0 < p < c < q):
        raise DomainError(f"need 2 < p < 2* < q, got p={p}, q={q}, 2*={c:g}")
    return ZeroMassDoublePower(kind="zero_mass_double_power", params={"N": N, "p": p, "q": q},
                               odd=True, mass_class="zero", xi0=1.0)


def custom(g: Callable[[float], float], G: Callable[[float], float] | None = None, *,
           odd: bool = False, mass_class: str = "positive", params: Mapping[str, float] | None = None) -> Custom:
    return Custom(kind="custom", params=dict(params or {}), odd=odd, mass_class=mass_class,
                  g_rule=g, G_rule=G)


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def evaluate(nl: Nonlinearity, s: float):
    """Return ``(g, G, G_plus, G_minus)`` at a single point."""
    if not math.isfinite(s):
        raise DomainError(f"s must be finite, got {s}")
    arr = np.array([s], dtype=float)
    G_plus, G_minus = nl.split(arr)
    return float(nl.g(arr)[0]), float(nl.G(arr)[0]), float(G_plus[0]), float(G_minus[0])


def G_minus_eps(nl: Nonlinearity, eps: float, s, N: int):
    out = nl.G_minus_eps(np.asarray(s, dtype=float), eps, N)
    return out if np.ndim(out) else float(out)


def m0_threshold(N: int, p: float) -> float:
    """Largest mass m for which the cubic-quintic family still has max G > 0."""
    q = critical_exponent(N)
    if not (2.0 < p < q):
        raise DomainError(f"p must lie in (2, 2*) = (2, {q:g}), got {p}")
    return (N - 2) * (q - p) / (N * (p - 2)) * (N * (p - 2) / (2 * p)) ** ((q - 2) / (q - p))


@dataclass
class AssumptionReport:
    passes_g1: bool
    passes_g2: bool
    passes_g3: bool
    witness_xi0: float | None
    diagnostics: dict = field(default_factory=dict)


def _trend_to_zero(ratios: np.ndarray, threshold: float = 1e-3) -> bool:
    # ratios ordered toward the limit; nonincreasing and small at the end
    r = np.abs(ratios)
    if not np.all(np.isfinite(r)):
        return False
    steps = np.diff(r)
    return bool(np.all(steps <= 1e-12 * (1.0 + r[:-1])) and r[-1] < threshold)


def check_assumptions(nl: Nonlinearity, N: int) -> AssumptionReport:
    """Sample the growth conditions on a geometric grid of |s| in [1e-8, 1e8].

    A sampled lint, not a proof: a limit counts as zero when the ratio is
    nonincreasing over the three decades closest to the limit and ends below
    1e-3.
    """
    c = critical_exponent(N)
    small = np.geomspace(1e-5, 1e-8, 31)
    large = np.geomspace(1e5, 1e8, 31)
    signs = (1.0,) if nl.odd else (1.0, -1.0)
    diag: dict = {}
    g1 = g3 = True
    sup_g = 0.0
    for sg in signs:
        tag = "+" if sg > 0 else "-"
        Gp_small, _ = nl.split(sg * small)
        r_small = Gp_small / small**c
        Gp_large, _ = nl.split(sg * large)
        r_large = Gp_large / large**c
        big = np.geomspace(1.0, 1e8, 81)
        g_ratio = np.abs(nl.g(sg * big)) / big ** (c - 1)
        diag[f"g1{tag}"] = r_small.tolist()
        diag[f"g3{tag}"] = r_large.tolist()
        diag[f"g3_sup{tag}"] = float(np.max(g_ratio))
        g1 = g1 and _trend_to_zero(r_small)
        g3 = g3 and _trend_to_zero(r_large) and bool(np.all(np.isfinite(g_ratio)))
        sup_g = max(sup_g, float(np.max(g_ratio)))
    diag["g3_sup"] = sup_g

    grid = np.geomspace(1e-8, 1e8, 1601)
    Gv = nl.G(grid)
    witness = None
    hits = np.flatnonzero(Gv > 0)
    if hits.size:
        witness = float(grid[hits[0]])
        best = (float(Gv[hits[0]]), witness)
    else:
        # positivity windows can be narrower than the grid spacing
        i = int(np.argmax(Gv))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = optimize.minimize_scalar(lambda x: -float(nl.G(np.array([x]))[0]), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-14 * hi})
        best = max((float(Gv[i]), float(grid[i])), (float(-res.fun), float(res.x)))
        if best[0] > 0:
            witness = best[1]
    diag["g2_max_G"] = best[0]
    return AssumptionReport(passes_g1=g1, passes_g2=witness is not None, passes_g3=g3,
                            witness_xi0=witness, diagnostics=diag)
