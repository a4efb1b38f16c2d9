import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import gamma

from scalarfield import DomainError
from scalarfield import diagnostics as Dg
from scalarfield import grid as G
from scalarfield import pohozaev as P

U1 = P.gausson(3)
PSI = lambda s: np.abs(s) ** 6


def ball_volume(N, R):
    return math.pi ** (N / 2) / gamma(N / 2 + 1) * R**N


def lens_by_slices(N, R1, R2, d):
    """Intersection volume as an integral of (N-1)-ball cross-sections along the axis."""
    lo, hi = max(-R1, d - R2), min(R1, d + R2)
    if lo >= hi:
        return 0.0

    def section(x):
        rho2 = min(R1 * R1 - x * x, R2 * R2 - (x - d) ** 2)
        return ball_volume(N - 1, math.sqrt(max(rho2, 0.0)))

    # the section is only piecewise smooth: split where the two spheres meet
    kink = min(max((d * d + R1 * R1 - R2 * R2) / (2 * d), lo), hi)
    return sum(integrate.quad(section, x0, x1, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
               for x0, x1 in ((lo, kink), (kink, hi)) if x1 > x0)


def gaussian_ball_mass(y, R):
    """int over B(y e_1, R) of e^{-|x|^2} in R^3, via sphere averages around the center."""
    def shell(rho):
        if y == 0:
            avg = math.exp(-rho * rho)
        else:
            avg = math.exp(-(y - rho) ** 2) * (1 - math.exp(-4 * y * rho)) / (4 * y * rho)
        return 4 * math.pi * rho * rho * avg

    return integrate.quad(shell, 0, R, epsabs=1e-14, epsrel=1e-12)[0]


# --- geometry ------------------------------------------------------------------------


def test_lens_n3_textbook_formula():
    R, r, d = 2.0, 1.5, 2.2
    textbook = math.pi * (R + r - d) ** 2 * (d * d + 2 * d * r - 3 * r * r + 2 * d * R + 6 * r * R - 3 * R * R) / (12 * d)
    assert float(Dg._lens(3, R, r, d)) == pytest.approx(textbook, rel=1e-12)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
@given(R1=st.floats(0.1, 5), R2=st.floats(0.1, 5), d=st.floats(0.01, 10))
def test_lens_matches_slice_integral(N, R1, R2, d):
    assert float(Dg._lens(N, R1, R2, d)) == pytest.approx(lens_by_slices(N, R1, R2, d), rel=1e-8, abs=1e-12)


# --- local mass -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def gaussian_axis_masses(grid3):
    u = G.sample(grid3, lambda r: np.exp(-0.5 * r * r))
    return Dg._axis_masses(grid3, u.values**2, 2.0)


@pytest.mark.parametrize("y_index", [0, 300, 700, 1500, 3000])
def test_axis_ball_mass_against_closed_form(grid3, gaussian_axis_masses, y_index):
    y = grid3.nodes[y_index]
    assert gaussian_axis_masses[y_index] == pytest.approx(gaussian_ball_mass(y, 2.0), rel=1e-4)


def test_gausson_local_mass(gausson3):
    inner = gausson3.grid.nodes <= 2.0
    # continuum mass of r <= 2: e^2 int_0^2 4 pi r^2 e^{-r^2} dr
    centered = math.e**2 * gaussian_ball_mass(0.0, 2.0)
    val = Dg.local_mass_sup(gausson3, 2.0)
    assert val >= 0.9 * centered
    assert val == pytest.approx(centered, rel=1e-4)
    assert inner.any()


def test_zero_field_local_mass(grid3_coarse):
    assert Dg.local_mass_sup(G.zeros(grid3_coarse), 1.0) == 0.0


@pytest.mark.parametrize("radius", [0.0, -1.0, 6.01, math.inf])
def test_local_mass_radius_domain(gausson3, radius):
    with pytest.raises(DomainError):
        Dg.local_mass_sup(gausson3, radius)


def test_local_mass_rejects_biradial():
    g = G.build_biradial_grid(4.0, 32)
    with pytest.raises(DomainError):
        Dg.local_mass_sup(G.sample(g, lambda t, s: t - s, antisymmetric=True), 1.0)


def test_spreading_sequence_vanishes(grid3_coarse):
    vals = [Dg.local_mass_sup(G.sample(grid3_coarse, lambda r, n=n: n**-0.5 * U1(r / n)), 1.0) for n in (1, 2, 4, 8)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    # ball mass <= n^{-1} |B_1| sup u1^2
    for n, v in zip((1, 2, 4, 8), vals):
        assert v <= ball_volume(3, 1.0) * math.e**2 / n


OFF_CENTER = {
    "ring": lambda r: np.exp(-4 * (r - 3) ** 2),
    "gausson": U1,
    "two_scale": lambda r: np.exp(-r * r) + 0.5 * np.exp(-((r - 2) ** 2)),
}


@pytest.mark.parametrize("name", sorted(OFF_CENTER))
def test_local_mass_monotone_and_bounded(grid3_coarse, name):
    u = G.sample(grid3_coarse, OFF_CENTER[name])
    total = G.integrate(u, np.square)
    vals = [Dg.local_mass_sup(u, r) for r in (0.25, 0.5, 1.0, 2.0, 4.0, 6.0)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= total * (1 + 1e-12)


def test_ring_concentration_is_off_center(grid3_coarse):
    u = G.sample(grid3_coarse, OFF_CENTER["ring"])
    masses = Dg._axis_masses(grid3_coarse, u.values**2, 0.5)
    assert grid3_coarse.nodes[np.argmax(masses)] == pytest.approx(3.0, abs=0.05)


@pytest.mark.parametrize("name", sorted(OFF_CENTER))
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_local_mass_dilation_law(grid3_coarse, name, lam):
    u = G.sample(grid3_coarse, OFF_CENTER[name])
    r = 1.0
    lhs = Dg.local_mass_sup(G.dilate(u, lam), r)
    rhs = Dg.local_mass_sup(u, lam * r) * lam**-3
    assert lhs <= rhs * (1 + 1e-3)


# --- sequences -----------------------------------------------------------------------


def test_sequence_requires_common_grid(grid3, grid3_coarse):
    with pytest.raises(DomainError):
        Dg.FieldSequence([G.zeros(grid3), G.zeros(grid3_coarse)])


def test_sequence_requires_finite_values(grid3_coarse):
    bad = G.Field(grid3_coarse, np.full(grid3_coarse.n, np.nan))
    with pytest.raises(DomainError):
        Dg.FieldSequence([bad])


def test_sequence_protocol(gausson3):
    seq = Dg.FieldSequence([gausson3, 2 * gausson3])
    assert len(seq) == 2 and seq[1].values[0] == 2 * math.e
    assert [f.values[0] for f in seq] == [math.e, 2 * math.e]


# --- Brezis-Lieb defect --------------------------------------------------------------


@pytest.mark.parametrize("psi", [PSI, np.square, lambda s: s * s * np.log(np.where(s != 0, np.abs(s), 1.0))])
def test_constant_sequence_has_zero_defect(gausson3, psi):
    assert Dg.brezis_lieb_defect([gausson3] * 4, psi, gausson3) == [0.0] * 4


@given(seed=st.integers(0, 2**32 - 1))
def test_zero_limit_has_zero_defect(grid3_coarse, seed):
    rng = np.random.default_rng(seed)
    seq = [G.Field(grid3_coarse, rng.normal(size=grid3_coarse.n)) for _ in range(3)]
    assert Dg.brezis_lieb_defect(seq, PSI, G.zeros(grid3_coarse)) == [0.0] * 3


def test_defect_grid_mismatch(grid3, grid3_coarse):
    with pytest.raises(DomainError):
        Dg.brezis_lieb_defect([G.zeros(grid3)], PSI, G.zeros(grid3_coarse))


def test_quadratic_defect_is_cross_term(grid3):
    # for psi = s^2 the defect is exactly 2 |int u0 bump_n|
    u0 = G.sample(grid3, U1)
    bump = G.sample(grid3, lambda r: np.exp(-(4 * r) ** 2))
    d = Dg.brezis_lieb_defect([u0 + bump], np.square, u0)[0]
    assert d == pytest.approx(2 * grid3.integrate_values(u0.values * bump.values), rel=1e-10)


def test_gausson_plus_shrinking_bumps_decays_like_volume(grid3):
    u0 = G.sample(grid3, U1)
    ns = (4, 8, 16, 32)
    seq = [u0 + G.sample(grid3, lambda r, n=n: np.exp(-(n * r) ** 2)) for n in ns]
    d = Dg.brezis_lieb_defect(seq, PSI, u0)
    # u0 is O(1) at the origin, so the defect scales with the bump volume n^{-3}
    rates = [math.log2(a / b) for a, b in zip(d, d[1:])]
    assert all(2.7 < r < 3.3 for r in rates), rates
