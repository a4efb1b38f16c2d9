import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import gausson_dirichlet, gausson_int_G, gausson_mass, unit_mass
from scalarfield import DomainError, EmptyAdmissibleSet, cubic_quintic, logarithmic
from scalarfield import grid as G
from scalarfield import pohozaev as P

LOG = logarithmic()
CQ = cubic_quintic(3, 4.0, 0.1)

# closed-form values for the Gausson doubled in amplitude, N = 3
D2 = 4 * gausson_dirichlet(3)
Q2 = 4 * (gausson_int_G(3) + math.log(2) * gausson_mass(3))


def field(grid, f):
    return G.sample(grid, f)


def test_closed_form_oracles_match_quoted_digits():
    assert gausson_dirichlet(3) == pytest.approx(61.716, abs=2e-3)
    assert gausson_int_G(3) == pytest.approx(10.286, abs=1e-3)
    assert Q2 == pytest.approx(155.21, abs=2e-2)


# --- energy -----------------------------------------------------------------------


def test_gausson_energy(gausson3):
    rep = P.energy(gausson3, LOG)
    assert rep.J_eps == pytest.approx(math.e**2 * math.pi**1.5 / 2, rel=1e-3)
    assert abs(rep.pohozaev_residual) <= 1e-2
    assert rep.on_manifold()


def test_zero_energy(grid3_coarse):
    rep = P.energy(G.zeros(grid3_coarse), LOG, 0.3)
    assert (rep.dirichlet, rep.int_G_plus, rep.int_G_minus_eps, rep.J_eps, rep.pohozaev_residual) == (0, 0, 0, 0, 0)


def test_doubled_gausson_potential(gausson3):
    rep = P.energy(2 * gausson3, LOG)
    assert rep.Q == pytest.approx(Q2, rel=1e-3)
    assert rep.dirichlet == pytest.approx(D2, rel=1e-3)


@pytest.mark.parametrize("eps", [-0.01, 1.0])
def test_energy_eps_domain(gausson3, eps):
    with pytest.raises(DomainError):
        P.energy(gausson3, LOG, eps)


@given(amp=st.floats(0.05, 5), width=st.floats(0.3, 3), eps=st.floats(0, 0.9),
       which=st.sampled_from(["log", "cq"]))
def test_report_identity(grid3_coarse, amp, width, eps, which):
    nl = LOG if which == "log" else CQ
    rep = P.energy(field(grid3_coarse, lambda r: amp * np.exp(-(r / width) ** 2)), nl, eps)
    assert rep.J_eps == 0.5 * rep.dirichlet + rep.int_G_minus_eps - rep.int_G_plus
    assert rep.pohozaev_residual == rep.dirichlet - 6 * (rep.int_G_plus - rep.int_G_minus_eps)
    assert rep.dirichlet >= 0 and rep.int_G_plus >= 0 and rep.int_G_minus_eps >= 0


# --- projection ---------------------------------------------------------------------


def test_gausson_projection_factor_is_one(gausson3):
    assert P.projection_factor(gausson3, LOG) == pytest.approx(1.0, abs=1e-4)


def test_projection_of_manifold_member_is_unchanged(gausson3):
    v = P.project(gausson3, LOG)
    assert np.max(np.abs(v.values - gausson3.values)) < 1e-3


def test_doubled_gausson_projection_factor(gausson3):
    r = P.projection_factor(2 * gausson3, LOG)
    assert r == pytest.approx(math.sqrt(6 * Q2 / D2), rel=1e-3)
    assert r == pytest.approx(1.942, abs=2e-3)


def test_projection_errors(grid3, grid3_coarse):
    with pytest.raises(DomainError):
        P.project(G.zeros(grid3_coarse), LOG)
    tiny = field(grid3, lambda r: 1e-3 * np.exp(-r * r))  # G < 0 near 0 for positive mass
    with pytest.raises(EmptyAdmissibleSet):
        P.project(tiny, CQ)
    with pytest.raises(EmptyAdmissibleSet):
        P.reduced_level(tiny, CQ)


# admissible (Q > 0) test fields: the logarithmic potential needs values above 1,
# the cubic-quintic one needs wide plateaus of height near 1
TEST_PROFILES = {
    "gaussian": lambda r: 5.0 * np.exp(-0.5 * r * r),
    "sech2": lambda r: 6.0 / np.cosh(r) ** 2,
    "bump": lambda r: 8.0 * np.clip(1 - (r / 3) ** 2, 0, None) ** 3,
    "flat": lambda r: 4.0 * np.exp(-(r / 2.5) ** 8),
}
CQ_PROFILES = {
    "flat3": lambda r: 0.9 * np.exp(-(r / 3) ** 8),
    "flat4": lambda r: 0.9 * np.exp(-(r / 4) ** 8),
}
PROJECTION_CASES = ([(LOG, eps, f) for eps in (0.0, 0.25) for f in TEST_PROFILES.values()]
                    + [(CQ, eps, f) for eps in (0.0, 0.25) for f in CQ_PROFILES.values()])


@pytest.mark.parametrize("nl,eps,profile", PROJECTION_CASES)
def test_projection_properties(grid3, nl, eps, profile):
    u = field(grid3, profile)
    v = P.project(u, nl, eps)
    rep = P.energy(v, nl, eps)
    assert abs(rep.pohozaev_residual) <= 1e-3 * rep.dirichlet
    w = P.project(v, nl, eps)
    assert np.max(np.abs(w.values - v.values)) <= 1e-3 * np.max(np.abs(v.values))
    assert P.reduced_level(u, nl, eps) == pytest.approx(rep.J_eps, rel=2e-3)


# --- reduced level ---------------------------------------------------------------------


def test_gausson_reduced_level(gausson3):
    assert P.reduced_level(gausson3, LOG) == pytest.approx(gausson_dirichlet(3) / 3, rel=1e-3)


def test_doubled_gausson_reduced_level(gausson3):
    expected = D2**1.5 / (6 * Q2) ** 0.5 / 3
    assert expected == pytest.approx(42.37, abs=1e-2)
    lvl = P.reduced_level(2 * gausson3, LOG)
    assert lvl == pytest.approx(expected, rel=1e-3)
    assert lvl > P.gausson_level(3)


@pytest.mark.parametrize("name", sorted(TEST_PROFILES))
@pytest.mark.parametrize("lam", [0.5, 0.8, 1.25, 2.0])
def test_reduced_level_dilation_invariant(grid3, name, lam):
    u = field(grid3, TEST_PROFILES[name])
    base = P.reduced_level(u, LOG)
    assert P.reduced_level(G.dilate(u, lam), LOG) == pytest.approx(base, rel=1e-3)


@pytest.mark.parametrize("name", sorted(TEST_PROFILES))
@given(e1=st.floats(0, 0.95), e2=st.floats(0, 0.95))
def test_reduced_level_monotone_in_eps(grid3_coarse, name, e1, e2):
    u = field(grid3_coarse, TEST_PROFILES[name])
    lo, hi = sorted((e1, e2))
    assert P.reduced_level(u, LOG, lo) >= P.reduced_level(u, LOG, hi) * (1 - 1e-13)


def test_level_from_parts_matches_gausson():
    assert P.level_from_parts(3, gausson_dirichlet(3), gausson_int_G(3)) == pytest.approx(
        P.gausson_level(3), rel=1e-12)


# --- sphere normalization ----------------------------------------------------------------


def test_normalize_gausson(gausson3):
    v = P.normalize_to_sphere(gausson3)
    assert G.dirichlet(v) == pytest.approx(1.0, abs=1e-3)
    w = P.normalize_to_sphere(v)
    assert np.max(np.abs(w.values - v.values)) <= 1e-3 * np.max(np.abs(v.values))


def test_normalize_unit_field_unchanged(grid3):
    u = field(grid3, TEST_PROFILES["gaussian"])
    u = u * (1 / math.sqrt(G.dirichlet(u)))
    assert P.normalize_to_sphere(u) is u or np.allclose(P.normalize_to_sphere(u).values, u.values, atol=1e-12)


def test_normalize_zero(grid3_coarse):
    with pytest.raises(DomainError):
        P.normalize_to_sphere(G.zeros(grid3_coarse))


# --- sharp constant ---------------------------------------------------------------------


def test_sharp_constant_examples():
    lvl3 = P.gausson_level(3)
    assert P.sharp_constant(3, lvl3) == pytest.approx(6 * 9 * lvl3**2, rel=1e-12)
    assert P.sharp_constant(3, lvl3) == pytest.approx(6 * 2.25 * math.e**4 * math.pi**3, rel=1e-12)
    assert P.sharp_constant(3, lvl3) == pytest.approx(2.285e4, rel=1e-3)
    assert P.gausson_level(4) == pytest.approx(99.12, abs=1e-2)
    assert P.sharp_constant(4, P.gausson_level(4)) == pytest.approx(1585.9, abs=0.1)
    assert P.sharp_constant(3, 1.0) == pytest.approx(54.0, rel=1e-14)


@pytest.mark.parametrize("level", [0.0, -1.0])
def test_sharp_constant_domain(level):
    with pytest.raises(DomainError):
        P.sharp_constant(3, level)


@given(a=st.floats(1e-6, 1e6), b=st.floats(1e-6, 1e6))
def test_sharp_constant_increasing(a, b):
    if a < b:
        assert P.sharp_constant(3, a) < P.sharp_constant(3, b)


# --- logarithmic Sobolev bridge ----------------------------------------------------------


def gaussian_family(grid, lam):
    """``lam^{3/2} u(lam x)`` for the Gaussian u, normalized under the grid quadrature."""
    return unit_mass(field(grid, lambda r: np.exp(-0.5 * (lam * r) ** 2)))


def test_alpha_of_normalized_gausson(gausson3):
    assert P.optimal_alpha(unit_mass(gausson3)) == pytest.approx(1 + 0.75 * math.log(math.pi), abs=1e-4)


def test_alpha_with_vanishing_log_moment(grid3):
    # int u^2 log u = -(3/4) log(pi e) + (3/2) log lam vanishes at lam = sqrt(pi e)
    u = gaussian_family(grid3, math.sqrt(math.pi * math.e))
    assert P.optimal_alpha(u) == pytest.approx(0.25, abs=1e-5)


@pytest.mark.parametrize("lam", [0.5, 0.8, 2.0])
def test_alpha_shift_under_mass_preserving_dilation(gausson3, lam):
    u = unit_mass(gausson3)
    # resampling moves the mass by ~1e-5; renormalizing shifts alpha by the same order
    v = unit_mass(lam**1.5 * G.dilate(u, lam))
    assert P.optimal_alpha(v) == pytest.approx(P.optimal_alpha(u) - 1.5 * math.log(lam), abs=1e-4)


def test_alpha_requires_unit_mass(gausson3):
    with pytest.raises(DomainError, match="41.1"):
        P.optimal_alpha(gausson3)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 3.0])
def test_gaussians_saturate_log_sobolev(grid3, lam):
    assert abs(P.log_sobolev_gap(gaussian_family(grid3, lam))) <= 1e-4


@pytest.mark.parametrize("profile", [lambda r: np.clip(1 - r * r, 0, None) ** 2, lambda r: 1 / np.cosh(r),
                                     lambda r: np.exp(-r)])
def test_log_sobolev_strict_off_gaussians(grid3, profile):
    assert P.log_sobolev_gap(unit_mass(field(grid3, profile))) > 1e-3


def test_log_sobolev_gap_dilation_independent(grid3):
    u = unit_mass(field(grid3, lambda r: 1 / np.cosh(r)))
    base = P.log_sobolev_gap(u)
    for lam in (0.7, 1.5):
        assert P.log_sobolev_gap(unit_mass(lam**1.5 * G.dilate(u, lam))) == pytest.approx(base, abs=1e-4)


def test_log_sobolev_requires_unit_mass(gausson3):
    with pytest.raises(DomainError):
        P.log_sobolev_gap(gausson3)
