import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from ptlab.kernel import (DomainTooSmallError, RadialField, ball_cover, constant_field,
                          diffusion_comparison_margin, gauss, gauss_total_mass, heat_apply,
                          jensen_check, ball_heat_lower_check, ball_heat_constant, gaussian_power_bound,
                          make_mesh, propagate, radial_kernel)


@pytest.fixture(scope="module", params=[1, 2, 3])
def mesh(request):
    return make_mesh(request.param, Rmax=16.0, M=48)


def test_gauss_examples():
    assert gauss(0.0, 1 / (4 * math.pi), 2) == pytest.approx(1.0, rel=1e-15)
    assert gauss(-0.7, 0.3, 3) == gauss(0.7, 0.3, 3)
    with pytest.raises(ValueError):
        gauss(1.0, 0.0, 2)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
@pytest.mark.parametrize("t", [1e-4, 0.01, 1.0, 100.0])
def test_gauss_normalization(N, t):
    assert abs(gauss_total_mass(t, N) - 1) < 1e-12


def _angular_oracle(r, rp, tau, N):
    """Average of the N-dimensional Gaussian over the sphere |y| = rp, times the sphere area."""
    c = (4 * math.pi * tau) ** (-N / 2)
    g = lambda th: math.exp(-(r * r + rp * rp - 2 * r * rp * math.cos(th)) / (4 * tau))
    if N == 1:
        return c * (g(0.0) + g(math.pi))
    if N == 2:
        return c * integrate.quad(g, 0, math.pi, epsrel=1e-13)[0] * 2
    w = lambda th: g(th) * math.sin(th) ** (N - 2)
    area_lower = 2 * math.pi ** ((N - 1) / 2) / math.gamma((N - 1) / 2)
    return c * area_lower * integrate.quad(w, 0, math.pi, epsrel=1e-13)[0]


@pytest.mark.parametrize("N", [1, 2, 3, 5])
@pytest.mark.parametrize("r,rp,tau", [(0.3, 0.5, 0.1), (2.0, 1.7, 0.05), (0.0, 0.4, 1.0),
                                      (5.0, 5.1, 0.01), (1e-3, 2e-3, 1e-6)])
def test_radial_kernel_against_angular_quadrature(N, r, rp, tau):
    got = float(radial_kernel(r, rp, tau, N))
    want = _angular_oracle(r, rp, tau, N)
    assert got == pytest.approx(want, rel=1e-10, abs=1e-300)


def test_constant_is_preserved(mesh):
    for tau in (1e-7, 1e-3, 0.5, 4.0):
        out = propagate(constant_field(mesh, 2.5), tau)
        assert np.max(np.abs(out.values - 2.5)) < 1e-12


def test_atom_becomes_gaussian(mesh):
    f = RadialField(mesh, np.zeros(mesh.size), atom=0.7)
    out = propagate(f, 0.3, Dcoef=2.0)
    assert np.allclose(out.values, 0.7 * gauss(mesh.nodes, 0.6, mesh.N), rtol=1e-14)


def test_gaussian_approximant_of_dirac(mesh):
    N = mesh.N
    f = RadialField(mesh, gauss(mesh.nodes, 0.02, N))
    out = propagate(f, 0.5)
    sel = mesh.nodes < 8
    want = gauss(mesh.nodes, 0.52, N)
    assert np.max(np.abs(out.values - want)[sel]) / want.max() < 1e-9


def _random_field(mesh, rng):
    a = rng.uniform(0.2, 3.0)
    w = rng.uniform(0.05, 2.0)
    c = rng.uniform(0.0, 0.5)
    vals = a * np.exp(-mesh.nodes ** 2 / w) * (1 + 0.3 * np.cos(3 * mesh.nodes)) + c
    return RadialField(mesh, vals)


def test_semigroup_and_mass(mesh):
    rng = np.random.default_rng(11 + mesh.N)
    for _ in range(10):
        f = _random_field(mesh, rng)
        t = rng.uniform(0.01, 1.0)
        s = rng.uniform(0.1, 0.9) * t
        once = propagate(f, t).values
        twice = propagate(propagate(f, s), t - s).values
        sel = mesh.nodes < mesh.Rmax / 2
        assert np.max(np.abs(once - twice)[sel]) / np.max(once[sel]) < 1e-8
        # a decaying field keeps its mass
        g = f.with_values(np.exp(-mesh.nodes ** 2))
        assert propagate(g, t).ball_mass(mesh.Rmax) == pytest.approx(g.ball_mass(mesh.Rmax),
                                                                     rel=1e-8)


def test_nonnegativity(mesh):
    vals = np.where(mesh.nodes < 0.5, 1.0, 0.0)
    out = propagate(RadialField(mesh, vals), 1e-3)
    assert out.values.min() >= 0


def test_domain_too_small():
    mesh = make_mesh(2, Rmax=2.0, M=20)
    f = RadialField(mesh, np.exp(-mesh.nodes ** 2 / 4))
    with pytest.raises(DomainTooSmallError):
        propagate(f, 5.0)


def test_heat_apply_against_quadrature_oracle():
    # S(t) of a power-law density in N = 3, compared at r = 0 with a direct integral
    mesh = make_mesh(3, Rmax=16.0, M=80, r_min=1e-4)
    a = 1.2
    vals = mesh.nodes ** (-a) * np.exp(-mesh.nodes ** 2)
    f = RadialField(mesh, vals)
    t = 0.3
    got = heat_apply(f, t, [0.0, 0.5])
    dens = lambda r: r ** (-a) * math.exp(-r * r)
    for rr, g in zip([0.0, 0.5], got):
        k = lambda r: float(radial_kernel(rr, r, t, 3)) * dens(r) * r * r
        want = integrate.quad(k, 0, 1, epsrel=1e-12)[0] + integrate.quad(k, 1, 20, epsrel=1e-12)[0]
        # the discrete field interpolates the density, so agreement is at the mesh's accuracy
        assert g == pytest.approx(want, rel=1e-5)


def test_jensen(mesh):
    rng = np.random.default_rng(3)
    f = _random_field(mesh, rng)
    radii = np.linspace(0, 6, 13)
    r1 = jensen_check(f, 0.4, 1.0, radii)
    assert np.allclose(r1.lhs, r1.rhs, rtol=1e-13)
    c = jensen_check(constant_field(mesh, 3.0), 0.4, 2.0, radii)
    assert np.allclose(c.lhs, 3.0) and np.allclose(c.rhs, 3.0)
    pw = RadialField(mesh, np.minimum(mesh.nodes ** -0.8, 50.0) * np.exp(-mesh.nodes))
    for t in rng.uniform(0.01, 3.0, 4):
        rep = jensen_check(pw, t, 3.0, radii)
        assert rep.passed and rep.worst_margin > 0
    with pytest.raises(ValueError):
        jensen_check(f, 0.4, 0.5, radii)


def test_ball_heat_lower(mesh):
    N = mesh.N
    C = ball_heat_constant(N)
    assert C == pytest.approx(2 ** (-N / 2) * math.exp(-0.5))
    assert C * 2 ** (N / 2) <= 1  # x = 0 reduces to e^(-1/2) <= 1
    rho = 0.5
    unif = RadialField(mesh, np.where(mesh.nodes < rho, 1.0, 0.0))
    mesh_b = make_mesh(N, Rmax=16.0, M=48, breaks=(rho,))
    unif = RadialField(mesh_b, np.where(mesh_b.nodes < rho, 1.0, 0.0))
    rep = ball_heat_lower_check(rho, rho * rho, unif, np.linspace(0, 5, 21))
    assert rep.passed
    atom = RadialField(mesh, np.zeros(mesh.size), atom=1.0)
    rep = ball_heat_lower_check(rho, 0.5, atom, [0.0, 1.0, 3.0])
    assert np.allclose(rep.lhs, gauss(np.array([0.0, 1.0, 3.0]), 0.5, N))
    assert rep.passed
    with pytest.raises(ValueError):
        ball_heat_lower_check(rho, 0.1, unif, [0.0])


def _gaussian_power_oracle_1d(alpha, beta, L, x, s, t):
    f = lambda y: gauss(x - y, t - s, 1) * gauss(y, (s + L) / alpha, 1) ** beta
    w = math.sqrt(t - s) + math.sqrt((s + L) / alpha)
    return integrate.quad(f, -60 * w, 60 * w, points=[0.0, x], epsrel=1e-12, limit=400)[0]


@pytest.mark.parametrize("alpha,beta,L,x,s,t", [
    (1.0, 1.0, 0.0, 0.3, 0.2, 1.0), (2.0, 0.5, 0.1, 1.0, 0.5, 0.7),
    (0.3, 3.0, 0.0, -0.4, 0.1, 2.0), (4.0, 2.0, 1.0, 2.0, 1.0, 1.5)])
def test_gaussian_power_closed_form_matches_quadrature(alpha, beta, L, x, s, t):
    lhs, rhs = gaussian_power_bound(alpha, beta, L, [x], s, t, 1)
    assert lhs == pytest.approx(_gaussian_power_oracle_1d(alpha, beta, L, x, s, t), rel=1e-9)
    assert lhs >= rhs


def test_gaussian_power_equality_cases():
    lhs, rhs = gaussian_power_bound(1.0, 1.0, 0.4, [0.3, 0.1], 0.2, 1.0, 2)
    assert lhs == pytest.approx(gauss(math.hypot(0.3, 0.1), 1.4, 2), rel=1e-14)
    assert lhs == pytest.approx(rhs, rel=1e-14)
    # alpha beta = 1: the ratio factor is 1, and lhs equals rhs exactly
    lhs, rhs = gaussian_power_bound(2.0, 0.5, 0.3, [0.5], 0.4, 1.2, 3)
    assert lhs == pytest.approx(rhs, rel=1e-14)
    with pytest.raises(ValueError):
        gaussian_power_bound(1.0, 1.0, 0.0, [0.0], 1.0, 1.0, 1)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0, 5), st.floats(0, 5),
       st.floats(0.01, 0.99), st.floats(0.01, 10), st.integers(1, 4))
def test_gaussian_power_property(alpha, beta, L, r, frac, t, N):
    lhs, rhs = gaussian_power_bound(alpha, beta, L, [r], frac * t, t, N)
    assert lhs >= rhs * (1 - 1e-12)


@given(st.floats(0, 10), st.floats(1e-3, 10), st.floats(1, 5), st.integers(1, 4))
def test_diffusion_comparison(r, t, Dp, N):
    for Di in (1.0, 0.5 * (1 + Dp), Dp):
        assert diffusion_comparison_margin(r, t, Di, Dp, N) >= -1e-15 * gauss(0.0, t, N)


def test_ball_cover():
    plan = ball_cover(1.0, 1)
    assert plan.m <= 3 and plan.verify()
    assert set(np.round(plan.centers[:, 0], 12)) >= {-2.0, 0.0, 2.0} or plan.m <= 3
    for k, N in [(1.0, 2), (math.sqrt(10), 2), (2.5, 3), (3.0, 1)]:
        plan = ball_cover(k, N)
        assert plan.verify()
        assert plan.m >= k ** N
    with pytest.raises(ValueError):
        ball_cover(0.5, 2)
