import math
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptlab.certificates import (BOUND_TAGS, bound_report, c_star, certify, certify_mass_bound_A,
                                certify_mass_bound_B, certify_mass_bound_C, family_threshold,
                                gamma_A, ledger_A, ledger_B, ledger_C, log_weighted_check,
                                log_weighted_integral, normalized)
from ptlab.exponents import CaseLabel, ExponentConfig, unit_sphere_area
from ptlab.measures import Dirac, PowerLaw, Tabulated, corollary_family
from ptlab.solver import MeshSpec, SolveConfig, picard_solve

A_CFG = ExponentConfig(3, 2, 3)
B_CFG = ExponentConfig(3, 1, 5)
C_CFG = ExponentConfig(2, 2, 2)


def test_ledger_A_examples():
    led = ledger_A(A_CFG, 1.0, 0.2, 12)
    assert led.b[1] == 3 and isinstance(led.b[1], F)
    assert all(c == 6 ** n for n, c in enumerate(led.c))
    assert led.closed_form_ok and led.a_star_holds()
    zero = ledger_A(A_CFG, 0.0, 0.2, 5)
    assert np.all(zero.a == 0) and zero.a_star_holds()
    with pytest.raises(ValueError):
        ledger_A(A_CFG, 1.0, 0.5, 5)  # rho >= 1/sqrt(5)
    with pytest.raises(ValueError):
        ledger_A(A_CFG, 1.0, 0.2, 0)


def test_tracked_constants():
    cfg = ExponentConfig(3, 2, 3, D1=1.0, D2=2.0)
    assert c_star(cfg).value == pytest.approx(2.0 ** -3 * 2 ** -1.5 * math.exp(-0.5))
    assert gamma_A(cfg).value == pytest.approx(2.0 ** (-3 * 3 / 2))
    n = normalized(ExponentConfig(2, 2, 2, D1=2.0, D2=6.0))
    assert (n.D1, n.D2) == (1.0, 3.0)
    assert all(k.provenance for k in (c_star(cfg), gamma_A(cfg)))


@pytest.mark.parametrize("ledger,cfg", [(ledger_A, A_CFG), (ledger_B, B_CFG), (ledger_C, C_CFG),
                                        (ledger_C, ExponentConfig(1, 3, 3))])
def test_log_space_recursion_matches_direct_recursion(ledger, cfg):
    """Run the a-recursion directly in high precision and compare with the log-space ledger."""
    led = ledger(cfg, 0.7, 0.2, 6)
    mpmath.mp.dps = 60
    a = mpmath.mpf(led.c_star.value) * mpmath.mpf("0.7")
    g = mpmath.e ** mpmath.mpf(led.gamma.log_value)
    logs = [mpmath.log(a)]
    p, q, N = mpmath.mpf(float(cfg.p)), mpmath.mpf(float(cfg.q)), cfg.N
    for n in range(6):
        b, c = mpmath.mpf(float(led.b[n])), mpmath.mpf(float(led.c[n]))
        if ledger is ledger_A:
            a = g * a ** (p * q) / ((q * b + 1) ** p * (p * q * b + p + 1))
        elif ledger is ledger_B:
            a = (g * a ** (p * q) * b ** (N * q * (p - 2) / 2 + N * (q - 2) / 2)
                 / ((p * c + 1) ** q * (p * q * c + 1)))
        else:
            a = g * a ** p * b ** (N * (p - 2) / 2) / (p * c + 1)
        logs.append(mpmath.log(a))
    mpmath.mp.dps = 15
    assert np.allclose(led.log_a, [float(x) for x in logs], rtol=1e-12)


def test_ledger_B_examples():
    led = ledger_B(B_CFG, 2.0, 0.1, 20)
    p, q = B_CFG.p, B_CFG.q
    assert led.b[1] == q * max(p, 1) and p * led.b[1] > 1
    assert all(led.c[n] == (F(5) ** n - 1) / 4 for n in range(21))
    assert led.closed_form_ok and led.a_star_holds()
    assert np.all(ledger_B(B_CFG, 0.0, 0.1, 4).a == 0)
    with pytest.raises(ValueError):
        ledger_B(A_CFG, 1.0, 0.1, 4)
    with pytest.raises(ValueError):
        ledger_B(B_CFG, 1.0, 0.4, 4)  # rho >= 1/sqrt(10)


def test_ledger_C_examples():
    for N in (1, 2, 3, 4):
        p = 1 + F(2, N)
        led = ledger_C(ExponentConfig(N, p, p), 1.0, 0.1, 30)
        assert all(led.b[n] == p ** n for n in range(31))
        assert all(led.c[n] == (p ** n - 1) / (p - 1) for n in range(31))
        assert -1 / (p - 1) == -F(N, 2)
        assert led.closed_form_ok and led.a_star_holds()
    with pytest.raises(ValueError):
        ledger_C(B_CFG, 1.0, 0.1, 4)


@st.composite
def case_A_pairs(draw):
    N = draw(st.integers(1, 4))
    p = draw(st.fractions(F(1, 2), 6, max_denominator=8))
    q = draw(st.fractions(max(p, F(1, 10)), 8, max_denominator=8))
    if p * q <= 1:
        q = q + 2 / p
    return ExponentConfig(N, p, q)


@given(case_A_pairs(), st.floats(1e-3, 1e3), st.floats(0.01, 0.44))
def test_ledger_A_property(cfg, M, rho):
    led = ledger_A(cfg, M, rho, 25)
    assert led.closed_form_ok and led.a_star_holds() and led.a_star.log_value < 0


def test_certificate_scaling_and_one_sidedness():
    c1 = certify_mass_bound_A(A_CFG, 0.1)
    c2 = certify_mass_bound_A(A_CFG, 0.2)
    assert c2.threshold / c1.threshold == pytest.approx(2 ** (3 - A_CFG.sing_u), rel=1e-12)
    assert c1.certifies(1.01 * c1.threshold) and not c1.certifies(0.99 * c1.threshold)
    b = certify_mass_bound_B(B_CFG, 0.1)
    k = 1 / (5 - 1)
    assert b.log_threshold - b.log_constant == pytest.approx(-k * math.log(math.log(50.0)))
    c = certify_mass_bound_C(C_CFG, 0.1)
    assert c.component == "u+v"
    assert c.log_threshold - c.log_constant == pytest.approx(-1.0 * math.log(math.log(50.0)))
    assert certify("A", A_CFG, 0.1).threshold == c1.threshold
    with pytest.raises(ValueError):
        certify("D", ExponentConfig(3, 1, 2), 0.1)
    with pytest.raises(ValueError):
        certify_mass_bound_A(A_CFG, 0.5)


def test_family_threshold_is_consistent_with_mass_certificate():
    ft = family_threshold(CaseLabel.A, A_CFG)
    mu, _ = corollary_family(CaseLabel.A, A_CFG, ft.c, 1.0)
    rho = ft.certificate.rho
    assert mu.ball_mass(rho) == pytest.approx(ft.certificate.threshold, rel=1e-10)
    # slower diffusion forces larger data
    slow = family_threshold(CaseLabel.A, ExponentConfig(3, 2, 3, D1=0.5, D2=0.5))
    assert slow.c < ft.c or slow.c > 0


@pytest.mark.slow
def test_certified_data_do_not_converge():
    ft = family_threshold(CaseLabel.A, A_CFG)
    mu, nu = corollary_family(CaseLabel.A, A_CFG, 1.05 * ft.c, 1.05 * ft.c)
    sc = SolveConfig(A_CFG, T=1.0, n_steps=50, mesh=MeshSpec(M=40))
    rep, _ = picard_solve(mu, nu, sc)
    assert not rep.converged


def test_log_weighted_integral_examples():
    chk = log_weighted_check(0.0, 1.0, 1.0, [2.0])
    assert chk.lhs[0] == pytest.approx(2 * math.log(2) - 1, rel=1e-12)
    assert chk.rhs[0] == pytest.approx(3 / 12 * math.log(2), rel=1e-12)
    assert chk.passed
    # at t = 2 rho^2 the margin is nonnegative for many (a, b)
    for a in (-0.9, 0.0, 2.0):
        for b in (0.1, 1.0, 4.0):
            assert log_weighted_check(a, b, 0.3, [2 * 0.09]).passed
    with pytest.raises(ValueError):
        log_weighted_check(-1.0, 1.0, 1.0, [3.0])
    with pytest.raises(ValueError):
        log_weighted_check(0.0, 0.0, 1.0, [3.0])
    with pytest.raises(ValueError):
        log_weighted_check(0.0, 1.0, 1.0, [1.5])


@given(st.floats(-0.99, 3), st.floats(0.01, 5), st.floats(0.05, 5), st.floats(2, 100))
def test_log_weighted_integral_property(a, b, rho, k):
    chk = log_weighted_check(a, b, rho, [k * rho * rho])
    assert chk.margin[0] >= -1e-10 * max(1.0, abs(chk.lhs[0]))
    # both sides scale by rho^(2(a+1))
    unit = log_weighted_check(a, b, 1.0, [k])
    scale = rho ** (2 * (a + 1))
    assert chk.lhs[0] == pytest.approx(unit.lhs[0] * scale, rel=1e-9)
    assert chk.rhs[0] == pytest.approx(unit.rhs[0] * scale, rel=1e-12)


@pytest.mark.parametrize("a,b,rho,t", [(0.5, 2.0, 0.3, 1.0), (-0.5, 0.3, 1.0, 50.0),
                                       (2.5, 4.5, 0.1, 0.5)])
def test_log_weighted_integral_against_mpmath(a, b, rho, t):
    r2 = rho * rho
    want = mpmath.quad(lambda s: (s + r2) ** a * mpmath.log(s / r2) ** b, [r2, 2 * r2, t])
    assert log_weighted_integral(a, b, rho, t) == pytest.approx(float(want), rel=1e-10)


def test_mass_bounds():
    mu, nu = corollary_family(CaseLabel.A, A_CFG, 1.0, 1.0)
    s = np.geomspace(1e-6, 1e-2, 17)
    rep = bound_report("mass-u", mu, nu, A_CFG, s, gamma=10.0)
    assert rep.lhs_rate == pytest.approx(3 - A_CFG.sing_u, rel=1e-9)
    assert rep.lhs_rate == pytest.approx(rep.rhs_rate, rel=1e-9)
    assert np.allclose(rep.ratio, rep.ratio[0], rtol=1e-10)
    assert rep.passed
    assert not bound_report("mass-u", mu, nu, A_CFG, s, gamma=1e-3).passed
    rep = bound_report("mass-v", mu, nu, A_CFG, s)
    assert rep.lhs_rate == pytest.approx(3 - A_CFG.sing_v, rel=1e-9)
    text = rep.to_csv({"x": 1})
    assert text.splitlines()[0].startswith("# config=")
    assert text.splitlines()[1] == "sigma,lhs,rhs_template,ratio"


def test_log_C_rate():
    for N in (1, 2, 3):
        p = 1 + F(2, N)
        cfg = ExponentConfig(N, p, p)
        mu, nu = corollary_family(CaseLabel.C, cfg, 1.0, 1.0)
        rep = bound_report("log-C", mu, nu, cfg, np.geomspace(1e-6, 1e-2, 17))
        assert rep.rate_kind == "log_power"
        assert rep.lhs_rate == pytest.approx(-N / 2, rel=0.05)


def _log_B_oracle(cfg, mu, nu, sigma):
    N, q = cfg.N, float(cfg.q)
    w = N - cfg.sing_u
    ell = mu.ell
    om = unit_sphere_area(N)
    F_ = lambda L: (mu.c * om * w ** (ell - 1) * mpmath.gammainc(1 - ell, w * L)
                    * mpmath.e ** (w * L)) ** q
    X = -math.log(sigma)
    return float(mpmath.quad(F_, [X, 2 * X, 10 * X, mpmath.inf])) + nu.ball_mass(sigma)


def test_log_B_integral_against_mpmath():
    mu, nu = corollary_family(CaseLabel.B, B_CFG, 1.0, 1.0)
    s = np.geomspace(1e-6, 1e-2, 5)
    rep = bound_report("log-B", mu, nu, B_CFG, s)
    assert not rep.divergent
    for sig, got in zip(s, rep.lhs):
        assert got == pytest.approx(_log_B_oracle(B_CFG, mu, nu, sig), rel=1e-3)
    assert rep.lhs_rate == pytest.approx(-1 / 4, rel=0.05)


def test_dirac_diverges_in_case_D():
    cfg = ExponentConfig(3, 1, 2)
    s = np.geomspace(1e-4, 1e-1, 7)
    for gamma in (1.0, 1e6, 1e300):
        rep = bound_report("integral-D", Dirac(3, 1.0), Dirac(3, 1.0), cfg, s, gamma=gamma)
        assert rep.divergent and rep.passed is False
    assert np.all(np.isinf(rep.lhs))


def test_modulated_data_converge_in_cases_D_and_E():
    s = np.geomspace(1e-8, 1, 40)
    h = Tabulated(s, np.abs(np.log(s / 2)) ** -0.8)
    sig = np.geomspace(1e-4, 1e-1, 7)
    for case, cfg, tags in [(CaseLabel.D, ExponentConfig(3, 1, 2), ("integral-D", "integral-unit")),
                            (CaseLabel.E, ExponentConfig(2, 1, 2), ("integral-E", "integral-unit"))]:
        mu, nu = corollary_family(case, cfg, 1.0, 0.5, h=h, eps=1.0)
        for tag in tags:
            rep = bound_report(tag, mu, nu, cfg, sig, gamma=1e6)
            assert not rep.divergent and np.all(np.isfinite(rep.lhs)) and rep.passed
            assert np.all(np.diff(rep.lhs) >= 0)


def test_bound_report_validation():
    mu, nu = corollary_family(CaseLabel.A, A_CFG, 1.0, 1.0)
    s = np.geomspace(1e-4, 1e-2, 5)
    with pytest.raises(ValueError):
        bound_report("log-B", mu, nu, A_CFG, s)
    with pytest.raises(ValueError):
        bound_report("nonsense", mu, nu, A_CFG, s)
    with pytest.raises(ValueError):
        bound_report("mass-u", mu, nu, A_CFG, s[::-1])
    with pytest.raises(ValueError):
        bound_report("mass-u", mu, nu, A_CFG, np.array([0.5, 2.0]))
    assert len(BOUND_TAGS) == 7
