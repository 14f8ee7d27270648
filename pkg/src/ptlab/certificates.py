"""Recursive lower bounds with explicit constants, and trace-bound evaluators.

A solution on [0, 1] (after rescaling to T = 1, D = 1) forces lower bounds of
the form a_n * (time factor)^{b_n} * (Gaussian)^{c_n} that improve with n.
Since a_n >= (a_* M)^{A^n} with A = pq (or p), the bounds can only stay
finite if a_* M times the time factor is at most 1.  That turns into an upper
bound on the ball mass M, i.e. a nonexistence certificate.

All constants are carried as logarithms; a_* is typically far below the
smallest float.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate

from .exponents import CaseLabel, ExponentConfig, classify, unit_sphere_area
from .measures import RadialMeasure, sup_ball_mass

LOG_4PI = math.log(4 * math.pi)


def _log(x) -> float:
    """log of a positive int, Fraction or float without float overflow."""
    if isinstance(x, Fraction):
        return math.log(x.numerator) - math.log(x.denominator)
    return math.log(x)


def _num(x):
    return str(x) if isinstance(x, Fraction) else float(x)


@dataclass(frozen=True)
class TrackedConstant:
    name: str
    log_value: float
    provenance: str

    @property
    def value(self) -> float:
        try:
            return math.exp(self.log_value)
        except OverflowError:
            return math.inf

    def to_dict(self) -> dict:
        return {"name": self.name, "log_value": self.log_value, "value": self.value,
                "provenance": self.provenance}


def normalized(cfg: ExponentConfig) -> ExponentConfig:
    """Same exponents with diffusion rescaled so that min(D1, D2) = 1."""
    return cfg.with_diffusion(cfg.D1 / cfg.D, cfg.D2 / cfg.D)


def _log_Dp(cfg: ExponentConfig) -> float:
    return math.log(cfg.Dp / cfg.D)


def c_star(cfg: ExponentConfig) -> TrackedConstant:
    N = cfg.N
    lv = -N * _log_Dp(cfg) - 0.5 * N * math.log(2) - 0.5
    return TrackedConstant(
        "c_star", lv,
        "ball lower bound 2^(-N/2) e^(-1/2) for the Gaussian at time 2 rho^2, "
        "times (D')^(-N/2) twice: once to start the comparison and once to propagate")


def gamma_A(cfg: ExponentConfig) -> TrackedConstant:
    p = float(cfg.p)
    lv = -cfg.N * (p + 1) / 2 * _log_Dp(cfg)
    return TrackedConstant(
        "gamma_1", lv,
        "(D')^(-N/2) per Duhamel step, two steps with the first raised to p; "
        "Jensen against the Gaussian probability kernel contributes 1")


def _log_A1(cfg: ExponentConfig) -> float:
    N, p = cfg.N, float(cfg.p)
    return (-N / 2 * _log_Dp(cfg) - N * (p - 1) / 2 * LOG_4PI - N * math.log(p)
            + N * math.log(min(1.0, p)) - math.log(4) - math.log(max(2 - N * (p - 1) / 2, 1.0)))


def gamma_B(cfg: ExponentConfig) -> TrackedConstant:
    N, p, q = cfg.N, float(cfg.p), float(cfg.q)
    e = N * (q - 2) / 2
    log_kappa = e * math.log(min(p, 1.0)) if e >= 0 else e * math.log(max(p, 1.0))
    lv = (-N / 2 * _log_Dp(cfg) + q * _log_A1(cfg) - N * (q - 1) / 2 * LOG_4PI
          - N * math.log(q) + log_kappa - math.log(2))
    return TrackedConstant(
        "gamma_2", lv,
        "u-step: (D')^(-N/2), Gaussian-power convolution bound with alpha = b, beta = p "
        "(factor (4 pi)^(-N(p-1)/2) p^(-N) min(1,p)^N), log-weighted time integral "
        "1/(4 max(2 - N(p-1)/2, 1)); v-step: (D')^(-N/2), convolution bound with "
        "alpha = max(pb,1), beta = q (factor (4 pi)^(-N(q-1)/2) q^(-N) kappa), "
        "time integral of (s+rho^2)^(-1) log^k bounded by log^(k+1)/(2(k+1))")


def gamma_C(cfg: ExponentConfig) -> TrackedConstant:
    N, p = cfg.N, float(cfg.p)
    lv = (-N / 2 * _log_Dp(cfg) + (1 - p) * math.log(2) - LOG_4PI - N * math.log(p)
          - math.log(2))
    return TrackedConstant(
        "gamma_3", lv,
        "(D')^(-N/2), convexity 2^(1-p) for (U+V)^p, convolution bound with "
        "beta = p = 1 + 2/N (factor (4 pi)^(-1) p^(-N)), time integral factor 1/2")


# ---------------------------------------------------------------- ledgers


@dataclass
class IterationLedger:
    case: CaseLabel
    cfg: ExponentConfig
    M: float
    rho: float
    A: float
    log_a: np.ndarray  # log a_n, -inf for the trivial ledger
    norm_log_a: np.ndarray  # log a_n / A^n
    b: list
    c: list
    c_star: TrackedConstant
    gamma: TrackedConstant
    a_star: TrackedConstant
    majorization: dict
    closed_form_ok: bool

    @property
    def a(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_a)

    def a_star_holds(self, slack: float = 1e-9) -> bool:
        """a_n >= (a_* M)^(A^n) for every computed n, compared after dividing logs by A^n."""
        if self.M <= 0:
            return bool(np.all(np.isneginf(self.log_a)))
        floor = self.a_star.log_value + math.log(self.M)
        return bool(np.all(self.norm_log_a >= floor - slack * max(1.0, abs(floor))))

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "cfg": self.cfg.to_dict(),
            "M": self.M,
            "rho": self.rho,
            "n_max": len(self.b) - 1,
            "log_a": [float(x) for x in self.log_a],
            "b": [_num(x) for x in self.b],
            "c": [_num(x) for x in self.c],
            "constants": [k.to_dict() for k in (self.c_star, self.gamma, self.a_star)],
            "majorization": self.majorization,
            "closed_form_ok": self.closed_form_ok,
            "a_star_holds": self.a_star_holds(),
        }


def _same(x, y, exact: bool) -> bool:
    if exact:
        return Fraction(x) == Fraction(y)
    return abs(float(x) - float(y)) <= 1e-12 * max(1.0, abs(float(y)))


def _check_common(M, rho, n_max, rho_max):
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if M < 0:
        raise ValueError("ball mass must be nonnegative")
    if not (0 < rho < rho_max):
        raise ValueError(f"rho must lie in (0, {rho_max:.6g})")


def _run(case, cfg, M, rho, n_max, A, log_gamma, step, b0, c0, closed, K0, K1, cs, gam):
    """Shared driver: step(b, c) -> (log factor besides gamma and a^A, b', c')."""
    logA = _log(A)
    Af = float(A)
    b, c = [b0], [c0]
    if M > 0:
        e = [cs.log_value + math.log(M)]
    else:
        e = [-math.inf]
    for n in range(n_max):
        extra, bn, cn = step(b[-1], c[-1])
        # e_{n+1} = e_n + (log gamma + extra) / A^(n+1), kept in log space
        e.append(e[-1] + (log_gamma + extra) * math.exp(-(n + 1) * logA))
        b.append(bn)
        c.append(cn)
    e = np.array(e)
    with np.errstate(over="ignore", invalid="ignore"):
        log_a = e * np.exp(np.arange(n_max + 1) * logA)
    C = max(K0, 0.0) + K1
    log_as = cs.log_value - C * Af / (Af - 1) ** 2
    a_star = TrackedConstant(
        "a_star", log_as,
        f"log-linear majorization log a_(n+1) >= A log a_n - C(n+1) with C = {C:.6g}, "
        "summed geometrically: log a_* = log c_* - C A/(A-1)^2")
    ok = all(closed(n, b[n], c[n]) for n in range(n_max + 1))
    return IterationLedger(case, cfg, float(M), float(rho), Af, log_a, e, b, c, cs, gam,
                           a_star, {"K0": K0, "K1": K1, "C": C}, ok)


def ledger_A(cfg: ExponentConfig, M: float, rho: float, n_max: int) -> IterationLedger:
    """Power-of-time recursion: from U >= a t^b G^c to the next (a, b, c).

    Valid in every case; the mass bound it yields is only useful below the
    critical singularity (case A).
    """
    _check_common(M, rho, n_max, 1 / math.sqrt(5))
    p, q, ex = cfg.p, cfg.q, cfg.exact
    A = p * q
    Af, pf, qf = float(A), float(p), float(q)
    cs, gam = c_star(cfg), gamma_A(cfg)

    def step(b, c):
        extra = -pf * _log(q * b + 1) - _log(A * b + p + 1)
        return extra, A * b + p + 1, A * c

    def closed(n, b, c):
        bn = (A ** n - 1) * (Fraction(p + 1) if ex else p + 1) / (A - 1)
        return _same(b, bn, ex) and _same(c, A ** n, ex)

    K1 = (pf + 1) * math.log(Af)
    K0 = (-gam.log_value + pf * math.log(1 + qf * (pf + 1) / (Af - 1))
          + math.log((pf + 1) * Af / (Af - 1)))
    zero, one = (Fraction(0), Fraction(1)) if ex else (0.0, 1.0)
    return _run(CaseLabel.A, cfg, M, rho, n_max, A, gam.log_value, step, zero, one,
                closed, K0, K1, cs, gam)


def _require(cfg, case):
    got = classify(cfg)
    if got is not case:
        raise ValueError(f"configuration is in case {got.value}, not {case.value}")


def ledger_B(cfg: ExponentConfig, M: float, rho: float, n_max: int) -> IterationLedger:
    """Log-growth recursion on the v-component at the critical line with p < q."""
    _require(cfg, CaseLabel.B)
    _check_common(M, rho, n_max, 1 / math.sqrt(10))
    N, p, q, ex = cfg.N, cfg.p, cfg.q, cfg.exact
    A = p * q
    Af, pf, qf = float(A), float(p), float(q)
    E = N * qf * (pf - 2) / 2 + N * (qf - 2) / 2
    cs, gam = c_star(cfg), gamma_B(cfg)

    def step(b, c):
        extra = E * _log(b) - qf * _log(p * c + 1) - _log(A * c + 1)
        return extra, q * max(p * b, 1), A * c + 1

    one = Fraction(1) if ex else 1.0
    b1 = q * max(p, one)

    def closed(n, b, c):
        cn = (A ** n - 1) / (A - 1) if not ex else Fraction(A ** n - 1) / (A - 1)
        if n == 0:
            return _same(b, 1, ex) and _same(c, 0, ex)
        return _same(b, A ** (n - 1) * b1, ex) and _same(c, cn, ex)

    neg = abs(E) if E < 0 else 0.0
    K1 = (qf + 1 + neg) * math.log(Af)
    K0 = (-gam.log_value + neg * max(0.0, math.log(float(b1) / Af))
          + qf * math.log(1 + pf / (Af - 1)) + math.log(Af / (Af - 1)))
    zero = Fraction(0) if ex else 0.0
    return _run(CaseLabel.B, cfg, M, rho, n_max, A, gam.log_value, step, one, zero,
                closed, K0, K1, cs, gam)


def ledger_C(cfg: ExponentConfig, M: float, rho: float, n_max: int) -> IterationLedger:
    """Recursion on W = U + V at the critical line with p = q = 1 + 2/N."""
    _require(cfg, CaseLabel.C)
    _check_common(M, rho, n_max, 1 / math.sqrt(10))
    N, p, ex = cfg.N, cfg.p, cfg.exact
    pf = float(p)
    E = N * (pf - 2) / 2
    cs, gam = c_star(cfg), gamma_C(cfg)

    def step(b, c):
        extra = E * _log(b) - _log(p * c + 1)
        return extra, p * b, p * c + 1

    def closed(n, b, c):
        cn = Fraction(p ** n - 1) / (p - 1) if ex else (p ** n - 1) / (p - 1)
        return _same(b, p ** n, ex) and _same(c, cn, ex)

    neg = abs(E) if E < 0 else 0.0
    K1 = (1 + neg) * math.log(pf)
    K0 = -gam.log_value + math.log(pf / (pf - 1))
    one, zero = (Fraction(1), Fraction(0)) if ex else (1.0, 0.0)
    return _run(CaseLabel.C, cfg, M, rho, n_max, p, gam.log_value, step, one, zero,
                closed, K0, K1, cs, gam)


# ---------------------------------------------------------------- certificates


@dataclass(frozen=True)
class MassCertificate:
    """Ball masses above `threshold` at radius rho are impossible on [0, 1]."""

    case: CaseLabel
    rho: float
    component: str  # which ball mass is bounded: "u", "v" or "u+v"
    log_constant: float  # log of the factor in front of the rho-dependence
    log_threshold: float
    constants: tuple[TrackedConstant, ...]

    @property
    def constant(self) -> float:
        return _exp(self.log_constant)

    @property
    def threshold(self) -> float:
        return _exp(self.log_threshold)

    def certifies(self, M: float) -> bool:
        """True when the mass M rules out a solution (one-sided)."""
        return M > 0 and math.log(M) > self.log_threshold

    def to_dict(self) -> dict:
        return {"case": self.case.value, "rho": self.rho, "component": self.component,
                "log_constant": self.log_constant, "log_threshold": self.log_threshold,
                "threshold": self.threshold,
                "constants": [k.to_dict() for k in self.constants]}


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _a_star(ledger_fn, cfg) -> IterationLedger:
    # a_* does not depend on M or rho; a short ledger carries the constants
    return ledger_fn(normalized(cfg), 1.0, 0.1, 1)


def certify_mass_bound_A(cfg: ExponentConfig, rho: float) -> MassCertificate:
    """M_rho(u) <= C_* rho^(N - sing_u) with C_* = (8 pi)^(N/2) / a_*."""
    if not (0 < rho < 1 / math.sqrt(5)):
        raise ValueError("rho must lie in (0, 1/sqrt(5))")
    led = _a_star(ledger_A, cfg)
    logC = cfg.N / 2 * math.log(8 * math.pi) - led.a_star.log_value
    return MassCertificate(CaseLabel.A, rho, "u", logC,
                           logC + (cfg.N - cfg.sing_u) * math.log(rho),
                           (led.c_star, led.gamma, led.a_star))


def certify_mass_bound_B(cfg: ExponentConfig, rho: float) -> MassCertificate:
    """M_rho(v) <= a_*^(-1) [log(1/(2 rho^2))]^(-1/(pq-1))."""
    if not (0 < rho < 1 / math.sqrt(10)):
        raise ValueError("rho must lie in (0, 1/sqrt(10))")
    led = _a_star(ledger_B, cfg)
    logC = -led.a_star.log_value
    k = 1 / (float(cfg.p * cfg.q) - 1)
    return MassCertificate(CaseLabel.B, rho, "v", logC,
                           logC - k * math.log(math.log(1 / (2 * rho * rho))),
                           (led.c_star, led.gamma, led.a_star))


def certify_mass_bound_C(cfg: ExponentConfig, rho: float) -> MassCertificate:
    """M_rho(u) + M_rho(v) <= a_*^(-1) [log(1/(2 rho^2))]^(-N/2)."""
    if not (0 < rho < 1 / math.sqrt(10)):
        raise ValueError("rho must lie in (0, 1/sqrt(10))")
    led = _a_star(ledger_C, cfg)
    logC = -led.a_star.log_value
    return MassCertificate(CaseLabel.C, rho, "u+v", logC,
                           logC - cfg.N / 2 * math.log(math.log(1 / (2 * rho * rho))),
                           (led.c_star, led.gamma, led.a_star))


def certify(case: CaseLabel, cfg: ExponentConfig, rho: float) -> MassCertificate:
    case = CaseLabel(case)
    fn = {CaseLabel.A: certify_mass_bound_A, CaseLabel.B: certify_mass_bound_B,
          CaseLabel.C: certify_mass_bound_C}.get(case)
    if fn is None:
        raise ValueError(f"no mass certificate in case {case.value}")
    return fn(cfg, rho)


@dataclass(frozen=True)
class FamilyThreshold:
    """Family constant above which the matched data admit no solution on [0, T]."""

    case: CaseLabel
    T: float
    log_c: float
    certificate: MassCertificate

    @property
    def c(self) -> float:
        return _exp(self.log_c)

    def to_dict(self) -> dict:
        return {"case": self.case.value, "T": self.T, "log_c": self.log_c, "c": self.c,
                "certificate": self.certificate.to_dict()}


def family_threshold(case: CaseLabel, cfg: ExponentConfig, T: float = 1.0) -> FamilyThreshold:
    """Translate the mass certificate into the constant of the matched data family.

    Data are rescaled to T = 1, D = 1, which multiplies densities by D^(-alpha)
    for the scale-invariant families; the log-corrected families lose their
    dependence on T in the small-radius limit used here.  In case C both
    constants equal the returned value.
    """
    case = CaseLabel(case)
    _require(cfg, case)
    if not T > 0:
        raise ValueError("horizon must be positive")
    N, D = cfg.N, cfg.D
    w = unit_sphere_area(N)
    if case is CaseLabel.A:
        cert = certify_mass_bound_A(cfg, 0.25)
        # rescaled mass c D^(-alpha) w rho^(N - 2 alpha) / (N - 2 alpha) against C_* rho^(N - 2 alpha)
        log_c = cfg.alpha * math.log(D) + math.log(N - cfg.sing_u) + cert.log_constant - math.log(w)
    elif case is CaseLabel.B:
        cert = certify_mass_bound_B(cfg, 0.25)
        k = 1 / (float(cfg.p * cfg.q) - 1)
        # mass -> c D^(-N/2) w (pq-1) |log rho|^(-k), bound -> a_*^(-1) (2 |log rho|)^(-k)
        log_c = (N / 2 * math.log(D) + cert.log_constant - k * math.log(2) - math.log(w)
                 - math.log(float(cfg.p * cfg.q) - 1))
    else:
        cert = certify_mass_bound_C(cfg, 0.25)
        # combined mass 2 c D^(-N/2) w (2/N) |log rho|^(-N/2), bound a_*^(-1) (2 |log rho|)^(-N/2)
        log_c = (N / 2 * math.log(D) + cert.log_constant + math.log(N / (4 * w))
                 - N / 2 * math.log(2))
    return FamilyThreshold(case, float(T), log_c, cert)


# ---------------------------------------------------------------- log-weighted integral


@dataclass(frozen=True)
class IntegralCheck:
    a: float
    b: float
    rho: float
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def margin(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margin >= 0))


def log_weighted_integral(a: float, b: float, rho: float, t: float) -> float:
    """int_{rho^2}^t (s + rho^2)^a [log(s/rho^2)]^b ds via s = rho^2 e^u."""
    r2 = rho * rho
    U = math.log(t / r2)
    if U <= 0:
        return 0.0
    f = lambda u: (math.exp(u) + 1) ** a * math.exp(u)
    val, _ = integrate.quad(f, 0.0, U, weight="alg", wvar=(b, 0.0), epsabs=0, epsrel=1e-12,
                            limit=200)
    return r2 ** (a + 1) * val


def log_weighted_lower(a: float, b: float, rho: float, t: float) -> float:
    return (t + rho * rho) ** (a + 1) / (4 * (a + b + 2)) * math.log(t / (rho * rho)) ** b


def log_weighted_check(a: float, b: float, rho: float, t_samples) -> IntegralCheck:
    """Compare the log-weighted integral with its closed lower bound at t >= 2 rho^2."""
    if not a > -1:
        raise ValueError("a must exceed -1")
    if not b > 0:
        raise ValueError("b must be positive")
    if not rho > 0:
        raise ValueError("rho must be positive")
    t = np.atleast_1d(np.asarray(t_samples, dtype=float))
    if t.size == 0 or np.any(t < 2 * rho * rho * (1 - 1e-12)):
        raise ValueError("samples must satisfy t >= 2 rho^2")
    lhs = np.array([log_weighted_integral(a, b, rho, x) for x in t])
    rhs = np.array([log_weighted_lower(a, b, rho, x) for x in t])
    return IntegralCheck(a, b, rho, t, lhs, rhs)


# ---------------------------------------------------------------- trace bounds

BOUND_TAGS = ("mass-u", "mass-v", "log-B", "log-C", "integral-D", "integral-E", "integral-unit")
_TAG_CASES = {
    "log-B": (CaseLabel.B,),
    "log-C": (CaseLabel.C,),
    "integral-D": (CaseLabel.D,),
    "integral-E": (CaseLabel.E,),
    "integral-unit": (CaseLabel.D, CaseLabel.E),
}


@dataclass
class BoundReport:
    tag: str
    sigmas: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    rate_kind: str  # "slope", "log_power" or "none"
    lhs_rate: float
    rhs_rate: float
    divergent: bool = False
    tail: dict = field(default_factory=dict)
    gamma: float | None = None
    passed: bool | None = None
    message: str = ""

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.lhs / self.rhs

    def to_csv(self, config: dict | None = None) -> str:
        buf = io.StringIO()
        if config is not None:
            buf.write("# config=" + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "lhs", "rhs_template", "ratio"])
        for row in zip(self.sigmas, self.lhs, self.rhs, self.ratio):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"tag": self.tag, "rate_kind": self.rate_kind, "lhs_rate": self.lhs_rate,
                "rhs_rate": self.rhs_rate, "divergent": self.divergent, "tail": self.tail,
                "gamma": self.gamma, "passed": self.passed, "message": self.message}


def _fit(kind: str, s: np.ndarray, y: np.ndarray) -> float:
    ok = np.isfinite(y) & (y > 0)
    if kind == "none" or ok.sum() < 2:
        return math.nan
    if kind == "slope":
        return float(np.polyfit(np.log(s[ok]), np.log(y[ok]), 1)[0])
    # log-type rates carry O(1/|log sigma|) corrections at any practical sigma
    L = -np.log(s[ok])
    if ok.sum() < 4:
        return float(np.polyfit(np.log(L), np.log(y[ok]), 1)[0])
    X = np.column_stack([np.log(L), np.ones_like(L), 1 / L])
    return float(np.linalg.lstsq(X, np.log(y[ok]), rcond=None)[0][0])


def _tail_behaviour(tau: np.ndarray, F: np.ndarray, decades: float = 2.0):
    """Fit F ~ C tau^kappa |log tau|^(-m) on the lowest decades of the grid.

    The local slope d log F / d log tau equals kappa + m / |log tau|, which is
    linear in 1/|log tau|.
    """
    win = tau <= tau[0] * 10 ** decades
    Fw, tw = F[win], tau[win]
    if np.all(Fw == 0):
        return 0.0, 0.0, 0.0
    if np.any(Fw <= 0):
        return math.nan, math.nan, math.nan
    L = np.log(tw)
    slope = np.gradient(np.log(Fw), L)
    if np.ptp(1 / np.abs(L)) < 1e-12:
        return float(slope.mean()), 0.0, float(Fw[0])
    m, kappa = np.polyfit(1 / np.abs(L), slope, 1)
    return float(kappa), float(m), float(Fw[0])


def _log_tail(F, tau_min: float, L_far: float, n: int = 80):
    """int_0^tau_min F dtau/tau for integrands decaying like a power of |log tau|.

    Integrates in L = -log tau on a geometric L-grid out to L_far; beyond it the
    local power F ~ L^(-m) is continued analytically.
    """
    L0 = -math.log(tau_min)
    L = np.geomspace(L0, max(L_far, 2 * L0), n)
    with np.errstate(all="ignore"):
        vals = np.array([F(math.exp(-x)) for x in L])
    good = np.isfinite(vals) & (vals > 0)
    if not good[-8:].all():
        return math.nan
    # F ~ C L^(-m) (1 + d/L) on the last points, integrated in closed form
    Lt = L[-8:]
    X = np.column_stack([np.ones_like(Lt), -np.log(Lt), 1 / Lt])
    logC, m, d = np.linalg.lstsq(X, np.log(vals[-8:]), rcond=None)[0]
    if m <= 1:
        return math.inf
    Lf = L[-1]
    far = math.exp(logC) * (Lf ** (1 - m) / (m - 1) + d * Lf ** (-m) / m)
    return float(integrate.simpson(vals, x=L)) + far


def _tau_integral(F, sigmas: np.ndarray, tau_min: float, per_decade: int, L_far: float):
    """int_0^sigma F(tau) dtau/tau for each sigma, with a fitted tail below tau_min."""
    top = float(sigmas.max())
    n = max(2, int(math.ceil(per_decade * math.log10(top / tau_min))) + 1)
    grid = np.unique(np.concatenate([np.geomspace(tau_min, top, n), sigmas]))
    vals = np.array([F(t) for t in grid])
    if not np.all(np.isfinite(vals)):
        return np.full(sigmas.size, math.inf), True, {"reason": "non-finite integrand"}
    kappa, m, F0 = _tail_behaviour(grid, vals)
    tol = 0.02
    info = {"kappa": kappa, "m": m}
    if math.isnan(kappa):
        return np.full(sigmas.size, math.nan), False, {"reason": "sign change in integrand"}
    diverges = kappa < -tol or (abs(kappa) <= tol and m <= 1 - tol and F0 > 0)
    if F0 == 0:
        tail = 0.0
    elif kappa > tol:
        tail = F0 / kappa
    elif not diverges:
        tail = _log_tail(F, tau_min, L_far)
        if math.isnan(tail):
            tail = F0 * abs(math.log(tau_min)) / (m - 1) if m > 1 else math.inf
        diverges = math.isinf(tail)
    if diverges:
        info["reason"] = "integrand does not decay fast enough as tau -> 0"
        return np.full(sigmas.size, math.inf), True, info
    info["tail"] = tail
    cum = integrate.cumulative_simpson(vals, x=np.log(grid), initial=0.0)
    idx = np.searchsorted(grid, sigmas)
    return tail + cum[idx], False, info


def bound_report(tag: str, mu: RadialMeasure, nu: RadialMeasure, cfg: ExponentConfig,
                 sigmas, gamma: float | None = None, T: float = 1.0,
                 tau_min: float = 1e-8, per_decade: int = 64) -> BoundReport:
    """Evaluate a necessary trace condition along a sigma grid.

    The left side uses sup-over-centre ball masses, which sit at the origin for
    radially nonincreasing data.  The right side is the rate template without
    its constant.  With `gamma`, passed = (lhs <= gamma * rhs everywhere).
    """
    if tag not in BOUND_TAGS:
        raise ValueError(f"unknown bound tag {tag!r}; expected one of {BOUND_TAGS}")
    case = classify(cfg)
    allowed = _TAG_CASES.get(tag)
    if allowed is not None and case not in allowed:
        raise ValueError(f"bound {tag} does not apply in case {case.value}")
    s = np.asarray(sigmas, dtype=float)
    if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise ValueError("sigmas must be positive and strictly increasing")
    if s[-1] > math.sqrt(T) * (1 + 1e-12):
        raise ValueError("sigmas must lie in (0, T^(1/2)]")
    N, q = cfg.N, float(cfg.q)
    tau_min = min(tau_min, s[0] / 100)
    Mu = lambda r: sup_ball_mass(mu, r)
    Mv = lambda r: sup_ball_mass(nu, r)
    pq1 = float(cfg.p * cfg.q) - 1
    divergent, tail, msg = False, {}, ""

    if tag in ("mass-u", "mass-v"):
        expo = N - (cfg.sing_u if tag == "mass-u" else cfg.sing_v)
        lhs = np.array([(Mu if tag == "mass-u" else Mv)(r) for r in s])
        rhs = s ** expo
        kind = "slope"
    elif tag == "log-C":
        lhs = np.array([Mu(r) + Mv(r) for r in s])
        rhs = np.log(math.e + math.sqrt(T) / s) ** (-N / 2)
        kind = "log_power"
    else:
        if tag == "log-B":
            w = N - cfg.sing_u
        elif tag == "integral-E":
            w = 0.0
        else:
            w = N - (N + 2) / q
        F = lambda t: (Mu(t) / t ** w) ** q
        # ball masses scale like tau^N; stop before they underflow
        integ, divergent, tail = _tau_integral(F, s, tau_min, per_decade, min(200.0, 600.0 / N))
        with_nu = tag != "integral-unit"
        lhs = integ + (np.array([Mv(r) for r in s]) if with_nu else 0.0)
        if tag == "log-B":
            rhs = np.log(math.e + math.sqrt(T) / s) ** (-1 / pq1)
            kind = "log_power"
        elif tag == "integral-unit":
            rhs = np.ones_like(s)
            kind = "none"
        else:
            # the horizon-form bound read at T = sigma^2
            rhs = s ** (N - cfg.sing_v)
            kind = "slope"
        if divergent:
            msg = "tau-integral diverges at 0: " + tail.get("reason", "")
    rep = BoundReport(tag, s, lhs, rhs, kind, _fit(kind, s, lhs), _fit(kind, s, rhs),
                      divergent, tail, gamma, None, msg)
    if gamma is not None:
        rep.passed = (not divergent) and bool(np.all(lhs <= gamma * rhs))
    return rep
