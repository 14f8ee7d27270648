"""Exponent bookkeeping for the system u_t = D1 Δu + v^p, v_t = D2 Δv + u^q.

Everything downstream (kernel bounds, data families, certificates) is keyed
on the tuple (N, p, q, D1, D2) and the six regimes it falls into.  Boundary
comparisons are done in exact rational arithmetic whenever p and q are given
as ints or Fractions; otherwise a relative tolerance is used and the caller
can ask whether the label hinged on it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

REL_TOL = 1e-12

Number = int | float | Fraction


class CaseLabel(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"


def as_number(x) -> Number:
    """Coerce CLI/JSON input ("3", "1/2", 0.5, 2) to int, Fraction or float."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, (int, Fraction)):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        s = x.strip()
        try:
            return Fraction(s) if ("/" in s or s.lstrip("+-").isdigit()) else float(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a number: {x!r}") from exc
    if isinstance(x, Rational):
        return Fraction(x)
    return float(x)


def _cmp(a, b, exact: bool) -> int:
    """Three-way comparison, exact for rationals, tolerant for floats."""
    if exact:
        d = Fraction(a) - Fraction(b)
        return (d > 0) - (d < 0)
    a, b = float(a), float(b)
    if abs(a - b) <= REL_TOL * max(abs(a), abs(b)):
        return 0
    return 1 if a > b else -1


@dataclass(frozen=True)
class ExponentConfig:
    N: int
    p: Number
    q: Number
    D1: float = 1.0
    D2: float = 1.0
    exact: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, int) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        p, q = as_number(self.p), as_number(self.q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        exact = isinstance(p, (int, Fraction)) and isinstance(q, (int, Fraction))
        object.__setattr__(self, "exact", exact)
        if not (p > 0 and q > 0):
            raise ValueError("p and q must be positive")
        if _cmp(p, q, exact) > 0:
            raise ValueError(f"normalization p <= q violated (p={p}, q={q})")
        if _cmp(p * q, 1, exact) <= 0:
            raise ValueError(f"pq > 1 required (pq={p * q})")
        if not (self.D1 > 0 and self.D2 > 0):
            raise ValueError("diffusion coefficients must be positive")
        object.__setattr__(self, "D1", float(self.D1))
        object.__setattr__(self, "D2", float(self.D2))
        assert self.beta >= self.alpha * (1 - REL_TOL)

    @property
    def D(self) -> float:
        return min(self.D1, self.D2)

    @property
    def Dp(self) -> float:
        return max(self.D1, self.D2)

    def _ratio(self, num):
        den = self.p * self.q - 1
        return Fraction(num) / den if self.exact else num / den

    @property
    def alpha_exact(self):
        """(p+1)/(pq-1), a Fraction for rational input."""
        return self._ratio(self.p + 1)

    @property
    def beta_exact(self):
        return self._ratio(self.q + 1)

    @property
    def alpha(self) -> float:
        return float(self.alpha_exact)

    @property
    def beta(self) -> float:
        return float(self.beta_exact)

    @property
    def sing_u(self) -> float:
        return 2 * self.alpha

    @property
    def sing_v(self) -> float:
        return 2 * self.beta

    @property
    def fujita_q(self) -> float:
        return 1 + 2 / self.N

    def half_N(self):
        return Fraction(self.N, 2) if self.exact else self.N / 2

    def fujita_exact(self):
        return 1 + Fraction(2, self.N) if self.exact else 1 + 2 / self.N

    def with_diffusion(self, D1: float, D2: float) -> "ExponentConfig":
        return ExponentConfig(self.N, self.p, self.q, D1, D2)

    def to_dict(self) -> dict:
        def enc(x):
            return str(x) if isinstance(x, Fraction) else x
        return {"N": self.N, "p": enc(self.p), "q": enc(self.q), "D1": self.D1, "D2": self.D2}

    @classmethod
    def from_dict(cls, d: dict) -> "ExponentConfig":
        return cls(int(d["N"]), as_number(d["p"]), as_number(d["q"]),
                   float(d.get("D1", 1.0)), float(d.get("D2", 1.0)))


def _comparisons(cfg: ExponentConfig) -> tuple[int, int, int]:
    ex = cfg.exact
    return (_cmp(cfg.beta_exact, cfg.half_N(), ex),
            _cmp(cfg.p, cfg.q, ex),
            _cmp(cfg.q, cfg.fujita_exact(), ex))


def classify(cfg: ExponentConfig) -> CaseLabel:
    """Return the regime label of a valid configuration."""
    c_beta, c_pq, c_fuj = _comparisons(cfg)
    if c_beta < 0:
        return CaseLabel.A
    if c_beta == 0:
        return CaseLabel.C if c_pq == 0 else CaseLabel.B
    if c_fuj > 0:
        return CaseLabel.D
    if c_fuj == 0:
        return CaseLabel.E
    return CaseLabel.F


def label_is_tolerance_dependent(cfg: ExponentConfig) -> bool:
    """True when a float configuration sits on a boundary only up to REL_TOL."""
    if cfg.exact:
        return False
    pairs = [(cfg.beta, cfg.N / 2), (float(cfg.p), float(cfg.q)),
             (float(cfg.q), cfg.fujita_q)]
    return any(a != b and _cmp(a, b, False) == 0 for a, b in pairs)


def singularity_exponents(cfg: ExponentConfig) -> tuple[float, float]:
    return cfg.sing_u, cfg.sing_v


@dataclass(frozen=True)
class MonotonicityReport:
    case: CaseLabel
    exponent_u: float  # N - sing_u
    exponent_v: float  # N - sing_v
    chain: tuple[float, float] | None  # ((p+1)/(pq-1) - N/2, (q-p)/((pq-1)(q-1))), case F only
    holds: bool


def bound_monotonicity(cfg: ExponentConfig) -> MonotonicityReport:
    """Sign facts that let the sigma-family bounds collapse to a single-T bound.

    Only meaningful in cases D, E and F; the other cases raise ValueError.
    """
    case = classify(cfg)
    if case in (CaseLabel.A, CaseLabel.B, CaseLabel.C):
        raise ValueError(f"monotonicity reduction does not apply in case {case.value}")
    eu, ev = cfg.N - cfg.sing_u, cfg.N - cfg.sing_v
    chain = None
    if case is CaseLabel.F:
        pq1 = float(cfg.p * cfg.q) - 1
        p, q = float(cfg.p), float(cfg.q)
        chain = ((p + 1) / pq1 - cfg.N / 2, (q - p) / (pq1 * (q - 1)))
        slack = 1e-12 * max(1.0, abs(chain[0]))
        holds = eu <= slack and ev < 0 and chain[0] >= chain[1] - slack and chain[1] >= 0
    else:
        holds = ev < 0
    return MonotonicityReport(case, eu, ev, chain, bool(holds))


def unit_sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N (2 for N = 1)."""
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)
