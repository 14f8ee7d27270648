"""Radial initial-data families and their ball masses.

All families are radial about the origin and carry the dimension N.  Ball
masses are closed-form for the Dirac, constant and pure power families; the
log-corrected power family is handled in the logarithmic variable L = -log r,
where it becomes an exponential times a power of L.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, special

from .exponents import CaseLabel, ExponentConfig, unit_sphere_area

INV_E = math.exp(-1.0)


class RadialMeasure:
    """Common interface; concrete families are frozen dataclasses below."""

    N: int
    family: str = ""

    def ball_mass(self, sigma: float) -> float:
        raise NotImplementedError

    def density(self, r) -> np.ndarray:
        raise NotImplementedError

    @property
    def monotone(self) -> bool:
        """Radially nonincreasing density (the sup of ball masses sits at 0)."""
        return True

    @property
    def breaks(self) -> tuple[float, ...]:
        """Radii where the density jumps; meshes put cell edges there."""
        return ()

    @property
    def bounded(self) -> bool:
        return False

    def scaled(self, factor: float) -> "RadialMeasure":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_sigma(sigma):
    if not sigma > 0:
        raise ValueError(f"ball radius must be positive, got {sigma}")


def _check_extension(ext):
    if ext not in ("zero", "constant"):
        raise ValueError("extension must be 'zero' or 'constant'")


@dataclass(frozen=True)
class Dirac(RadialMeasure):
    N: int
    mass: float
    family: str = field(default="dirac", init=False)

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("mass must be nonnegative")

    def ball_mass(self, sigma):
        _check_sigma(sigma)
        return float(self.mass)

    def density(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def scaled(self, factor):
        return replace(self, mass=self.mass * factor)

    def to_dict(self):
        return {"family": "dirac", "c": self.mass}


@dataclass(frozen=True)
class Constant(RadialMeasure):
    N: int
    level: float
    family: str = field(default="constant", init=False)

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be nonnegative")

    @property
    def bounded(self):
        return True

    def ball_mass(self, sigma):
        _check_sigma(sigma)
        return self.level * unit_sphere_area(self.N) * sigma ** self.N / self.N

    def density(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.level)

    def scaled(self, factor):
        return replace(self, level=self.level * factor)

    def to_dict(self):
        return {"family": "constant", "c": self.level}


@dataclass(frozen=True)
class PowerLaw(RadialMeasure):
    """c r^(-a), a < N, optionally cut off at `cutoff`."""

    N: int
    c: float
    a: float
    cutoff: float | None = None
    extension: str = "zero"
    family: str = field(default="power", init=False)

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not self.a < self.N:
            raise ValueError(f"r^-{self.a} is not locally integrable in dimension {self.N}")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValueError("cutoff must be positive")
        _check_extension(self.extension)

    @property
    def breaks(self):
        return () if self.cutoff is None else (self.cutoff,)

    @property
    def bounded(self):
        return self.a <= 0 and self.cutoff is None

    @property
    def monotone(self):
        return self.a >= 0

    def _core(self, s):
        return self.c * unit_sphere_area(self.N) * s ** (self.N - self.a) / (self.N - self.a)

    def ball_mass(self, sigma):
        _check_sigma(sigma)
        if self.cutoff is None or sigma <= self.cutoff:
            return self._core(sigma)
        out = self._core(self.cutoff)
        if self.extension == "constant":
            level = self.c * self.cutoff ** (-self.a)
            out += level * unit_sphere_area(self.N) * (sigma ** self.N - self.cutoff ** self.N) / self.N
        return out

    def density(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            d = self.c * r ** (-self.a)
        if self.cutoff is not None:
            beyond = self.c * self.cutoff ** (-self.a) if self.extension == "constant" else 0.0
            d = np.where(r > self.cutoff, beyond, d)
        return d

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def to_dict(self):
        return {"family": "power", "c": self.c, "a": self.a, "cutoff": self.cutoff,
                "extension": self.extension}


@dataclass(frozen=True)
class PowerLogLaw(RadialMeasure):
    """c r^(-a) |log r|^(-ell) on r < cutoff <= 1/e, extended by 0 or its boundary value."""

    N: int
    c: float
    a: float
    ell: float
    cutoff: float = INV_E
    extension: str = "zero"
    family: str = field(default="powerlog", init=False)

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not (0 < self.cutoff <= INV_E * (1 + 1e-15)):
            raise ValueError("cutoff must lie in (0, 1/e]")
        if self.a > self.N or (self.a == self.N and not self.ell > 1):
            raise ValueError("density is not locally integrable at the origin")
        _check_extension(self.extension)

    @property
    def breaks(self):
        return (self.cutoff,)

    @property
    def monotone(self):
        # d log f / d log r = -a + ell / |log r| <= 0 on the support
        return self.a > 0 and self.a * (-math.log(self.cutoff)) >= self.ell

    def _core(self, s):
        L0 = -math.log(s)
        k = self.N - self.a
        w = unit_sphere_area(self.N) * self.c
        if k == 0:
            return w * L0 ** (1 - self.ell) / (self.ell - 1)
        val, _ = integrate.quad(lambda L: math.exp(-k * (L - L0)) * L ** (-self.ell), L0, math.inf,
                                epsabs=0.0, epsrel=1e-13, limit=200)
        return w * math.exp(-k * L0) * val

    def ball_mass(self, sigma):
        _check_sigma(sigma)
        if sigma <= self.cutoff:
            return self._core(sigma)
        out = self._core(self.cutoff)
        if self.extension == "constant":
            level = float(self.density(self.cutoff))
            out += level * unit_sphere_area(self.N) * (sigma ** self.N - self.cutoff ** self.N) / self.N
        return out

    def density(self, r):
        r = np.asarray(r, dtype=float)
        rc = np.clip(r, 1e-300, self.cutoff)
        inside = self.c * rc ** (-self.a) * (-np.log(rc)) ** (-self.ell)
        if self.extension == "constant":
            return inside  # clipping already holds the boundary value beyond the cutoff
        return np.where(r > self.cutoff, 0.0, inside)

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def to_dict(self):
        return {"family": "powerlog", "c": self.c, "a": self.a, "logpow": self.ell,
                "cutoff": self.cutoff, "extension": self.extension}


@dataclass(frozen=True)
class Tabulated:
    """Positive function h on (0, 1] given by samples, interpolated log-log."""

    s: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if s.ndim != 1 or s.shape != h.shape or s.size < 2:
            raise ValueError("table needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(s) <= 0) or s[0] <= 0 or s[-1] > 1 + 1e-12:
            raise ValueError("table abscissae must increase within (0, 1]")
        if np.any(h <= 0):
            raise ValueError("h must be positive")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "h", h)

    def log_slopes(self) -> np.ndarray:
        return np.diff(np.log(self.h)) / np.diff(np.log(self.s))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        ls, lh = np.log(self.s), np.log(self.h)
        k0 = self.log_slopes()[0]
        lr = np.log(np.clip(r, 1e-300, None))
        inner = lh[0] + k0 * (lr - ls[0])  # power-law continuation below the table
        return np.exp(np.where(lr < ls[0], inner, np.interp(lr, ls, lh)))

    def decreasing_after_weight(self, eps: float, delta: float = 1.0) -> bool:
        """s^(-eps) h(s) nonincreasing on the table restricted to s < delta."""
        sel = self.s[1:] <= delta
        return bool(np.all(self.log_slopes()[sel] <= eps + 1e-12))

    def to_dict(self):
        return {"s": self.s.tolist(), "h": self.h.tolist()}


@dataclass(frozen=True)
class ModulatedPowerLaw(RadialMeasure):
    """r^(-a) h(r) on r <= 1 (zero outside) with h a tabulated modulating function."""

    N: int
    a: float
    table: Tabulated
    c: float = 1.0
    family: str = field(default="modulated", init=False)

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if self.a - self.table.log_slopes()[0] >= self.N:
            raise ValueError("modulated density is not locally integrable at the origin")

    @property
    def breaks(self):
        return (1.0,)

    @property
    def monotone(self):
        return bool(np.all(self.table.log_slopes() <= self.a + 1e-12))

    def density(self, r):
        r = np.asarray(r, dtype=float)
        rc = np.clip(r, 1e-300, 1.0)
        return np.where(r > 1.0, 0.0, self.c * rc ** (-self.a) * self.table(rc))

    def ball_mass(self, sigma):
        _check_sigma(sigma)
        top = min(sigma, 1.0)
        k = self.N - self.a
        s0 = self.table.s[0]
        k0 = self.table.log_slopes()[0]
        w = self.c * unit_sphere_area(self.N)
        # below the first sample: r^(N-1-a) h0 (r/s0)^k0 integrates in closed form
        lo = min(top, s0)
        out = w * self.table.h[0] * s0 ** (-k0) * lo ** (k + k0) / (k + k0)
        if top > s0:
            g = lambda y: math.exp(k * y) * float(self.table(math.exp(y)))
            pts = np.log(self.table.s[(self.table.s > s0) & (self.table.s < top)])
            val, _ = integrate.quad(g, math.log(s0), math.log(top), points=pts[:100] if pts.size else None,
                                    epsrel=1e-12, limit=400)
            out += w * val
        return out

    def scaled(self, factor):
        return replace(self, c=self.c * factor)

    def to_dict(self):
        return {"family": "modulated", "c": self.c, "a": self.a, "table": self.table.to_dict()}


def ball_mass(m: RadialMeasure, sigma: float) -> float:
    """mu(B(0, sigma))."""
    return m.ball_mass(sigma)


def off_center_ball_mass(m: RadialMeasure, sigma: float, z: float) -> float:
    """mu(B(z e_1, sigma)) by radial quadrature against the spherical cap fraction."""
    _check_sigma(sigma)
    z = abs(float(z))
    if z == 0:
        return m.ball_mass(sigma)
    if isinstance(m, Dirac):
        return m.mass if z <= sigma else 0.0
    if isinstance(m, Constant):
        return m.ball_mass(sigma)
    N = m.N

    def cap(r):
        # fraction of the sphere |y| = r inside B(z e_1, sigma)
        cth = (r * r + z * z - sigma * sigma) / (2 * r * z)
        if cth <= -1:
            return 1.0
        if cth >= 1:
            return 0.0
        if N == 1:
            return 0.5
        half = 0.5 * special.betainc((N - 1) / 2, 0.5, 1 - cth * cth)
        return half if cth >= 0 else 1 - half

    lo, hi = abs(z - sigma), z + sigma
    out = 0.0
    r0 = 1e-10 * hi
    if lo < r0:
        # ball touching the origin: the cap fraction is flat on B(0, r0)
        out += cap(r0) * m.ball_mass(r0)
        lo = r0
    # integrate in log r, which tames log-type singularities at the origin
    f = lambda u: float(m.density(math.exp(u))) * math.exp(N * u) * cap(math.exp(u))
    pts = [math.log(p) for p in m.breaks if lo < p < hi]
    val, _ = integrate.quad(f, math.log(lo), math.log(hi), points=pts or None,
                            epsrel=1e-11, limit=400)
    out += unit_sphere_area(N) * val
    if z < sigma:
        # B(0, sigma - z) lies inside the shifted ball
        out += m.ball_mass(sigma - z)
    return out


def sup_ball_mass(m: RadialMeasure, sigma: float, check: bool = False) -> float:
    """sup over centers of mu(B(z, sigma)); attained at 0 for monotone families.

    With check=True a few off-center balls are integrated and compared.
    """
    if not m.monotone:
        raise ValueError(f"{m.family} family with these parameters has no monotone density")
    centre = m.ball_mass(sigma)
    if check:
        for z in (0.25 * sigma, 0.5 * sigma, sigma, 2 * sigma):
            off = off_center_ball_mass(m, sigma, z)
            assert off <= centre * (1 + 1e-8) + 1e-300, (z, off, centre)
    return centre


def _log_family(N, c, a, ell, kw) -> PowerLogLaw:
    """Log-corrected power law; by default cut off where the density stops decreasing."""
    kw = dict(kw)
    if kw.get("cutoff") is None:
        kw["cutoff"] = min(INV_E, math.exp(-ell / a)) if ell > 0 else INV_E
    return PowerLogLaw(N, c, a, ell, **kw)


def corollary_family(case: CaseLabel, cfg: ExponentConfig, c1: float, c2: float,
                     h: Tabulated | None = None, eps: float = 1.0,
                     **kw) -> tuple[RadialMeasure, RadialMeasure]:
    """The matched data pair whose size is governed by (c1, c2) in a given case.

    Cases D and E take a tabulated modulating function h for mu; nu is then a
    point mass c2 (any finite measure will do there).  Keyword arguments are
    passed to the log-corrected families (cutoff, extension).  Their default
    cutoff is the largest radius below 1/e on which the density is nonincreasing.
    """
    case = CaseLabel(case)
    if not (c1 > 0 and c2 > 0):
        raise ValueError("family constants must be positive")
    from .exponents import classify
    actual = classify(cfg)
    if actual is not case:
        raise ValueError(f"configuration is in case {actual.value}, not {case.value}")
    N = cfg.N
    pq1 = float(cfg.p * cfg.q) - 1
    if case is CaseLabel.A:
        return PowerLaw(N, c1, cfg.sing_u), PowerLaw(N, c2, cfg.sing_v)
    if case is CaseLabel.B:
        return (_log_family(N, c1, cfg.sing_u, float(cfg.p) / pq1, kw),
                _log_family(N, c2, float(N), 1 / pq1 + 1, kw))
    if case is CaseLabel.C:
        ell = N / 2 + 1
        return _log_family(N, c1, float(N), ell, kw), _log_family(N, c2, float(N), ell, kw)
    if case in (CaseLabel.D, CaseLabel.E):
        if h is None:
            raise ValueError(f"case {case.value} needs a tabulated modulating function h")
        if case is CaseLabel.D:
            if not h.decreasing_after_weight(eps):
                raise ValueError("s^(-eps) h(s) must be nonincreasing on the table")
            a = (N + 2) / float(cfg.q)
        else:
            a = float(N)
        return ModulatedPowerLaw(N, a, h, c1), Dirac(N, c2)
    raise ValueError("case F admits any data with infinite unit-ball mass; no family is fixed")


@dataclass(frozen=True)
class MassCurve:
    radii: np.ndarray
    masses: np.ndarray
    family: dict

    def loglog_slope(self) -> float:
        """Least-squares slope of log mass against log sigma."""
        return float(np.polyfit(np.log(self.radii), np.log(self.masses), 1)[0])

    def log_power(self) -> float:
        """Slope of log mass against log |log sigma| (log-type decay near 0)."""
        return float(np.polyfit(np.log(-np.log(self.radii)), np.log(self.masses), 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "mass"])
        for s, mval in zip(self.radii, self.masses):
            w.writerow([repr(float(s)), repr(float(mval))])
        return buf.getvalue()


def mass_curve(m: RadialMeasure, sigmas) -> MassCurve:
    s = np.asarray(sigmas, dtype=float)
    if s.ndim != 1 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
        raise ValueError("sigmas must be positive and increasing")
    masses = np.array([m.ball_mass(x) for x in s])
    return MassCurve(s, masses, m.to_dict())


def measure_from_dict(d: dict, N: int) -> RadialMeasure:
    """Inverse of to_dict for the run-config family schema."""
    fam = d.get("family")
    c = float(d.get("c", 0.0))
    if fam == "dirac":
        return Dirac(N, c)
    if fam == "constant":
        return Constant(N, c)
    if fam == "power":
        return PowerLaw(N, c, float(d["a"]), d.get("cutoff"), d.get("extension", "zero"))
    if fam == "powerlog":
        return PowerLogLaw(N, c, float(d["a"]), float(d["logpow"]),
                           float(d.get("cutoff") or INV_E), d.get("extension", "zero"))
    if fam == "modulated":
        t = d["table"]
        return ModulatedPowerLaw(N, float(d["a"]), Tabulated(t["s"], t["h"]), c)
    raise ValueError(f"unknown family {fam!r}")
