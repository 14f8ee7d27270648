"""Mild solutions by slab-wise Picard iteration of the Duhamel map.

One slab [t_n, t_n + h] is advanced with exact diffusion and the midpoint
rule for the source integral:

    u_{n+1} = S(D1 h) u_n + h S(D1 h/2) v_mid^p,
    v_{n+1} = S(D2 h) v_n + h S(D2 h/2) u_mid^q,

where the midpoint state solves the pointwise fixed point

    u_mid = S(D1 h/2) u_n + (h/2) v_mid^p,    v_mid = S(D2 h/2) v_n + (h/2) u_mid^q.

The fixed point is found by Picard iteration started from the heat flow, so
the iterates increase monotonically even when p < 1 makes v^p non-Lipschitz.
On spatially constant data the scheme is the implicit midpoint rule for
u' = v^p, v' = u^q.  The source is never evaluated at the initial time,
which matters for singular data whose powers need not be integrable.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .exponents import CaseLabel, ExponentConfig, unit_sphere_area
from .kernel import RadialField, RadialMesh, make_mesh, propagate
from .measures import Dirac, RadialMeasure, corollary_family


class MeshResolutionError(RuntimeError):
    """The discretized initial data misses the exact ball masses."""


@dataclass(frozen=True)
class MeshSpec:
    Rmax: float = 16.0
    M: int = 80
    grading: float = 1.5
    r_min: float = 1e-3
    order: int = 8

    def scaled(self, factor: float) -> "MeshSpec":
        return MeshSpec(self.Rmax * factor, self.M, self.grading, self.r_min * factor, self.order)


@functools.lru_cache(maxsize=32)
def _mesh(N: int, spec: MeshSpec, breaks: tuple[float, ...]) -> RadialMesh:
    return make_mesh(N, spec.Rmax, spec.M, spec.grading, spec.r_min, spec.order, breaks)


def build_mesh(N: int, spec: MeshSpec, breaks=()) -> RadialMesh:
    """Shared mesh per (N, spec, breaks) so cached propagators are reused."""
    return _mesh(N, spec, tuple(sorted(set(float(b) for b in breaks))))


@dataclass(frozen=True)
class SolveConfig:
    cfg: ExponentConfig
    T: float
    n_steps: int = 200
    picard_tol: float = 1e-11
    picard_max_iter: int = 80
    blowup_threshold: float = 1e8
    mesh: MeshSpec = MeshSpec()
    growth_limit: float = 0.01  # largest relative sup-norm increase of an accepted step
    max_halvings: int = 40
    collapse_trend: int = 8  # rising steps needed to call a step collapse blow-up
    mass_radius: float = 1.0
    mesh_tol: float = 2e-3
    domain_tol: float = 1e-6
    residual_window: int = 4

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.blowup_threshold > 0:
            raise ValueError("blow-up threshold must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cfg"] = self.cfg.to_dict()
        return d


@dataclass(frozen=True)
class Converged:
    kind: str = "converged"


@dataclass(frozen=True)
class BlowupDetected:
    t_b: float
    detected_by: str = "threshold"  # or "step_collapse"
    kind: str = "blowup"


@dataclass(frozen=True)
class PicardDiverged:
    step: int
    t: float
    kind: str = "picard_diverged"


Outcome = Converged | BlowupDetected | PicardDiverged


@dataclass
class Trajectory:
    mesh: RadialMesh
    cfg: ExponentConfig
    times: np.ndarray
    u: np.ndarray  # (n_times, n_nodes)
    v: np.ndarray
    u_atom: float = 0.0
    v_atom: float = 0.0
    regular_start: bool = True  # data bounded, so the source may be evaluated at t = 0

    def field_u(self, i: int) -> RadialField:
        return RadialField(self.mesh, self.u[i], float(self.times[i]), self.u_atom if i == 0 else 0.0)

    def field_v(self, i: int) -> RadialField:
        return RadialField(self.mesh, self.v[i], float(self.times[i]), self.v_atom if i == 0 else 0.0)


@dataclass
class SolveReport:
    outcome: Outcome
    times: np.ndarray
    sup_u: np.ndarray
    sup_v: np.ndarray
    mass_u: np.ndarray
    mass_v: np.ndarray
    mass_radius: float
    data_cutoff: float  # radius of the first cell, where singular data are flattened
    halvings: int = 0
    residuals: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return isinstance(self.outcome, Converged)

    def to_dict(self) -> dict:
        return {
            "outcome": asdict(self.outcome),
            "steps": int(self.times.size - 1),
            "halvings": self.halvings,
            "final_time": float(self.times[-1]),
            "mass_radius": self.mass_radius,
            "data_cutoff": self.data_cutoff,
            "sup_u_final": float(self.sup_u[-1]),
            "sup_v_final": float(self.sup_v[-1]),
            "residuals": self.residuals,
        }


def discretize(m: RadialMeasure, mesh: RadialMesh, tol: float | None = None) -> RadialField:
    """Node values of the data; singular data are flattened on the first cell.

    The flattened value makes the first-cell mass exact.  With `tol`, ball
    masses of the discrete field are checked against the exact ones at every
    cell edge.
    """
    if isinstance(m, Dirac):
        return RadialField(mesh, np.zeros(mesh.size), 0.0, float(m.mass))
    vals = np.array(m.density(mesh.nodes), dtype=float)
    e1 = mesh.edges[1]
    if not m.bounded:
        vol = unit_sphere_area(mesh.N) * e1 ** mesh.N / mesh.N
        vals[: mesh.order] = m.ball_mass(e1) / vol
    f = RadialField(mesh, vals)
    if tol is not None:
        for r in mesh.edges[1:]:
            exact = m.ball_mass(r)
            got = f.ball_mass(r)
            if exact > 0 and abs(got - exact) > tol * exact:
                raise MeshResolutionError(
                    f"ball mass at r={r:.3g}: discrete {got:.6g} vs exact {exact:.6g}")
    return f


def _sup(values: np.ndarray) -> float:
    return float(values.max(initial=0.0))


def _slab(u: RadialField, v: RadialField, h: float, sc: SolveConfig):
    """Advance one slab; returns (status, u_next, v_next)."""
    cfg = sc.cfg
    p, q = float(cfg.p), float(cfg.q)
    kw = {"domain_tol": sc.domain_tol}
    Su = propagate(u, h / 2, cfg.D1, **kw).values
    Sv = propagate(v, h / 2, cfg.D2, **kw).values
    cap = sc.blowup_threshold * 1e4
    um, vm = Su, Sv
    status = "stalled"
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(sc.picard_max_iter):
            un = Su + (h / 2) * vm ** p
            vn = Sv + (h / 2) * um ** q
            top = max(_sup(un), _sup(vn))
            if not math.isfinite(top) or top > cap:
                return "diverged", None, None
            du = np.max(np.abs(un - um)) / max(_sup(un), 1e-300)
            dv = np.max(np.abs(vn - vm)) / max(_sup(vn), 1e-300)
            um, vm = un, vn
            if max(du, dv) <= sc.picard_tol:
                status = "ok"
                break
    if status != "ok":
        return status, None, None
    mesh = u.mesh
    src_u = RadialField(mesh, vm ** p)
    src_v = RadialField(mesh, um ** q)
    un = propagate(u, h, cfg.D1, **kw).values + h * propagate(src_u, h / 2, cfg.D1, **kw).values
    vn = propagate(v, h, cfg.D2, **kw).values + h * propagate(src_v, h / 2, cfg.D2, **kw).values
    if not (np.all(np.isfinite(un)) and np.all(np.isfinite(vn))):
        return "diverged", None, None
    t1 = u.time + h
    return "ok", RadialField(mesh, un, t1), RadialField(mesh, vn, t1)


def picard_solve(mu: RadialMeasure, nu: RadialMeasure, sc: SolveConfig):
    """Run the slab scheme on [0, T]; returns (SolveReport, Trajectory)."""
    cfg = sc.cfg
    if mu.N != cfg.N or nu.N != cfg.N:
        raise ValueError("data dimension does not match the configuration")
    for m in (mu, nu):
        if m.bounded and float(np.max(m.density([0.0]))) >= sc.blowup_threshold:
            raise ValueError("blow-up threshold must exceed the initial sup-norms")
    mesh = build_mesh(cfg.N, sc.mesh, (*mu.breaks, *nu.breaks))
    u = discretize(mu, mesh, sc.mesh_tol)
    v = discretize(nu, mesh, sc.mesh_tol)
    atoms = (u.atom, v.atom)
    times, us, vs = [0.0], [u.values], [v.values]
    h_base = sc.T / sc.n_steps
    h_min = h_base * 2.0 ** (-sc.max_halvings)
    h = h_base
    t = 0.0
    halvings = 0
    rising = 0
    outcome: Outcome = Converged()
    su, sv = _sup(u.values), _sup(v.values)
    if u.atom > 0 or not mu.bounded:
        su = math.inf
    if v.atom > 0 or not nu.bounded:
        sv = math.inf
    while t < sc.T * (1 - 1e-12):
        h_try = min(h, sc.T - t)
        status, un, vn = _slab(u, v, h_try, sc)
        if status != "ok":
            if h_try <= h_min * (1 + 1e-12):
                # the step cannot shrink further; a sustained rise means blow-up
                if rising >= sc.collapse_trend:
                    outcome = BlowupDetected(t, "step_collapse")
                else:
                    outcome = PicardDiverged(len(times) - 1, t)
                break
            h = h_try / 2
            halvings += 1
            continue
        su1, sv1 = _sup(un.values), _sup(vn.values)
        growth = max(su1 / su - 1 if 0 < su < math.inf else 0.0,
                     sv1 / sv - 1 if 0 < sv < math.inf else 0.0)
        if growth > sc.growth_limit and h_try > h_min * (1 + 1e-12):
            h = h_try / 2
            halvings += 1
            continue
        t = t + h_try
        u, v = un, vn
        times.append(t)
        us.append(u.values)
        vs.append(v.values)
        top1 = max(su1, sv1)
        if top1 >= sc.blowup_threshold:
            top0 = max((x for x in (su, sv) if math.isfinite(x)), default=0.0)
            t0 = t - h_try
            if 0 < top0 < sc.blowup_threshold:
                frac = (math.log(sc.blowup_threshold) - math.log(top0)) / (math.log(top1) - math.log(top0))
                t_b = t0 + frac * h_try
            else:
                t_b = t
            outcome = BlowupDetected(min(t_b, sc.T))
            break
        rising = rising + 1 if top1 > max((x for x in (su, sv) if math.isfinite(x)), default=0.0) else 0
        su, sv = su1, sv1
        if growth < sc.growth_limit / 4 and h < h_base:
            h = min(2 * h, h_base)
    traj = Trajectory(mesh, cfg, np.array(times), np.array(us), np.array(vs),
                      atoms[0], atoms[1],
                      regular_start=mu.bounded and nu.bounded)
    report = _report(outcome, traj, sc, halvings)
    return report, traj


def _report(outcome, traj: Trajectory, sc: SolveConfig, halvings: int) -> SolveReport:
    n = traj.times.size
    rho = sc.mass_radius
    mu_ = np.array([traj.field_u(i).ball_mass(rho) for i in range(n)])
    mv_ = np.array([traj.field_v(i).ball_mass(rho) for i in range(n)])
    rep = SolveReport(outcome, traj.times, traj.u.max(axis=1), traj.v.max(axis=1), mu_, mv_,
                      rho, float(traj.mesh.edges[1]), halvings)
    if isinstance(outcome, Converged) and sc.residual_window > 0 and n > 2:
        j = n - 1
        i = max(1, j - sc.residual_window)
        if i < j:
            ru, rv = duhamel_residual(traj, i, j)
            rep.residuals = {"tau_index": i, "t_index": j, "u": ru, "v": rv}
    return rep


def duhamel_residual(traj: Trajectory, tau_index: int, t_index: int) -> tuple[float, float]:
    """Sup-norm mismatch of the windowed Duhamel identity on a stored trajectory.

    The source integral over [tau, t] is evaluated by composite Simpson over the
    stored times with exact propagation from each time to t, i.e. independently
    of the midpoint scheme that produced the trajectory.  Returned values are
    relative to the sup-norm of u(t) and v(t).
    """
    n = traj.times.size
    if not (0 <= tau_index < t_index < n):
        raise IndexError("need 0 <= tau_index < t_index < number of stored times")
    if tau_index == 0 and not traj.regular_start:
        raise ValueError("singular data: the window must start after t = 0")
    cfg = traj.cfg
    p, q = float(cfg.p), float(cfg.q)
    t = float(traj.times[t_index])
    s = traj.times[tau_index:t_index + 1]
    out = []
    for D, own, other, field_of, expo in ((cfg.D1, traj.u, traj.v, traj.field_u, p),
                                          (cfg.D2, traj.v, traj.u, traj.field_v, q)):
        lhs = own[t_index]
        rhs = propagate(field_of(tau_index), t - float(s[0]), D).values
        rows = []
        for k, sk in enumerate(s):
            src = RadialField(traj.mesh, other[tau_index + k] ** expo)
            dt = t - float(sk)
            rows.append(src.values if dt <= 0 else propagate(src, dt, D).values)
        rhs = rhs + integrate.simpson(np.array(rows), x=s, axis=0)
        scale = max(_sup(lhs), 1e-300)
        out.append(float(np.max(np.abs(lhs - rhs)) / scale))
    return out[0], out[1]


# ---------------------------------------------------------------- probing


@dataclass
class ProbeResult:
    status: str  # "ok" or "inconclusive"
    bracket: tuple[float, float] | None
    evaluations: list = field(default_factory=list)  # (c, outcome kind)
    message: str = ""

    @property
    def rel_width(self) -> float:
        lo, hi = self.bracket
        return (hi - lo) / hi

    def to_dict(self) -> dict:
        return {"status": self.status, "bracket": self.bracket, "message": self.message,
                "evaluations": [[c, k] for c, k in self.evaluations]}


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("PTL_THREADS", "1")))
    except ValueError:
        return 1


def blowup_probe(case: CaseLabel, cfg: ExponentConfig, c_lo: float, c_hi: float,
                 sc: SolveConfig, rel_width: float = 0.05, threads: int | None = None,
                 family_kw: dict | None = None, max_rounds: int = 40) -> ProbeResult:
    """Bracket the family constant separating Converged from blow-up on [0, T].

    Both constants of the corollary family are set to the probed value c.
    """
    threads = default_threads() if threads is None else max(1, threads)
    base_mu, base_nu = corollary_family(case, cfg, 1.0, 1.0, **(family_kw or {}))
    evals = []

    def exists(c: float) -> bool:
        rep, _ = picard_solve(base_mu.scaled(c), base_nu.scaled(c), sc)
        evals.append((float(c), rep.outcome.kind))
        return rep.converged

    if not (0 <= c_lo < c_hi) or c_hi <= 0:
        return ProbeResult("inconclusive", None, evals, "degenerate bracket")
    if not exists(c_lo):
        return ProbeResult("inconclusive", None, evals, "lower constant does not converge")
    if exists(c_hi):
        return ProbeResult("inconclusive", None, evals, "upper constant converges")
    lo, hi = float(c_lo), float(c_hi)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for _ in range(max_rounds):
            if (hi - lo) / hi <= rel_width:
                break
            if lo > 0:
                cands = [float(c) for c in np.geomspace(lo, hi, threads + 2)[1:-1]]
            else:
                cands = [float(c) for c in np.linspace(lo, hi, threads + 2)[1:-1]]
            flags = list(pool.map(exists, cands)) if pool else [exists(c) for c in cands]
            new_lo, new_hi = lo, hi
            for c, ok in zip(cands, flags):
                if ok:
                    new_lo = c
                else:
                    new_hi = c
                    break
            lo, hi = new_lo, new_hi
    finally:
        if pool:
            pool.shutdown()
    return ProbeResult("ok", (lo, hi), evals)


def rescaled_config(sc: SolveConfig, T_new: float) -> SolveConfig:
    """Same discrete problem seen at horizon T_new: space scales by sqrt(T_new/T)."""
    lam = math.sqrt(T_new / sc.T)
    return SolveConfig(**{**sc.__dict__, "T": T_new, "mesh": sc.mesh.scaled(lam),
                          "mass_radius": sc.mass_radius * lam})
