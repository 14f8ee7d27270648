"""Gauss kernel, the heat semigroup on radial fields, and kernel inequalities.

Radial fields live on a graded mesh of cells [e_k, e_{k+1}] with Gauss-Legendre
collocation nodes inside each cell; the per-cell Lagrange interpolant is the
function the mesh represents.  The N-dimensional heat semigroup acting on a
radial function reduces to

    [S(tau) f](r) = int_0^inf K_N(r, r', tau) f(r') r'^(N-1) dr',

    K_N = (4 pi tau)^(-N/2) (2 pi)^(N/2) exp(-(r - r')^2 / (4 tau)) z^(-nu) I_nu(z) e^(-z),

with z = r r' / (2 tau) and nu = N/2 - 1.  The r'-integral is done by
Gauss-Legendre sub-quadrature fine enough to resolve the Gaussian, so the
discrete operator is a dense matrix that is cached per (mesh, tau).  Outside
Rmax the field is continued by its boundary value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exponents import unit_sphere_area

# Gaussian window: exp(-W^2 / (4 tau)) < 1e-18 for W = 13 sqrt(tau)
_WINDOW = 13.0
BALL_HEAT_CONSTANT = "2^(-N/2) e^(-1/2)"


class DomainTooSmallError(RuntimeError):
    """Raised when the constant-tail continuation could pollute interior nodes."""


def gauss(r, t: float, N: int):
    """G(x, t) = (4 pi t)^(-N/2) exp(-|x|^2 / (4 t)) as a function of r = |x|."""
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    r = np.asarray(r, dtype=float)
    out = (4 * math.pi * t) ** (-N / 2) * np.exp(-(r * r) / (4 * t))
    return float(out) if out.ndim == 0 else out


def gauss_total_mass(t: float, N: int, panels: int = 48, points: int = 20) -> float:
    """Radial quadrature of the integral of G(., t) over R^N."""
    if not t > 0:
        raise ValueError("time must be positive")
    R = 40.0 * math.sqrt(t)
    x, w = np.polynomial.legendre.leggauss(points)
    e = np.linspace(0.0, R, panels + 1)
    a, b = e[:-1, None], e[1:, None]
    r = (a + b) / 2 + (b - a) / 2 * x
    wr = (b - a) / 2 * w
    return float(unit_sphere_area(N) * np.sum(wr * gauss(r, t, N) * r ** (N - 1)))


def _phi_scaled(nu: float, z: np.ndarray) -> np.ndarray:
    """z^(-nu) I_nu(z) e^(-z), with the small-z series where ive is unusable."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1e-6
    zs = z[small]
    out[small] = (1 + zs * zs / (4 * (nu + 1))) * np.exp(-zs) / (2 ** nu * math.gamma(nu + 1))
    big = z > 1e6
    mid = ~small & ~big
    zl = z[mid]
    out[mid] = zl ** (-nu) * special.ive(nu, zl)
    # large-argument expansion; ive loses all precision past z ~ 1e9
    zb = z[big]
    m4 = 4 * nu * nu
    series = 1 - (m4 - 1) / (8 * zb) + (m4 - 1) * (m4 - 9) / (2 * (8 * zb) ** 2)
    out[big] = zb ** (-nu) * series / np.sqrt(2 * math.pi * zb)
    return out


def radial_kernel(r, rp, tau: float, N: int) -> np.ndarray:
    """Spherical average of G(x - y, tau) over |x| = r, |y| = rp (times the sphere area)."""
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    nu = N / 2 - 1
    z = r * rp / (2 * tau)
    pref = (4 * math.pi * tau) ** (-N / 2) * (2 * math.pi) ** (N / 2)
    return pref * np.exp(-((r - rp) ** 2) / (4 * tau)) * _phi_scaled(nu, z)


# ---------------------------------------------------------------- mesh / field


def _barycentric(xi: np.ndarray) -> np.ndarray:
    diff = xi[:, None] - xi[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / diff.prod(axis=1)


def lagrange_matrix(xi: np.ndarray, lam: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis on nodes xi at points x (rows) ."""
    x = np.asarray(x, dtype=float)
    d = x[:, None] - xi[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    t = lam[None, :] / d
    L = t / t.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        L[rows] = hit[rows].astype(float)
    return L


@dataclass(frozen=True, eq=False)
class RadialMesh:
    """Cells 0 = e_0 < e_1 < ... < e_M = Rmax, `order` Gauss nodes per cell."""

    N: int
    edges: np.ndarray
    order: int = 8
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2 or e[0] != 0.0 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must start at 0 and be strictly increasing")
        if self.order < 2:
            raise ValueError("order must be at least 2")
        object.__setattr__(self, "edges", e)
        xi, wi = np.polynomial.legendre.leggauss(self.order)
        a, b = e[:-1, None], e[1:, None]
        nodes = (a + b) / 2 + (b - a) / 2 * xi
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "lam", _barycentric(xi))
        object.__setattr__(self, "cell_nodes", nodes)
        object.__setattr__(self, "nodes", nodes.ravel())
        vol = unit_sphere_area(self.N) * (b - a) / 2 * wi * nodes ** (self.N - 1)
        object.__setattr__(self, "volume_weights", vol.ravel())

    @property
    def Rmax(self) -> float:
        return float(self.edges[-1])

    @property
    def n_cells(self) -> int:
        return self.edges.size - 1

    @property
    def size(self) -> int:
        return self.nodes.size

    def cell_index(self, r) -> np.ndarray:
        idx = np.searchsorted(self.edges, np.asarray(r, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def reference(self, r, cell) -> np.ndarray:
        a, b = self.edges[cell], self.edges[cell + 1]
        return 2 * (np.asarray(r, dtype=float) - a) / (b - a) - 1

    def interpolation_matrix(self, r) -> np.ndarray:
        """Dense matrix mapping node values to interpolant values at radii r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros((r.size, self.size))
        cells = self.cell_index(r)
        for c in np.unique(cells):
            sel = np.nonzero(cells == c)[0]
            L = lagrange_matrix(self.xi, self.lam, self.reference(r[sel], c))
            out[np.ix_(sel, np.arange(c * self.order, (c + 1) * self.order))] = L
        return out

    def boundary_row(self) -> np.ndarray:
        return self.interpolation_matrix([self.Rmax])[0]


def make_mesh(N: int, Rmax: float = 16.0, M: int = 80, grading: float = 1.5,
              r_min: float = 1e-3, order: int = 8, breaks=()) -> RadialMesh:
    """Geometric cells from r_min outward, switching to uniform cells once wider.

    `breaks` are extra radii (data cutoffs) inserted as cell edges.
    """
    if not (Rmax > r_min > 0) or M < 2 or grading <= 1:
        raise ValueError("need Rmax > r_min > 0, M >= 2 and grading > 1")
    edges = [0.0, r_min]
    while len(edges) - 1 < M:
        r = edges[-1]
        remaining = M - (len(edges) - 1)
        uniform = (Rmax - r) / remaining
        if r * (grading - 1) >= uniform:
            edges.extend(np.linspace(r, Rmax, remaining + 1)[1:].tolist())
            break
        edges.append(r * grading)
    if edges[-1] < Rmax:
        edges[-1] = Rmax
    e = np.array(edges)
    for br in breaks:
        if 0 < br < Rmax and np.min(np.abs(e - br)) > 1e-12 * Rmax:
            e = np.sort(np.append(e, br))
    return RadialMesh(N, e, order)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Nonnegative radial function on a mesh, optionally with an atom at 0."""

    mesh: RadialMesh
    values: np.ndarray
    time: float = 0.0
    atom: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.size,):
            raise ValueError("values do not match the mesh")
        if np.any(v < 0) or not np.all(np.isfinite(v)) or self.atom < 0:
            raise ValueError("field values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.mesh.N

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes

    def evaluate(self, r) -> np.ndarray:
        return self.mesh.interpolation_matrix(r) @ self.values

    def sup(self) -> float:
        return math.inf if self.atom > 0 else float(self.values.max(initial=0.0))

    def boundary_value(self) -> float:
        return float(self.mesh.boundary_row() @ self.values)

    def ball_mass(self, rho: float) -> float:
        """Integral of the interpolant over B(0, rho), atom included."""
        m = self.mesh
        if not rho > 0:
            raise ValueError("radius must be positive")
        total = self.atom
        R = m.Rmax
        full = int(np.searchsorted(m.edges, min(rho, R), side="right")) - 1
        full = min(full, m.n_cells)
        total += float(m.volume_weights[: full * m.order] @ self.values[: full * m.order])
        if rho < R and m.edges[full] < rho:
            a = m.edges[full]
            x, w = np.polynomial.legendre.leggauss(m.order + 2)
            r = a + (rho - a) * (x + 1) / 2
            f = self.evaluate(r)
            total += unit_sphere_area(m.N) * float(np.sum((rho - a) / 2 * w * f * r ** (m.N - 1)))
        if rho > R:
            total += self.boundary_value() * unit_sphere_area(m.N) * (rho ** m.N - R ** m.N) / m.N
        return total

    def with_values(self, values, time=None) -> "RadialField":
        return RadialField(self.mesh, values, self.time if time is None else time)


def constant_field(mesh: RadialMesh, level: float, time: float = 0.0) -> RadialField:
    return RadialField(mesh, np.full(mesh.size, float(level)), time)


# ---------------------------------------------------------------- propagation


def _kernel_operator(mesh: RadialMesh, tau: float, targets: np.ndarray,
                     r_upper: float | None = None) -> np.ndarray:
    """Matrix of  f -> int_0^{r_upper} K(target, r', tau) f(r') r'^(N-1) dr'."""
    N = mesh.N
    h = math.sqrt(tau)
    W = _WINDOW * h
    order = mesh.order
    g = order + 4
    xg, wg = np.polynomial.legendre.leggauss(g)
    targets = np.asarray(targets, dtype=float)
    perm = np.argsort(targets, kind="stable")
    ts = targets[perm]
    A = np.zeros((targets.size, mesh.size))
    top = mesh.Rmax if r_upper is None else min(r_upper, mesh.Rmax)
    for c in range(mesh.n_cells):
        a, b = mesh.edges[c], mesh.edges[c + 1]
        bb = min(b, top)
        if bb <= a:
            break
        lo, hi = np.searchsorted(ts, [a - W, bb + W])
        if hi <= lo:
            continue
        n_sub = max(1, math.ceil((bb - a) / h))
        hs = (bb - a) / n_sub
        if n_sub > 4 * (hi - lo) * (2 * _WINDOW + 2):
            # narrow kernel: keep only subcells inside some target's window
            tg = ts[lo:hi]
            k0 = np.clip(np.floor((tg - W - a) / hs), 0, n_sub - 1).astype(np.int64)
            k1 = np.clip(np.ceil((tg + W - a) / hs), 0, n_sub).astype(np.int64)
            keep = np.unique(np.concatenate([np.arange(i, j) for i, j in zip(k0, k1)]))
            if keep.size == 0:
                continue
        else:
            keep = np.arange(n_sub)
        sl, sr = a + keep * hs, np.minimum(a + (keep + 1) * hs, bb)
        xf = ((sl[:, None] + sr[:, None]) / 2 + (sr[:, None] - sl[:, None]) / 2 * xg).ravel()
        wf = (np.repeat((sr - sl) / 2, g) * np.tile(wg, keep.size)) * xf ** (N - 1)
        L = lagrange_matrix(mesh.xi, mesh.lam, mesh.reference(xf, c))
        blk = radial_kernel(ts[lo:hi, None], xf[None, :], tau, N) * wf[None, :]
        A[perm[lo:hi], c * order:(c + 1) * order] += blk @ L
    return A


def _tail_weights(mesh: RadialMesh, tau: float, targets: np.ndarray, A: np.ndarray) -> np.ndarray:
    tail = 1.0 - A.sum(axis=1)
    far = targets < mesh.Rmax - _WINDOW * math.sqrt(tau)
    tail[far] = 0.0
    return np.clip(tail, 0.0, 1.0)


def propagator(mesh: RadialMesh, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Cached (matrix, tail weights) realizing S(tau) at the mesh nodes."""
    if not tau > 0:
        raise ValueError("propagation time must be positive")
    key = float(f"{tau:.15e}")
    hit = mesh._cache.get(key)
    if hit is not None:
        return hit
    A = _kernel_operator(mesh, tau, mesh.nodes)
    tail = _tail_weights(mesh, tau, mesh.nodes, A)
    # S(tau) 1 = 1; rounding in (r - r')/sqrt(tau) spoils this for tiny tau
    interior = mesh.nodes < mesh.Rmax - _WINDOW * math.sqrt(tau)
    A[interior] /= A[interior].sum(axis=1, keepdims=True)
    P = A + np.outer(tail, mesh.boundary_row())
    if len(mesh._cache) >= 96:
        mesh._cache.pop(next(iter(mesh._cache)))
    mesh._cache[key] = (P, tail)
    return P, tail


def _truncation_estimate(mesh: RadialMesh, tail: np.ndarray, values: np.ndarray) -> float:
    scale = float(np.max(np.abs(values), initial=0.0))
    if scale == 0.0:
        return 0.0
    fR = float(mesh.boundary_row() @ values)
    interior = mesh.nodes <= mesh.Rmax / 2
    if not interior.any():
        return 0.0
    return float(tail[interior].max(initial=0.0) * np.max(np.abs(values - fR)) / scale)


def propagate(f: RadialField, dt: float, Dcoef: float = 1.0,
              domain_tol: float = 1e-6) -> RadialField:
    """Discrete S(Dcoef * dt) applied to f; an atom at 0 becomes mass * G."""
    if not dt > 0 or not Dcoef > 0:
        raise ValueError("dt and Dcoef must be positive")
    tau = Dcoef * dt
    P, tail = propagator(f.mesh, tau)
    est = _truncation_estimate(f.mesh, tail, f.values)
    if est > domain_tol:
        raise DomainTooSmallError(
            f"tail continuation error {est:.2e} exceeds {domain_tol:.1e}; enlarge Rmax")
    vals = P @ f.values
    if f.atom > 0:
        vals = vals + f.atom * gauss(f.mesh.nodes, tau, f.mesh.N)
    return RadialField(f.mesh, np.maximum(vals, 0.0), f.time + dt)


def heat_apply(f: RadialField, tau: float, radii, r_upper: float | None = None) -> np.ndarray:
    """[S(tau) f] at arbitrary radii; with r_upper, only the part of f in B(0, r_upper)."""
    if not tau > 0:
        raise ValueError("propagation time must be positive")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    A = _kernel_operator(f.mesh, tau, radii, r_upper)
    if r_upper is None:
        tail = _tail_weights(f.mesh, tau, radii, A)
        A = A + np.outer(tail, f.mesh.boundary_row())
    out = A @ f.values
    if f.atom > 0:
        out = out + f.atom * gauss(radii, tau, f.mesh.N)
    return out


# ---------------------------------------------------------------- inequality checks


@dataclass(frozen=True)
class CheckReport:
    name: str
    radii: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    worst_margin: float  # min over samples of (larger side - smaller side), scaled
    passed: bool


def jensen_check(f: RadialField, t: float, alpha: float, sample_radii,
                 rel_tol: float = 1e-8) -> CheckReport:
    """S(t) f <= (S(t) f^alpha)^(1/alpha) at the sample radii."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if f.atom > 0:
        raise ValueError("powers of an atom are undefined")
    radii = np.atleast_1d(np.asarray(sample_radii, dtype=float))
    lhs = heat_apply(f, t, radii)
    rhs = heat_apply(f.with_values(f.values ** alpha), t, radii) ** (1 / alpha)
    scale = max(float(np.max(rhs, initial=0.0)), 1e-300)
    margin = float(np.min(rhs - lhs)) / scale
    return CheckReport("jensen", radii, lhs, rhs, margin, margin >= -rel_tol)


def ball_heat_constant(N: int) -> float:
    return 2 ** (-N / 2) * math.exp(-0.5)


def ball_heat_lower_check(rho: float, t: float, f: RadialField, x_samples,
                  rel_tol: float = 1e-9) -> CheckReport:
    """int_{B(0,rho)} G(x-y,t) f(y) dy >= 2^(-N/2) e^(-1/2) G(x,t/2) int_{B(0,rho)} f."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    if t < rho * rho:
        raise ValueError("kernel lower bound needs t >= rho^2")
    x = np.atleast_1d(np.asarray(x_samples, dtype=float))
    r = np.linalg.norm(x, axis=-1) if x.ndim > 1 else np.abs(x)
    lhs = heat_apply(f, t, r, r_upper=rho)
    rhs = ball_heat_constant(f.dim) * gauss(r, t / 2, f.dim) * f.ball_mass(rho)
    scale = np.maximum(lhs, 1e-300)
    margin = float(np.min((lhs - rhs) / scale))
    return CheckReport("ball_heat_lower", r, lhs, np.atleast_1d(rhs), margin, margin >= -rel_tol)


def gaussian_power_bound(alpha: float, beta: float, L: float, x, s: float, t: float,
                  N: int) -> tuple[float, float]:
    """Both sides of the Gaussian-power convolution bound.

    lhs = int G(x-y, t-s) G(y, (s+L)/alpha)^beta dy, evaluated in closed form;
    rhs = its explicit lower bound.
    """
    if not (alpha > 0 and beta > 0 and L >= 0):
        raise ValueError("need alpha > 0, beta > 0, L >= 0")
    if not (0 < s < t):
        raise ValueError("need 0 < s < t")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    ab = alpha * beta
    pref = ((4 * math.pi / alpha) ** (-N * (beta - 1) / 2) * beta ** (-N / 2)
            * (s + L) ** (-N * (beta - 1) / 2))
    lhs = pref * gauss(r, (t - s) + (s + L) / ab, N)
    ratio = min(ab, 1.0) / max(ab, 1.0)
    rhs = pref * ratio ** (N / 2) * gauss(r, (t + L) / max(ab, 1.0), N)
    return lhs, rhs


def diffusion_comparison_margin(r, t: float, Di: float, Dp: float, N: int) -> np.ndarray:
    """G(r, Di t) - Dp^(-N/2) G(r, t); nonnegative whenever 1 <= Di <= Dp."""
    return gauss(r, Di * t, N) - Dp ** (-N / 2) * gauss(r, t, N)


# ---------------------------------------------------------------- ball covers


@dataclass(frozen=True)
class CoverPlan:
    k: float
    N: int
    centers: np.ndarray  # (m, N), in units of the small radius

    @property
    def m(self) -> int:
        return int(self.centers.shape[0])

    def covers(self, points: np.ndarray) -> np.ndarray:
        d2 = ((points[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=-1)
        return d2.min(axis=1) <= 1.0 + 1e-12

    def verify(self, n_samples: int = 4000, seed: int = 0) -> bool:
        """Sampled check of B(0,k) subset of the union of unit balls."""
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((n_samples, self.N))
        sphere = self.k * g / np.linalg.norm(g, axis=1, keepdims=True)
        radial = self.k * rng.random(n_samples) ** (1 / self.N)
        inside = sphere * (radial / self.k)[:, None]
        pts = np.vstack([sphere, inside])
        ok = True
        for chunk in np.array_split(pts, max(1, pts.shape[0] // 2000)):
            ok &= bool(self.covers(chunk).all())
        return ok


def ball_cover(k: float, N: int) -> CoverPlan:
    """Unit balls on the cubic lattice of spacing 2/sqrt(N) that meet B(0, k)."""
    if k < 1:
        raise ValueError("expansion factor must be >= 1")
    s = 2 / math.sqrt(N)
    n = math.ceil((k + 1) / s)
    axis = s * np.arange(-n, n + 1)
    grid = np.stack(np.meshgrid(*([axis] * N), indexing="ij"), axis=-1).reshape(-1, N)
    keep = np.linalg.norm(grid, axis=1) < k + 1
    return CoverPlan(float(k), N, grid[keep])
