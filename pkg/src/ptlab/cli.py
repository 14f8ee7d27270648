"""Command line front end: ``ptlab <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure
(inconclusive probe, failed self-test, Picard divergence, domain too small).

Run-config JSON::

    {"cfg": {"N": 3, "p": "2", "q": "3", "D1": 1.0, "D2": 1.0},
     "family_u": {"family": "power", "c": 0.5, "a": 1.2},
     "family_v": {"family": "power", "c": 0.5, "a": 1.6},
     "solve": {"T": 1.0, "n_steps": 100, "Rmax": 16, "M": 80, "tol": 1e-11,
               "threshold": 1e8},
     "seed": 0}

Instead of family_u/family_v a config may give {"corollary": {"c1": .., "c2": ..}},
the matched data pair of the configuration's case.  Command line flags
override config fields.

CSV outputs start with a ``# config=<json>`` line holding the resolved config.
  solve:  t, sup_u, sup_v, mass_u, mass_v   (masses of B(0, mass_radius))
  bounds: sigma, lhs, rhs_template, ratio
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import certificates as cert
from .exponents import CaseLabel, ExponentConfig, as_number, classify, label_is_tolerance_dependent
from .kernel import DomainTooSmallError, RadialField, gauss_total_mass, make_mesh, propagate
from .measures import RadialMeasure, Tabulated, corollary_family, measure_from_dict
from .solver import (MeshResolutionError, MeshSpec, PicardDiverged, SolveConfig, blowup_probe,
                     picard_solve)


class NumericalFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, CaseLabel):
        return o.value
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    cfg: ExponentConfig
    mu: RadialMeasure | None
    nu: RadialMeasure | None
    solve: SolveConfig | None
    seed: int
    resolved: dict


_SOLVE_KEYS = {"T", "n_steps", "Rmax", "M", "grading", "r_min", "tol", "threshold",
               "mass_radius", "growth_limit", "picard_max_iter"}


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    return data


def _cfg_from(raw: dict, args) -> dict:
    d = dict(raw.get("cfg", {}))
    for k in ("N", "p", "q", "D1", "D2"):
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    missing = [k for k in ("N", "p", "q") if k not in d]
    if missing:
        raise ValueError(f"exponent configuration lacks {', '.join(missing)}")
    return d


def _solve_from(raw: dict, args, cfg: ExponentConfig) -> tuple[SolveConfig, dict]:
    s = dict(raw.get("solve", {}))
    unknown = set(s) - _SOLVE_KEYS
    if unknown:
        raise ValueError(f"unknown solve fields: {sorted(unknown)}")
    for flag, key in (("T", "T"), ("n_steps", "n_steps"), ("Rmax", "Rmax"), ("M", "M"),
                      ("tol", "tol"), ("threshold", "threshold")):
        v = getattr(args, flag, None)
        if v is not None:
            s[key] = v
    if "T" not in s:
        raise ValueError("solve.T (horizon) is required")
    spec = MeshSpec(float(s.get("Rmax", 16.0)), int(s.get("M", 80)), float(s.get("grading", 1.5)),
                    float(s.get("r_min", 1e-3)))
    sc = SolveConfig(cfg, float(s["T"]), n_steps=int(s.get("n_steps", 200)),
                     picard_tol=float(s.get("tol", 1e-11)),
                     picard_max_iter=int(s.get("picard_max_iter", 80)),
                     blowup_threshold=float(s.get("threshold", 1e8)), mesh=spec,
                     growth_limit=float(s.get("growth_limit", 0.01)),
                     mass_radius=float(s.get("mass_radius", 1.0)))
    return sc, s


def resolve_config(path: str | None, args, need_family: bool, need_solve: bool) -> RunConfig:
    raw = _load_json(path)
    cd = _cfg_from(raw, args)
    cfg = ExponentConfig.from_dict(cd)
    resolved = {"cfg": cfg.to_dict(), "seed": int(raw.get("seed", getattr(args, "seed", 0) or 0))}
    mu = nu = None
    if need_family:
        if "corollary" in raw:
            co = raw["corollary"]
            h = Tabulated(co["table"]["s"], co["table"]["h"]) if "table" in co else None
            mu, nu = corollary_family(classify(cfg), cfg, float(co["c1"]), float(co["c2"]), h=h)
            resolved["corollary"] = co
        elif "family_u" in raw and "family_v" in raw:
            mu = measure_from_dict(raw["family_u"], cfg.N)
            nu = measure_from_dict(raw["family_v"], cfg.N)
        else:
            raise ValueError("config needs family_u and family_v, or corollary")
        resolved["family_u"] = mu.to_dict()
        resolved["family_v"] = nu.to_dict()
    sc = None
    if need_solve:
        sc, s = _solve_from(raw, args, cfg)
        resolved["solve"] = s
    return RunConfig(cfg, mu, nu, sc, resolved["seed"], resolved)


def _write(out: str | None, name: str, text: str) -> str | None:
    if out is None:
        return None
    d = Path(out)
    try:
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    except OSError as exc:
        raise ValueError(f"cannot write {d / name}: {exc.strerror}") from exc
    return str(d / name)


# ---------------------------------------------------------------- subcommands


def cmd_classify(args) -> int:
    cfg = ExponentConfig.from_dict(_cfg_from({}, args))
    out = {"case": classify(cfg).value, "alpha": cfg.alpha, "beta": cfg.beta,
           "sing_u": cfg.sing_u, "sing_v": cfg.sing_v, "fujita_q": cfg.fujita_q,
           "tolerance_dependent": label_is_tolerance_dependent(cfg), "cfg": cfg.to_dict()}
    if out["tolerance_dependent"]:
        print("ptlab: warning: the configuration sits on a case boundary only up to the "
              "float tolerance; the label is tolerance-dependent", file=sys.stderr)
    print(_dump(out))
    return 0


def cmd_kernel_selftest(args) -> int:
    rng = np.random.default_rng(args.seed)
    norm = []
    for N in (1, 2, 3):
        for t in (0.01, 1.0, 100.0):
            err = abs(gauss_total_mass(t, N) - 1)
            norm.append({"N": N, "t": t, "error": err, "passed": err <= 1e-10})
    semi = []
    for k in range(args.trials):
        N = int(rng.integers(1, 4))
        mesh = make_mesh(N, Rmax=16.0, M=40)
        width = rng.uniform(0.5, 2.0)
        f = RadialField(mesh, rng.uniform(0.5, 2) * np.exp(-(mesh.nodes / width) ** 2))
        s, t = rng.uniform(0.01, 0.5, size=2)
        one = propagate(propagate(f, s), t).values
        two = propagate(f, s + t).values
        inner = mesh.nodes <= mesh.Rmax / 2
        err = float(np.max(np.abs(one - two)[inner]) / np.max(np.abs(two[inner])))
        semi.append({"N": N, "s": s, "t": t, "rel_error": err, "passed": err <= 1e-8})
    ok = all(r["passed"] for r in norm + semi)
    print(_dump({"normalization": norm, "semigroup": semi, "passed": ok, "seed": args.seed}))
    return 0 if ok else 2


def _trajectory_csv(rep, resolved) -> str:
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(resolved, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "sup_u", "sup_v", "mass_u", "mass_v"])
    for row in zip(rep.times, rep.sup_u, rep.sup_v, rep.mass_u, rep.mass_v):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def cmd_solve(args) -> int:
    rc = resolve_config(args.config, args, need_family=True, need_solve=True)
    rep, _ = picard_solve(rc.mu, rc.nu, rc.solve)
    out = {"config": rc.resolved, "report": rep.to_dict()}
    _write(args.out, "trajectory.csv", _trajectory_csv(rep, rc.resolved))
    _write(args.out, "report.json", _dump(out) + "\n")
    print(_dump(out))
    return 2 if isinstance(rep.outcome, PicardDiverged) else 0


def cmd_probe(args) -> int:
    rc = resolve_config(args.config, args, need_family=False, need_solve=True)
    case = CaseLabel(args.case)
    res = blowup_probe(case, rc.cfg, args.c_lo, args.c_hi, rc.solve, rel_width=args.rel_width,
                       threads=args.threads)
    out = {"config": {**rc.resolved, "case": case.value, "c_lo": args.c_lo, "c_hi": args.c_hi,
                      "rel_width": args.rel_width},
           "probe": res.to_dict()}
    _write(args.out, "probe.json", _dump(out) + "\n")
    print(_dump(out))
    return 0 if res.status == "ok" else 2


def cmd_certify(args) -> int:
    cfg = ExponentConfig.from_dict(_cfg_from(_load_json(args.config), args))
    case = CaseLabel(args.case)
    fn = {CaseLabel.A: cert.ledger_A, CaseLabel.B: cert.ledger_B, CaseLabel.C: cert.ledger_C}.get(case)
    if fn is None:
        raise ValueError(f"no certificate machinery in case {case.value}")
    if classify(cfg) is not case:
        raise ValueError(f"configuration is in case {classify(cfg).value}, not {case.value}")
    led = fn(cert.normalized(cfg), args.M, args.rho, args.n_max)
    mc = cert.certify(case, cfg, args.rho)
    ft = cert.family_threshold(case, cfg, args.T)
    out = {"config": {"cfg": cfg.to_dict(), "case": case.value, "M": args.M, "rho": args.rho,
                      "n_max": args.n_max, "T": args.T},
           "ledger": led.to_dict(), "certificate": mc.to_dict(),
           "certifies_nonexistence": mc.certifies(args.M), "family_threshold": ft.to_dict()}
    _write(args.out, "certificate.json", _dump(out) + "\n")
    print(_dump(out))
    return 0


def cmd_bounds(args) -> int:
    rc = resolve_config(args.config, args, need_family=True, need_solve=False)
    sig = np.geomspace(args.sigma_min, args.sigma_max, args.n_sigma)
    rep = cert.bound_report(args.theorem, rc.mu, rc.nu, rc.cfg, sig, gamma=args.gamma, T=args.T)
    resolved = {**rc.resolved, "theorem": args.theorem, "sigma_min": args.sigma_min,
                "sigma_max": args.sigma_max, "n_sigma": args.n_sigma, "gamma": args.gamma,
                "T": args.T}
    text = rep.to_csv(resolved)
    _write(args.out, "bounds.csv", text)
    _write(args.out, "bounds.json", _dump({"config": resolved, "report": rep.to_dict()}) + "\n")
    sys.stdout.write(text)
    print("# " + json.dumps(rep.to_dict(), sort_keys=True, default=_json_default))
    if rep.divergent or rep.passed is False:
        return 2
    return 0


# ---------------------------------------------------------------- parser


def _add_cfg(p, required: bool):
    p.add_argument("--N", type=int, required=required, help="space dimension")
    p.add_argument("--p", type=as_number, required=required, help="exponent p (e.g. 2 or 3/2)")
    p.add_argument("--q", type=as_number, required=required, help="exponent q >= p")
    p.add_argument("--D1", type=float, help="diffusion coefficient of u")
    p.add_argument("--D2", type=float, help="diffusion coefficient of v")


def _add_solve(p):
    p.add_argument("--T", type=float, help="horizon")
    p.add_argument("--n-steps", dest="n_steps", type=int, help="base number of time steps")
    p.add_argument("--Rmax", type=float, help="radial domain size")
    p.add_argument("--M", type=int, help="number of mesh cells")
    p.add_argument("--tol", type=float, help="Picard tolerance (relative sup-norm)")
    p.add_argument("--threshold", type=float, help="blow-up sup-norm threshold")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ptlab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("classify", help="case label and singularity exponents")
    _add_cfg(p, required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("kernel-selftest", help="normalization and semigroup checks of the heat kernel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_kernel_selftest)

    p = sub.add_parser("solve", help="mild solution on [0, T]; writes trajectory.csv and report.json")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory")
    _add_cfg(p, required=False)
    _add_solve(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("probe", help="bracket the blow-up constant of the matched data family")
    p.add_argument("--case", required=True, choices=[c.value for c in CaseLabel])
    p.add_argument("--c-lo", dest="c_lo", type=float, required=True)
    p.add_argument("--c-hi", dest="c_hi", type=float, required=True)
    p.add_argument("--rel-width", dest="rel_width", type=float, default=0.05)
    p.add_argument("--threads", type=int, help="parallel solves (default: PTL_THREADS or 1)")
    p.add_argument("--config")
    p.add_argument("--out")
    _add_cfg(p, required=False)
    _add_solve(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("certify", help="iteration ledger and nonexistence threshold")
    p.add_argument("--case", required=True, choices=["A", "B", "C"])
    p.add_argument("--M", type=float, required=True, help="ball mass of the rescaled data")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--n-max", dest="n_max", type=int, default=40)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--config")
    p.add_argument("--out")
    _add_cfg(p, required=False)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bounds", help="trace-bound report along a sigma grid (CSV)")
    p.add_argument("--theorem", required=True, choices=list(cert.BOUND_TAGS))
    p.add_argument("--config", required=True)
    p.add_argument("--sigma-min", dest="sigma_min", type=float, default=1e-6)
    p.add_argument("--sigma-max", dest="sigma_max", type=float, default=1e-2)
    p.add_argument("--n-sigma", dest="n_sigma", type=int, default=41)
    p.add_argument("--gamma", type=float)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--out")
    _add_cfg(p, required=False)
    p.set_defaults(func=cmd_bounds)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (DomainTooSmallError, MeshResolutionError, NumericalFailure, FloatingPointError) as exc:
        print(f"ptlab: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError) as exc:
        print(f"ptlab: invalid input: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
