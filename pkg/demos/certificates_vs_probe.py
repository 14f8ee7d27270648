"""
Certified thresholds against empirical blow-up constants
========================================================

For singular data c|x|^(-2(p+1)/(pq-1)) the iteration ledger yields a
constant above which no solution exists on [0, 1].  The solver gives the
empirical constant where solutions stop existing.  The certificate is one
sided, so it must sit above the empirical bracket; the gap shows how much the
explicit constants lose.
"""

# %%
import numpy as np

from ptlab.certificates import bound_report, family_threshold, ledger_A
from ptlab.exponents import CaseLabel, ExponentConfig
from ptlab.measures import Dirac, corollary_family
from ptlab.solver import SolveConfig, blowup_probe

cfg = ExponentConfig(3, 2, 3)

# %%
led = ledger_A(cfg, M=1.0, rho=0.25, n_max=8)
print("b_n:", [str(b) for b in led.b[:5]], " c_n:", [str(c) for c in led.c[:5]])
print("closed forms hold:", led.closed_form_ok, " a_n >= (a_* M)^(pq)^n:", led.a_star_holds())
print(f"log a_* = {led.a_star.log_value:.2f}  ({led.a_star.provenance})")

# %%
thr = family_threshold(CaseLabel.A, cfg)
print(f"certified family threshold c = {thr.c:.4g}")

# %%
# about 20 seconds: bisection on the family constant
res = blowup_probe(CaseLabel.A, cfg, 0.1, 2.0, SolveConfig(cfg, T=1.0, n_steps=50))
lo, hi = res.bracket
print(f"empirical bracket [{lo:.4f}, {hi:.4f}], relative width {res.rel_width:.1%}")
print(f"certificate / empirical constant ~ {thr.c / hi:.0f}")

# %% [markdown]
# Trace conditions in the supercritical regime: a point mass makes the
# integral condition diverge, so no solution exists for any constant.

# %%
cfg_d = ExponentConfig(3, 1, 2)
rep = bound_report("integral-D", Dirac(3, 1.0), Dirac(3, 1.0), cfg_d,
                   np.geomspace(1e-4, 1e-1, 7), gamma=1e12)
print(rep.message, "passed:", rep.passed)
