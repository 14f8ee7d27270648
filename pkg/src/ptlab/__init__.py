"""Initial traces and nonexistence certificates for a coupled semilinear heat system.

Modules: exponents (regimes), kernel (radial heat semigroup), measures (data
families), solver (mild solutions, blow-up probing), certificates (explicit
lower-bound recursions and trace bounds), cli.
"""

from .exponents import CaseLabel, ExponentConfig, classify

__all__ = ["CaseLabel", "ExponentConfig", "classify"]
__version__ = "0.1.0"
