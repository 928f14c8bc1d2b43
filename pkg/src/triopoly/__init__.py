"""Stability and bifurcation toolkit for two heterogeneous triopoly games.

Both games share an isoelastic demand ``p = 1/Q`` and three firms: firm 2
best-responds naively, firm 3 follows a gradient rule with speed ``k``. Firm 1
either moves a fraction ``l`` toward its best response (``anb``) or
best-responds to a local linear approximation of demand (``lnb``).
"""

__version__ = "0.1.0"

from .kernels import BACKEND
from .model import (
    Domain,
    DomainEscape,
    Equilibria,
    Model,
    ModelParams,
    ParameterError,
    State,
    equilibria,
    marginal_profit,
    step,
)
from .linearization import CharPoly3, charpoly, e2_charpoly, eigenvalues, jacobian, spectral_radius
from .criteria import (
    BifurcationKind,
    BifurcationTest,
    StabilityReport,
    Verdict,
    flip_test,
    ns_test,
    schur_cohn_3,
    schur_cohn_general,
)
from .analysis import (
    Axis,
    CellClass,
    OrbitEscaped,
    OrbitRecord,
    Status,
    bifurcation_diagram,
    lyapunov_max,
    scan_plane,
    simulate,
    simulate_many,
    trace_zero_curve,
)

__all__ = [
    "__version__", "BACKEND",
    "Domain", "DomainEscape", "Equilibria", "Model", "ModelParams", "ParameterError", "State",
    "equilibria", "marginal_profit", "step",
    "CharPoly3", "charpoly", "e2_charpoly", "eigenvalues", "jacobian", "spectral_radius",
    "BifurcationKind", "BifurcationTest", "StabilityReport", "Verdict",
    "flip_test", "ns_test", "schur_cohn_3", "schur_cohn_general",
    "Axis", "CellClass", "OrbitEscaped", "OrbitRecord", "Status",
    "bifurcation_diagram", "lyapunov_max", "scan_plane", "simulate", "simulate_many",
    "trace_zero_curve",
]
