"""Upper functions for L_p-norms of kernel-type Gaussian random fields.

Submodules:

- ``kernel``: kernel catalog, norms and assumption checks;
- ``bandwidth``: multi-bandwidths on a geometric net, bandwidth classes and
  the pointwise Nikolskii selector;
- ``field``: white-noise lattice simulation of the fields and exact oracles;
- ``upper_functions``: constants, upper functions and moment bounds;
- ``entropy``: covering numbers, Dudley integrals and entropy calibration;
- ``verify``: Monte Carlo scenarios and reports.
"""

from .errors import (CapacityError, CoverageError, DomainError, HypothesisError,
                     InsufficientResolutionError, InvalidKernelError, MissingConstantError,
                     NotInClassError, StructureMismatchError, UpfnError)
from .kernel import Kernel, check_assumptions, get_kernel
from .bandwidth import GeometricNet, MultiBandwidth
from .upper_functions import (Constants, UpperFnConfig, combined_psi, constants_report, psi,
                              psi_eps, psi_star, theorem_bound)
from .verify import Scenario, VerificationReport, exceedance_curve, oracle_suite, run_scenario

__version__ = "0.1.0"

__all__ = [
    "UpfnError", "CapacityError", "CoverageError", "DomainError", "HypothesisError",
    "InsufficientResolutionError", "InvalidKernelError", "MissingConstantError",
    "NotInClassError", "StructureMismatchError",
    "Kernel", "check_assumptions", "get_kernel", "GeometricNet", "MultiBandwidth",
    "Constants", "UpperFnConfig", "combined_psi", "constants_report", "psi", "psi_eps",
    "psi_star", "theorem_bound",
    "Scenario", "VerificationReport", "exceedance_curve", "oracle_suite", "run_scenario",
]
