"""Linear upper and lower bounds on the expected total reward of succinct MDPs.

A succinct MDP is a single ``while`` loop whose body is a nondeterministic
choice among affine, randomised blocks.  Bounds come from linear potential
functions found by linear programming (Farkas) or alternating bilinear search
(Motzkin), and are checked against simulation and value iteration.
"""
from .frontend import SMDPError, load_model, load_model_file
from .oracle import Policy, SimEstimate, UnsupportedModel, simulate, value_iteration
from .semantics import ModelIR
from .solve import (
    BoundCertificate,
    NoCertificate,
    SolverConfig,
    inf_bounds,
    lower_bound_fixed,
    lower_bound_motzkin,
    synthesize,
    upper_bound,
    verify_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "BoundCertificate", "ModelIR", "NoCertificate", "Policy", "SMDPError", "SimEstimate", "SolverConfig",
    "UnsupportedModel", "inf_bounds", "load_model", "load_model_file", "lower_bound_fixed", "lower_bound_motzkin",
    "simulate", "synthesize", "upper_bound", "value_iteration", "verify_certificate",
]
