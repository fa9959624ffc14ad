"""Weighted Bergman kernels, twisted curvature and plurisubharmonic variation at desk scale."""
from .bergman import (BergmanModel, build_model, eval_functional_norm, extremal_check, kernel_eval,
                      measure_functional_norm)
from .curvature import griffiths_check, theta_delta, xi_delta_eta
from .geometry import make_domain, sample_quadrature
from .metric import choose_twist_constants, make_weight
from .variation import psh_check

__all__ = [
    "BergmanModel", "build_model", "choose_twist_constants", "eval_functional_norm", "extremal_check",
    "griffiths_check", "kernel_eval", "make_domain", "make_weight", "measure_functional_norm",
    "psh_check", "sample_quadrature", "theta_delta", "xi_delta_eta",
]
__version__ = "0.1.0"
