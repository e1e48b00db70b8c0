"""
proxflow: forward-backward proximal dynamics for block-structured
nonsmooth problems  min_{x, y}  f(x) + g(y) + H(x, y).
"""

__version__ = "0.1.0"

from ._backend import HAVE_COMPILED
from .analysis import (CritReport, LyapunovSeries, RateFit, SubgradientSeries, arc_length,
                       arc_length_series, fit_rate, lyapunov_value, monitor_decrease,
                       subgradient_residual, verify_critical)
from .dynamics import (ConditionReport, DynParams, beta_constant, check_condition,
                       gamma_rhs, implicit_rhs, inclusion_residual, m_cap, make_rhs,
                       palm_variant_rhs, subgradient_bound_constant)
from .errors import (ArgumentError, ConvergenceError, EvaluationError,
                     InsufficientDataError, ProxflowError)
from .integrate import (SolverConfig, Trajectory, detect_oscillation, fb_discrete,
                        integrate, palm_discrete)
from .presets import DEFAULT_START, PRESETS, get_preset
from .problem import (BlockProblem, GradCheckReport, PartialLipschitz, Quadratic,
                      ResidualSquare, estimate_lipschitz, grad_check, psi_value)
from .proxlib import (ProxHandle, custom_prox, make_prox, prox_abs, prox_box, prox_huber,
                      prox_l1, prox_oracle, prox_quadratic, prox_zero)
