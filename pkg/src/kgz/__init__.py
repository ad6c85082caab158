"""Spectral simulator and verification toolkit for a damped non-autonomous
Klein-Gordon-Zakharov system on a box."""
from .attractor import (Cloud, PullbackSchedule, estimate_attractor, hausdorff_semidistance,
                        pullback_image, regularity_audit, sample_ball, semicontinuity_sweep)
from .coefficients import BoundsReport, CoefficientFamily, validate_bounds
from .config import ConfigError, RunConfig, parse_config, serialize_config
from .energy import (FitResult, audit_identity, default_gammas, dissipation_rate, energy,
                     fit_domination, fit_exponential, modified_energy)
from .evolution import (Physics, SchemeConfig, Trajectory, benchmark_physics, benchmark_state,
                        propagate, propagate_linear, step)
from .nonlinearity import Nonlinearity, dissipativity_bound, make_nonlinearity, nemitskii, validate_growth
from .operator import mode_block, mode_block_inverse, mode_spectrum, operator_audit, resolvent_norm
from .spectral import Domain, SpectralField, State, apply_fractional, eigenvalue, inner_X, norm_alpha, to_coeff, to_grid

__version__ = "0.1.0"
