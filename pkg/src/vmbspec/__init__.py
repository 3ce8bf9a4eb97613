"""Spectral structure and decay of linearized kinetic plasma modes.

Hard-sphere collision operators on a tensor Gauss-Hermite velocity grid,
single Fourier-mode generators with transverse electromagnetic fields,
dispersion-relation root tracing, dense eigensolves and decay-rate
synthesis over frequency space.
"""

from .collision import CollisionMatrices, assemble, collision_frequency, solve_L_inverse, transport_coefficients
from .dispersion import (DispersionBranch, SpectrumCoefficients, asymptotic_coefficients, branch_seeds,
                         dispersion_function, newton_solve, resolvent_apply, resolvent_moment, trace_branch)
from .errors import *  # noqa: F401,F403
from .modes import CANONICAL_FRAME, Frame, ModeOperator, assemble_mode, make_frame, weighted_norm
from .semigroup import (DECAY_TARGETS, DecayCurve, ExperimentConfig, fit_exponent, make_initial, propagate_mode,
                        synthesize_decay)
from .spectra import SpectrumReport, crossvalidate, eig_all, eig_near, gap_scan
from .velocity import VelocityGrid, build_grid

__version__ = "0.1.0"
