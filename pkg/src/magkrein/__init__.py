"""Eigenvalues of a magnetic Schrödinger operator with a circle potential via point-potential Krein matrices."""
from .exactcircle import CircleMeasureProblem, exact_circle_eigenvalues, fourier_mode_coefficient
from .green import MagneticSystem, PlanePoint, SpectralWindow, default_windows, green0, phase_factor, xi_homogeneous
from .pointop import (
    PointConfiguration,
    assemble_lambda,
    circulant_eigenvalues,
    coupling_alpha_for_circle,
    equidistant_circle_points,
    scan_gap_for_eigenvalues,
    schur_holmgren_bound,
)
from .specfun import digamma, ln_gamma, tricomi_u_b1
from .study import StudyConfig, run_convergence_study

__version__ = "0.1.0"
