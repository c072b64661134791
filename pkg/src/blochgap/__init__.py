"""blochgap: first-order spectral-gap predictions for periodically perturbed
quantum waveguides, cross-checked by a Bloch-fiber Galerkin eigensolver."""

__version__ = "0.1.0"

from .geometry import (Interval, Rectangle, WaveguideConfig, TransverseMode,
                       transverse_modes, check_simplicity, quadrature_rule)
from .bands import (BandIndex, Intersection, band_value, band_range,
                    find_intersections, isolation_check)
from .forms import FourierSeries
from .perturbation import (Potential, Magnetic, BoundaryDeformation2D, Twist3D,
                           GeneralSecondOrder, Profile, SeparableTerm,
                           CouplingMatrix, fiber_overlap, coupling_matrix,
                           magnetic_entries, deformation_overlap, twist_overlap,
                           fourier_coefficient)
from .predictor import (KCoeffs, GapPrediction, k_coefficients, beta_pm,
                        K_curve, t_extrema, predict_gap, magnetic_gap_conditions)
from .cell_solver import (Truncation, BandStructure, GapReport, ConvergenceReport,
                          assemble_fiber_matrix, hermitian_eigenvalues,
                          band_structure, detect_gap, convergence_study)
from .config import JobConfig, parse_config, config_hash

__all__ = [name for name in dir() if not name.startswith("_")]
