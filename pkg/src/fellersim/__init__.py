"""fellersim: Levy-Khinchine symbols, exit-time bounds, Orlicz norms and
Monte-Carlo diagnostics for strong Feller continuity."""

__version__ = "0.1.0"

from .characteristics import (LevyMeasureSpec, StableLikeIndex, StateTriplet,
                              coeff_bound, eval_symbol, radial_symbol_quadrature,
                              stable_constant)
from .errors import (ConstructionFailure, GridCoverageError, InvalidArgument,
                     NumericFailure)
from .exit_bounds import BallSpec, BoundReport, bound_report, compute_H, compute_h
from .orlicz import (DiscreteMeasure, YoungFunction, holder_defect, legendre,
                     luxemburg_norm, minkowski_defect, orlicz_norm,
                     young_from_uniform_integrability, young_inverse)
from .simulator import (Ball, Box, Brownian, CompoundPoisson, Estimate, ExitRecord,
                        GenericTriplet, IsotropicStable, PathCloud, SimConfig,
                        StableLike, estimate_exit_functional, estimate_resolvent,
                        estimate_semigroup, exit_refinement, interval,
                        path_generator, sample_increment, sample_terminal,
                        simulate_exit)
from .diagnostics import (ACModulus, EmpiricalKernel, HistogramGrid, TVProfile,
                          ac_modulus, build_grid, empirical_kernel, harmonic_profile,
                          tv_null_floor, tv_profile, ultracontractivity_ratio,
                          uniform_decay_check)
