"""Spatial stochastic SIR epidemics on R^d.

Simulate the N-individual model (diffusive motion, nonlocal infection,
constant-rate recovery), solve its large-population density limit on a
truncated grid, and verify the convergence rate and the fluctuation
covariance structure against finite test-function dictionaries.
"""

from .cells import CellIndex, build_cell_index
from .config import ConfigError, ExperimentConfig, build_config, load_config
from .fluctuations import (BracketSpec, OUGalerkinSystem, ReplicateEnsemble,
                           bracket_quadrature, cov_compare, gaussianity_report,
                           initial_fluct_cov, lyapunov_covariance,
                           ou_galerkin_build, ou_galerkin_simulate, run_ensemble)
from .measures import (SignedMeasureCoords, TestDictionary, basis_build,
                       delta_norm, delta_norm_envelope, dual_norm, fluctuation,
                       kde, pair, pairing_matrix)
from .model import (BallRegion, BoxRegion, CoefficientField, CompartmentLabel,
                    ContactKernel, GaussianDiag, InitialLaw, ModelSpec,
                    PowerTail1D, UniformBox, constant_beta_kernel,
                    constant_field, custom_beta_kernel, custom_field,
                    gaussian_bump_field, generator_apply, infection_pressure,
                    kernel_eval, tanh_field, validate_model)
from .particle import (PopulationState, SimConfig, TrajectoryRecord,
                       epidemic_step, infection_pressures_all,
                       infection_pressures_naive, init_population,
                       martingale_track, motion_step, simulate)
from .pde import (DensityField, FieldSeries, Grid, PicardConfig,
                  convolve_kernel, fokker_planck_step, initial_field,
                  picard_solve, reaction_step, semigroup_mass_check,
                  sir_ode_reduce, solve)
from .studies import StudyResult, run_clt_study, run_lln_study

__version__ = "0.1.0"
