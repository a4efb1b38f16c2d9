"""Ground states of -Δu = g(u) on R^N by dilation projection onto the Pohozaev manifold."""

from . import diagnostics, grid, nonlin, pohozaev, solver
from .diagnostics import FieldSequence, brezis_lieb_defect, local_mass_sup
from .errors import (DomainError, EmptyAdmissibleSet, LineSearchFailure, NoGroundState,
                     NumericalError, ScalarFieldError)
from .grid import (BiradialGrid, Field, RadialGrid, build_biradial_grid, build_radial_grid, dilate,
                   dirichlet, energy_gradient, sample)
from .nonlin import (AssumptionReport, Nonlinearity, check_assumptions, critical_exponent,
                     cubic_quintic, custom, evaluate, logarithmic, m0_threshold, phi_eps,
                     zero_mass_double_power)
from .pohozaev import (EnergyReport, energy, gausson, gausson_level, log_sobolev_gap, project,
                       projection_factor, reduced_level, sharp_constant)
from .solver import (GapOptions, GapRecord, SolveResult, SolverOptions, continuation, minimize, pde_residual,
                     shoot, verify_nonradial_gap)

__version__ = "0.1.0"
