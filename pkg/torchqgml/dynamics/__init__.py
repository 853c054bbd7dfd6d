from .grid import SpectralGrid, SpectralField, get_grid, exponential_transfer
from .params import PhysicalParams
from .solver import ModelState, forward_pv, invert, tendency, jacobian
from .solver import step_ab3, rollout, iterate, adams_bashforth, filter_state
from .solver import total_kinetic_energy, random_initial_condition
from .coarse_grain import FilterSpec, TrainingPair, apply_filter, coarsen
from .coarse_grain import refine, subgrid_tendency
