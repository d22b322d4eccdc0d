"""Rectangle-restricted multivariate isotonic regression."""

from .baseline import DykstraFit, PavaFit, dykstra_isotonic, isotonic_1d, pava
from .dataset import Dataset, DimKind, lag_embed, load_csv, write_csv
from .errors import InvariantViolation, RectIsoError
from .estimator import IsotonicFit, fit_grid, lower_estimate, predict, upper_estimate
from .lattice import (
    LatticeSpec,
    bandwidth,
    build_lattice,
    equispaced_grid,
    interior_domain,
    occupancy,
    trim_to_data,
)
from .rect_average import RectAverager
from .simulate import DgpKind, DgpSpec, IidParams, f_sim, simulate, simulate_poisson_trend

__version__ = "0.1.0"
