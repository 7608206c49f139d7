"""Black-start restoration path planning for grids with an LCC-HVDC infeed."""

from importlib import resources

__version__ = "0.1.0"

from .grid_model import GridModel, ValidationError, derive_floors, load_grid
from .hvdc import dc_ceiling
from .optimize import GaConfig, NoFeasibleScheme, dijkstra_baseline, mpga_optimize, resolve_sources
from .simulate import InfeasibleScheme, RestorationScheme, Timeline, Unreachable, simulate, stage_table

__all__ = [
    "__version__",
    "data_path",
    "GridModel",
    "ValidationError",
    "derive_floors",
    "load_grid",
    "dc_ceiling",
    "GaConfig",
    "NoFeasibleScheme",
    "dijkstra_baseline",
    "mpga_optimize",
    "resolve_sources",
    "InfeasibleScheme",
    "RestorationScheme",
    "Timeline",
    "Unreachable",
    "simulate",
    "stage_table",
]


def data_path(name: str):
    """Path of a bundled fixture such as ``"ieee39.json"``."""
    return resources.files(__name__).joinpath("data", name)
