"""First passage percolation limit shapes: simulation, datasets and learned predictors."""
from .simulator import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
