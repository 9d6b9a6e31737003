"""urbanav: grounded navigation on tile-grid city maps, at desk scale."""

__version__ = "0.1.0"

from .executor import Action, Pose, Route
from .model import ModelConfig, NavigationModel
from .worldmap import Entity, GridMap, Street, TileCoord, load_map

__all__ = [
    "Action",
    "Entity",
    "GridMap",
    "ModelConfig",
    "NavigationModel",
    "Pose",
    "Route",
    "Street",
    "TileCoord",
    "load_map",
    "__version__",
]
