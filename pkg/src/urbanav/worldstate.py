"""World-state features: what is at the agent's position and on the path ahead.

Both vectors are multi-hot over a fixed layout: one bit per entity type in
the closed inventory, then one slot per ``<TYPE_k>`` variable token up to a
fixed k per type. Variables beyond the slot budget contribute no slot and
fall back to their type bit. Vectors are recomputed from scratch after every
executed action, never updated incrementally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abstraction import parse_variable
from .executor import Pose, pose_tile
from .worldmap import ENTITY_TYPES, GridMap, TileCoord

DEFAULT_HORIZON = 10
DEFAULT_RADIUS = 1
DEFAULT_SLOTS_PER_TYPE = 4


@dataclass(frozen=True)
class WorldStateLayout:
    types: tuple[str, ...] = ENTITY_TYPES
    slots_per_type: int = DEFAULT_SLOTS_PER_TYPE

    @property
    def width(self) -> int:
        return len(self.types) * (1 + self.slots_per_type)

    def type_index(self, etype: str) -> int:
        return self.types.index(etype)

    def slot_index(self, variable_token: str) -> int | None:
        """Global slot of a variable token, or None when k overflows."""
        etype, k = parse_variable(variable_token)
        if k > self.slots_per_type or etype not in self.types:
            return None
        t = self.types.index(etype)
        return len(self.types) + t * self.slots_per_type + (k - 1)

    def describe(self) -> dict:
        return {"types": list(self.types), "slots_per_type": self.slots_per_type}


@dataclass(frozen=True)
class WorldState:
    here: np.ndarray
    ahead: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.here, self.ahead])


def compute(
    grid: GridMap,
    pose: Pose,
    bindings,
    layout: WorldStateLayout,
    horizon: int = DEFAULT_HORIZON,
    radius: int = DEFAULT_RADIUS,
    dtype=np.float32,
) -> WorldState:
    """World state at ``pose`` for one sentence's variable bindings.

    Type bits: an entity of type t intersects the Chebyshev ball around the
    current tile (here) or a tile of the path ahead (ahead). Variable slots:
    the bound grounding (entity or street) intersects the same scope.
    """
    here = np.zeros(layout.width, dtype=dtype)
    ahead = np.zeros(layout.width, dtype=dtype)
    tile = pose_tile(grid, pose)
    ahead_tiles = grid.path_ahead(pose, horizon)

    for dc in range(-radius, radius + 1):
        for dr in range(-radius, radius + 1):
            near = TileCoord(tile.col + dc, tile.row + dr)
            for etype in grid.entity_types_at_tile(near):
                here[layout.type_index(etype)] = 1.0
    for t in ahead_tiles:
        for etype in grid.entity_types_at_tile(t):
            ahead[layout.type_index(etype)] = 1.0

    for var, gid in bindings:
        slot = layout.slot_index(var)
        if slot is None:
            continue
        if tile in grid.tiles_within(gid, radius):
            here[slot] = 1.0
        if ahead_tiles:
            footprint = grid.tiles_within(gid, 0)
            if any(t in footprint for t in ahead_tiles):
                ahead[slot] = 1.0
    return WorldState(here, ahead)
