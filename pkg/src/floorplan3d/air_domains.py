"""Designer-declared air isolation walls and the hot/warm placement regions
they induce.

A wall is a one-cell-wide trench of low-pressure air spanning a full layer
edge to edge. It shows up in two places: thermally (the trench cells get the
isolating-air material during assembly) and topologically (placement treats
wall cells as occupied and restricts every block to the region matching its
power density). Walls are specified by the designer, never synthesized.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .geometry import (
    AirWall, CellGrid, CollisionError, Floorplan, FunctionalUnit, StackSpec,
    build_grid, occupancy_grid,
)

HOT = "hot"
WARM = "warm"


class UncoveredFuError(KeyError):
    pass


class RegionSpec:
    """Per-layer hot/warm partition induced by at most one wall per layer.

    The hot region of a walled layer is the side given by hot_sides (default:
    the side the wall offset is measured from); the other side is warm. Layers
    without a wall are unpartitioned and open to both labels. Heat sources at
    or above the power-density threshold are hot, everything else warm;
    explicit overrides win.
    """

    def __init__(self, stack: StackSpec, fus: list[FunctionalUnit],
                 walls: list[AirWall], threshold: float | None = None,
                 overrides: dict[str, str] | None = None,
                 hot_sides: dict[int, str] | None = None):
        self.stack = stack
        self.walls = list(walls)
        self.grid = build_grid(stack)
        self.overrides = dict(overrides or {})
        self.hot_sides = dict(hot_sides or {})
        if threshold is None:
            dens = [f.power_density(self.grid.cell_xy_um)
                    for f in fus if f.kind == "heat_source"]
            threshold = float(np.median(dens)) if dens else 0.0
        self.threshold = threshold
        per_layer = {}
        for w in self.walls:
            if w.layer in per_layer:
                raise ValueError(f"layer {w.layer} declares more than one wall")
            per_layer[w.layer] = w
        g = self.grid
        self._walls_mask = np.zeros((g.n_layers, g.ny, g.nx), dtype=bool)
        for w in self.walls:
            for x, y in w.cells(g):
                self._walls_mask[w.layer, y, x] = True
        self._region_masks = {HOT: np.ones_like(self._walls_mask),
                              WARM: np.ones_like(self._walls_mask)}
        for layer, w in per_layer.items():
            c = w.column(g)
            hot_side = self.hot_sides.get(layer, w.side)
            hot_1d = np.zeros(g.nx if w.axis == "y" else g.ny, dtype=bool)
            if hot_side == "left":
                hot_1d[:c] = True
            else:
                hot_1d[c + w.thickness_cells:] = True
            if w.axis == "y":
                self._region_masks[HOT][layer] = hot_1d[None, :]
            else:
                self._region_masks[HOT][layer] = hot_1d[:, None]
            self._region_masks[WARM][layer] = \
                ~self._region_masks[HOT][layer] & ~self._walls_mask[layer]
            self._region_masks[HOT][layer] &= ~self._walls_mask[layer]
        self._mask_cache = {}

    def region_of(self, fu: FunctionalUnit) -> str:
        if fu.id in self.overrides:
            return self.overrides[fu.id]
        if fu.kind == "heat_source" and \
                fu.power_density(self.grid.cell_xy_um) >= self.threshold:
            return HOT
        return WARM

    def region_mask(self, label: str) -> np.ndarray:
        return self._region_masks[label]

    def mask_for(self, fu: FunctionalUnit) -> np.ndarray:
        """Allowed cells for this block: its region minus wall cells."""
        label = self.region_of(fu)
        if label not in self._mask_cache:
            self._mask_cache[label] = self._region_masks[label] & ~self._walls_mask
        return self._mask_cache[label]

    def walls_mask(self) -> np.ndarray:
        return self._walls_mask


def carve_walls(fp: Floorplan, walls: list[AirWall],
                fus: dict[str, FunctionalUnit] | None = None) -> Floorplan:
    """Attach walls to a floorplan, refusing to cut through placed blocks."""
    grid = build_grid(fp.stack)
    occ = occupancy_grid(fp, fus or {})
    for w in walls:
        for x, y in w.cells(grid):
            if occ.occ[w.layer, y, x]:
                raise CollisionError(
                    f"wall on layer {w.layer} crosses an occupied cell ({x}, {y})")
    return dataclasses.replace(fp, air_walls=fp.air_walls + list(walls))


def region_audit(fp: Floorplan, fus: dict[str, FunctionalUnit],
                 spec: RegionSpec) -> bool:
    """True iff every placed block sits entirely inside its assigned region."""
    from .geometry import footprint
    for pl in fp.placements:
        f = fus[pl.fu_id]
        mask = spec.mask_for(f)
        x0, y0, w, h = footprint(f, pl)
        if x0 < 0 or y0 < 0 or x0 + w > spec.grid.nx or y0 + h > spec.grid.ny:
            return False
        if not mask[pl.z, y0:y0 + h, x0:x0 + w].all():
            return False
    return True
