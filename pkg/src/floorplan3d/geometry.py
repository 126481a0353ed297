"""Chip stack geometry: grid, materials, functional units, floorplans and occupancy queries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridDimensionError(ValueError):
    """Stack width/length is not an exact multiple of the cell size."""


class OutOfBoundsError(IndexError):
    pass


class UnplacedEndpointError(KeyError):
    """A netlist endpoint has no placement."""


class CollisionError(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    name: str
    k_W_per_mK: float
    c_vol_J_per_m3K: float
    k_quad_W_per_mK2: float = 0.0

    def __post_init__(self):
        if self.k_W_per_mK < 0:
            raise ValueError(f"negative conductivity for {self.name}")
        if self.c_vol_J_per_m3K <= 0:
            raise ValueError(f"non-positive specific heat for {self.name}")

    def conductivity(self, T_K: float, reference_K: float = 300.0) -> float:
        """Temperature-dependent conductivity, linearised around the reference point."""
        return self.k_W_per_mK + self.k_quad_W_per_mK2 * (T_K - reference_K)


def default_materials() -> dict[str, Material]:
    """Silicon stack material set (bulk values; silicon carries a quadratic correction)."""
    return {
        "silicon": Material("silicon", 295.0, 1.628e6, k_quad_W_per_mK2=-0.491),
        "sio2": Material("sio2", 1.38, 4.180e6),
        "epoxy": Material("epoxy", 0.03, 1.73e6),
        "tsv": Material("tsv", 372.0, 3.45e6),
        "isolating_air": Material("isolating_air", 2.4e-3, 1.0e4),
        "water": Material("water", 0.58, 4.184e6),
    }


@dataclass(frozen=True)
class LayerSpec:
    si_height_um: float = 150.0
    sio2_height_um: float = 50.0
    epoxy_height_um: float = 25.0


@dataclass(frozen=True)
class StackSpec:
    width_um: float
    length_um: float
    layers: tuple[LayerSpec, ...]
    cell_xy_um: float = 300.0
    ambient_K: float = 300.0

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("at least one layer required")
        for i, layer in enumerate(self.layers):
            if layer.si_height_um <= 0 or layer.sio2_height_um <= 0:
                raise ValueError("si/sio2 heights must be positive")
            if layer.epoxy_height_um < 0:
                raise ValueError("negative epoxy height")
            if layer.epoxy_height_um == 0 and i != len(self.layers) - 1:
                raise ValueError("zero epoxy height only allowed on the topmost layer")


@dataclass(frozen=True)
class FunctionalUnit:
    id: str
    label: str
    length_cells: int  # x extent when not rotated
    width_cells: int   # y extent when not rotated
    power_W: float
    kind: str = "heat_source"  # or "heat_sink"

    def __post_init__(self):
        if self.length_cells < 1 or self.width_cells < 1:
            raise ValueError(f"{self.id}: dimensions must be >= 1 cell")
        if self.power_W < 0:
            raise ValueError(f"{self.id}: negative power")
        if self.kind not in ("heat_source", "heat_sink"):
            raise ValueError(f"{self.id}: unknown kind {self.kind!r}")

    @property
    def area_cells(self) -> int:
        return self.length_cells * self.width_cells

    def power_density(self, cell_xy_um: float) -> float:
        """Power per unit footprint area, W/m^2."""
        area_m2 = self.area_cells * (cell_xy_um * 1e-6) ** 2
        return self.power_W / area_m2


class Netlist:
    """Unordered FU id pairs. Self-edges are rejected; pairs are stored normalised."""

    def __init__(self, pairs=()):
        self.edges: set[tuple[str, str]] = set()
        for a, b in pairs:
            self.add(a, b)

    def add(self, a: str, b: str):
        if a == b:
            raise ValueError(f"self-edge on {a}")
        self.edges.add((a, b) if a < b else (b, a))

    def validate(self, fu_ids):
        ids = set(fu_ids)
        for a, b in self.edges:
            if a not in ids or b not in ids:
                raise KeyError(f"netlist references unknown FU in ({a}, {b})")

    def __iter__(self):
        return iter(sorted(self.edges))

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class Placement:
    fu_id: str
    x: int
    y: int
    z: int
    rotated: bool = False


@dataclass(frozen=True)
class Tsv:
    x: int
    y: int
    to_layer: int  # drilled from the top layer down to this layer, inclusive


@dataclass(frozen=True)
class LiquidChannel:
    """Full-length coolant channel in the SiO2 slab of `layer`, flowing along +y at column x."""
    x: int
    layer: int


@dataclass(frozen=True)
class AirWall:
    """Low-pressure-air trench spanning the full perpendicular extent of one layer.

    axis 'y' walls run along y at a fixed column; axis 'x' walls run along x at a
    fixed row. position_um is measured from the left (x=0 / y=0) or right
    (x=nx / y=ny) side.
    """
    layer: int
    position_um: float
    axis: str = "y"
    side: str = "left"
    thickness_cells: int = 1

    def column(self, grid: "CellGrid") -> int:
        """First cell index of the wall along its fixed axis."""
        if self.position_um % grid.cell_xy_um != 0:
            raise GridDimensionError(
                f"wall offset {self.position_um} not a multiple of cell size")
        off = int(round(self.position_um / grid.cell_xy_um))
        extent = grid.nx if self.axis == "y" else grid.ny
        if self.side == "left":
            return off
        return extent - off - self.thickness_cells

    def cells(self, grid: "CellGrid"):
        """Yield (x, y) of every wall cell."""
        c = self.column(grid)
        for t in range(self.thickness_cells):
            if self.axis == "y":
                for y in range(grid.ny):
                    yield c + t, y
            else:
                for x in range(grid.nx):
                    yield x, c + t


@dataclass
class Floorplan:
    stack: StackSpec
    placements: list[Placement] = field(default_factory=list)
    tsvs: list[Tsv] = field(default_factory=list)
    liquid_channels: list[LiquidChannel] = field(default_factory=list)
    air_walls: list[AirWall] = field(default_factory=list)

    def placement_of(self, fu_id: str) -> Placement:
        for p in self.placements:
            if p.fu_id == fu_id:
                return p
        raise UnplacedEndpointError(fu_id)


@dataclass(frozen=True)
class Slab:
    layer: int
    kind: str  # si | sio2 | epoxy
    height_um: float


@dataclass(frozen=True)
class CellGrid:
    nx: int
    ny: int
    n_layers: int
    cell_xy_um: float
    slabs: tuple[Slab, ...]  # bottom to top

    def si_slab_index(self, layer: int) -> int:
        for i, s in enumerate(self.slabs):
            if s.layer == layer and s.kind == "si":
                return i
        raise KeyError(layer)

    def sio2_slab_index(self, layer: int) -> int:
        for i, s in enumerate(self.slabs):
            if s.layer == layer and s.kind == "sio2":
                return i
        raise KeyError(layer)

    def layer_slab_indices(self, layer: int) -> list[int]:
        return [i for i, s in enumerate(self.slabs) if s.layer == layer]


def build_grid(spec: StackSpec) -> CellGrid:
    """Discretise the stack into cells. Each layer contributes Si, SiO2 and (if
    present) epoxy sub-slabs, recorded bottom to top for thermal assembly."""
    for name, dim in (("width", spec.width_um), ("length", spec.length_um)):
        if dim % spec.cell_xy_um != 0:
            raise GridDimensionError(
                f"stack {name} {dim} um is not a multiple of cell size {spec.cell_xy_um} um")
    nx = int(round(spec.width_um / spec.cell_xy_um))
    ny = int(round(spec.length_um / spec.cell_xy_um))
    slabs = []
    for li, layer in enumerate(spec.layers):
        slabs.append(Slab(li, "si", layer.si_height_um))
        slabs.append(Slab(li, "sio2", layer.sio2_height_um))
        if layer.epoxy_height_um > 0:
            slabs.append(Slab(li, "epoxy", layer.epoxy_height_um))
    return CellGrid(nx, ny, len(spec.layers), spec.cell_xy_um, tuple(slabs))


def footprint(fu: FunctionalUnit, pl: Placement) -> tuple[int, int, int, int]:
    """(x0, y0, x_extent, y_extent) in cells, honouring rotation."""
    w = fu.width_cells if pl.rotated else fu.length_cells
    h = fu.length_cells if pl.rotated else fu.width_cells
    return pl.x, pl.y, w, h


def center(fu: FunctionalUnit, pl: Placement) -> tuple[float, float, int]:
    x0, y0, w, h = footprint(fu, pl)
    return x0 + w / 2.0, y0 + h / 2.0, pl.z


class OccupancyGrid:
    """Per (layer, y, x) free/occupied map, recomputable from a Floorplan."""

    def __init__(self, grid: CellGrid):
        self.grid = grid
        self.occ = np.zeros((grid.n_layers, grid.ny, grid.nx), dtype=bool)

    def copy(self) -> "OccupancyGrid":
        o = OccupancyGrid(self.grid)
        o.occ = self.occ.copy()
        return o

    def mark_rect(self, layer: int, x0: int, y0: int, w: int, h: int, value=True):
        self.occ[layer, y0:y0 + h, x0:x0 + w] = value

    def mark_column(self, x: int, y: int, from_layer: int, to_layer: int, value=True):
        lo, hi = min(from_layer, to_layer), max(from_layer, to_layer)
        self.occ[lo:hi + 1, y, x] = value

    def column_reach(self) -> np.ndarray:
        """Per (y, x): the lowest layer index such that every layer from there to
        the top is free; n_layers where even the top layer is blocked."""
        n = self.grid.n_layers
        reach = np.full((self.grid.ny, self.grid.nx), n, dtype=int)
        clear = np.ones((self.grid.ny, self.grid.nx), dtype=bool)
        for layer in range(n - 1, -1, -1):
            clear &= ~self.occ[layer]
            reach[clear] = layer
        return reach

    def state_hash(self) -> int:
        return hash(self.occ.tobytes())


def occupancy_grid(fp: Floorplan, fus: dict[str, FunctionalUnit]) -> OccupancyGrid:
    grid = build_grid(fp.stack)
    occ = OccupancyGrid(grid)
    for pl in fp.placements:
        x0, y0, w, h = footprint(fus[pl.fu_id], pl)
        occ.mark_rect(pl.z, x0, y0, w, h)
    for tsv in fp.tsvs:
        occ.mark_column(tsv.x, tsv.y, tsv.to_layer, grid.n_layers - 1)
    for wall in fp.air_walls:
        for x, y in wall.cells(grid):
            occ.occ[wall.layer, y, x] = True
    return occ


def entity_grid(fp: Floorplan, fus: dict[str, FunctionalUnit]) -> np.ndarray:
    """Integer id per cell (-1 = free). FUs, TSVs and air walls each get a
    distinct id so overlap counting is per entity, not per cell."""
    grid = build_grid(fp.stack)
    ids = np.full((grid.n_layers, grid.ny, grid.nx), -1, dtype=int)
    eid = 0
    for pl in fp.placements:
        x0, y0, w, h = footprint(fus[pl.fu_id], pl)
        ids[pl.z, y0:y0 + h, x0:x0 + w] = eid
        eid += 1
    for tsv in fp.tsvs:
        ids[tsv.to_layer:, tsv.y, tsv.x] = eid
        eid += 1
    for wall in fp.air_walls:
        for x, y in wall.cells(grid):
            ids[wall.layer, y, x] = eid
        eid += 1
    return ids


def check_topology(pl: Placement, fp: Floorplan, fus: dict[str, FunctionalUnit]) -> int:
    """Violation count for placing `pl` into `fp`: one per already-present
    entity overlapped, plus one if the footprint leaves the grid. 0 = placeable."""
    grid = build_grid(fp.stack)
    x0, y0, w, h = footprint(fus[pl.fu_id], pl)
    violations = 0
    if x0 < 0 or y0 < 0 or pl.z < 0 or pl.z >= grid.n_layers \
            or x0 + w > grid.nx or y0 + h > grid.ny:
        violations += 1
    ids = entity_grid(fp, fus)
    xs = slice(max(x0, 0), min(x0 + w, grid.nx))
    ys = slice(max(y0, 0), min(y0 + h, grid.ny))
    if 0 <= pl.z < grid.n_layers:
        overlapped = np.unique(ids[pl.z, ys, xs])
        violations += int(np.sum(overlapped >= 0))
    return violations


def manhattan_wirelength(fp: Floorplan, net: Netlist,
                         fus: dict[str, FunctionalUnit],
                         layer_pitch_cells: float = 1.0) -> float:
    """Sum of Manhattan distances between block centers over all connected pairs.
    Vertical distance is the layer-index difference scaled by layer_pitch_cells."""
    centers = {}
    total = 0.0
    for a, b in net:
        for fid in (a, b):
            if fid not in centers:
                centers[fid] = center(fus[fid], fp.placement_of(fid))
        (xa, ya, za), (xb, yb, zb) = centers[a], centers[b]
        total += abs(xa - xb) + abs(ya - yb) + abs(za - zb) * layer_pitch_cells
    return total


def tsv_path_exists(occ: OccupancyGrid, x: int, y: int, to_layer: int) -> bool:
    """True iff the (x, y) column is free on every layer from the top down to
    to_layer inclusive."""
    g = occ.grid
    if not (0 <= x < g.nx and 0 <= y < g.ny and 0 <= to_layer < g.n_layers):
        raise OutOfBoundsError((x, y, to_layer))
    return not occ.occ[to_layer:, y, x].any()
