"""Finite-difference RC thermal model: network assembly, transient stepping,
steady-state solve and field metrics.

Each grid cell contributes one node per vertical sub-slab (Si, SiO2, epoxy).
Face conductances are series combinations of half-cell resistances. The bottom
face (PCB side) is adiabatic; the top and lateral faces convect to ambient
through a configurable heat transfer coefficient. Liquid channels add directed
convective transport along +y with the inlet held at the coolant temperature.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (
    CellGrid, CollisionError, Floorplan, FunctionalUnit, Material,
    build_grid, footprint,
)


class UnknownMaterialError(KeyError):
    pass


class SingularSystemError(RuntimeError):
    """Some node has no conductive path to ambient."""


class UnstableDtError(ValueError):
    pass


@dataclass
class ThermalConfig:
    h_boundary_W_per_m2K: float = 30000.0
    coolant_mdot_cw_W_per_K: float = 0.1   # mass flow times specific heat, per channel
    coolant_inlet_K: float | None = None   # None: ambient
    channel_h_W_per_m2K: float | None = 50000.0  # film coefficient at channel walls;
    # None: stagnant-water conduction through the half cell
    si_k_temperature_dependent: bool = False
    si_k_reference_K: float = 300.0
    picard_max_iter: int = 10
    picard_tol_K: float = 1e-3


@dataclass
class RCNetwork:
    grid: CellGrid
    A: sp.csr_matrix          # conductance operator: diag holds total node conductance
    c: np.ndarray             # J/K per node
    p: np.ndarray             # W per node
    b_const: np.ndarray       # ambient/inlet source terms, W
    g_amb: np.ndarray         # boundary conductance to ambient per node, W/K
    ambient_K: float
    channels: list = field(default_factory=list)  # (ordered node idx array, mdot_cw, inlet_K)

    @property
    def n_nodes(self) -> int:
        return self.c.size

    def rhs(self) -> np.ndarray:
        return self.p + self.b_const


@dataclass
class TemperatureField:
    grid: CellGrid
    values: np.ndarray  # flat, one entry per node

    def as_array(self) -> np.ndarray:
        g = self.grid
        return self.values.reshape(len(g.slabs), g.ny, g.nx)

    def copy(self) -> "TemperatureField":
        return TemperatureField(self.grid, self.values.copy())


def node_index(grid: CellGrid, slab: int, y: int, x: int) -> int:
    return (slab * grid.ny + y) * grid.nx + x


def _half_r(k, d, area):
    with np.errstate(divide="ignore"):
        return np.where(k > 0, d / (2.0 * k * area), np.inf)


def _combine_r(r1, r2):
    """Conductance of two half-cell resistances in series. Infinite resistance
    (zero conductivity) blocks the face."""
    r = r1 + r2
    return np.where(np.isfinite(r), 1.0 / np.where(r > 0, r, np.inf), 0.0)


def _boundary_g(k, d_half, area, h):
    with np.errstate(divide="ignore"):
        r = np.where(k > 0, d_half / (2.0 * k * area), np.inf) + 1.0 / (h * area)
    return np.where(np.isfinite(r), 1.0 / r, 0.0)


def node_materials(fp: Floorplan, fus: dict[str, FunctionalUnit],
                   grid: CellGrid) -> np.ndarray:
    """Material name per node, shape (n_slabs, ny, nx).

    TSV columns span every sub-slab of the layers they cross; air walls fill
    every sub-slab of their own layer; liquid channels replace the SiO2 cells
    of their layer along the full y extent.
    """
    kind_to_mat = {"si": "silicon", "sio2": "sio2", "epoxy": "epoxy"}
    names = np.empty((len(grid.slabs), grid.ny, grid.nx), dtype=object)
    for si, slab in enumerate(grid.slabs):
        names[si] = kind_to_mat[slab.kind]
    for tsv in fp.tsvs:
        for si, slab in enumerate(grid.slabs):
            if slab.layer >= tsv.to_layer:
                names[si, tsv.y, tsv.x] = "tsv"
    for wall in fp.air_walls:
        for si in grid.layer_slab_indices(wall.layer):
            for x, y in wall.cells(grid):
                names[si, y, x] = "isolating_air"
    for ch in fp.liquid_channels:
        si = grid.sio2_slab_index(ch.layer)
        if (names[si, :, ch.x] == "tsv").any():
            raise CollisionError(f"liquid channel at x={ch.x}, layer {ch.layer} crosses a TSV")
        names[si, :, ch.x] = "water"
    return names


def assemble(fp: Floorplan, fus: dict[str, FunctionalUnit],
             materials: dict[str, Material], config: ThermalConfig,
             T_ref: TemperatureField | None = None) -> RCNetwork:
    """Build the RC network for a floorplan.

    When config.si_k_temperature_dependent is set and a reference field is
    given, silicon conductivity is evaluated node-wise at the reference
    temperatures (frozen for this assembly, Picard style).
    """
    grid = build_grid(fp.stack)
    ns, ny, nx = len(grid.slabs), grid.ny, grid.nx
    names = node_materials(fp, fus, grid)

    k = np.empty((ns, ny, nx))
    c_vol = np.empty((ns, ny, nx))
    for name in np.unique(names):
        if name not in materials:
            raise UnknownMaterialError(name)
        mat = materials[name]
        mask = names == name
        k[mask] = mat.k_W_per_mK
        c_vol[mask] = mat.c_vol_J_per_m3K
    if config.si_k_temperature_dependent and T_ref is not None:
        si_mat = materials["silicon"]
        mask = names == "silicon"
        Tr = T_ref.as_array()
        k[mask] = si_mat.k_W_per_mK + si_mat.k_quad_W_per_mK2 * (
            Tr[mask] - config.si_k_reference_K)
        k[mask] = np.maximum(k[mask], 1e-6)

    dxy = grid.cell_xy_um * 1e-6
    heights = np.array([s.height_um for s in grid.slabs]) * 1e-6
    hgrid = heights[:, None, None] * np.ones((ns, ny, nx))
    area_z = dxy * dxy

    n = ns * ny * nx
    idx = np.arange(n).reshape(ns, ny, nx)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)

    def add_links(u, v, g):
        u, v, g = u.ravel(), v.ravel(), g.ravel()
        rows.extend((u, v))
        cols.extend((v, u))
        vals.extend((-g, -g))
        np.add.at(diag, u, g)
        np.add.at(diag, v, g)

    # a forced-convection film replaces the half-cell resistance on the
    # liquid side of every channel-cell face; the coolant is mixed, so it
    # presents no conductive depth of its own
    water = names == "water"
    h_ch = config.channel_h_W_per_m2K

    def face_g(k1, d1, m1, k2, d2, m2, area):
        r1, r2 = _half_r(k1, d1, area), _half_r(k2, d2, area)
        if h_ch:
            r1 = np.where(m1, 1.0 / (h_ch * area), r1)
            r2 = np.where(m2, 1.0 / (h_ch * area), r2)
        return _combine_r(r1, r2)

    # lateral faces, x and y neighbours within each slab
    area_x = hgrid * dxy
    gx = face_g(k[:, :, :-1], dxy, water[:, :, :-1],
                k[:, :, 1:], dxy, water[:, :, 1:], area_x[:, :, :-1])
    add_links(idx[:, :, :-1], idx[:, :, 1:], gx)
    gy = face_g(k[:, :-1, :], dxy, water[:, :-1, :],
                k[:, 1:, :], dxy, water[:, 1:, :], area_x[:, :-1, :])
    add_links(idx[:, :-1, :], idx[:, 1:, :], gy)
    # vertical faces between consecutive slabs
    gz = face_g(k[:-1], hgrid[:-1], water[:-1], k[1:], hgrid[1:], water[1:], area_z)
    add_links(idx[:-1], idx[1:], gz)

    # boundary conductances: top face plus the four lateral chip faces
    h = config.h_boundary_W_per_m2K
    g_amb = np.zeros((ns, ny, nx))
    g_amb[-1] += _boundary_g(k[-1], hgrid[-1], area_z, h)
    for face in (np.s_[:, :, 0], np.s_[:, :, -1], np.s_[:, 0, :], np.s_[:, -1, :]):
        g_amb[face] += _boundary_g(k[face], dxy, area_x[face], h)
    g_amb = g_amb.ravel()
    diag += g_amb

    c = (c_vol * hgrid * dxy * dxy).ravel()

    p = np.zeros(n)
    for pl in fp.placements:
        fu = fus[pl.fu_id]
        x0, y0, w, hh = footprint(fu, pl)
        si = grid.si_slab_index(pl.z)
        p.reshape(ns, ny, nx)[si, y0:y0 + hh, x0:x0 + w] += fu.power_W / fu.area_cells

    ambient = fp.stack.ambient_K
    b_const = g_amb * ambient
    channels = []
    mdot = config.coolant_mdot_cw_W_per_K
    inlet = config.coolant_inlet_K if config.coolant_inlet_K is not None else ambient
    for ch in fp.liquid_channels:
        si = grid.sio2_slab_index(ch.layer)
        nodes = idx[si, :, ch.x]
        diag[nodes] += mdot
        rows.append(nodes[1:])
        cols.append(nodes[:-1])
        vals.append(np.full(ny - 1, -mdot))
        b_const[nodes[0]] += mdot * inlet
        channels.append((nodes.copy(), mdot, inlet))

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    return RCNetwork(grid, A, c, p, b_const, g_amb, ambient, channels)


def stability_bound(net: RCNetwork) -> float:
    """Largest safe explicit-Euler step: half the smallest node time constant."""
    diag = net.A.diagonal()
    with np.errstate(divide="ignore"):
        tau = np.where(diag > 0, net.c / diag, np.inf)
    return 0.5 * float(tau.min())


def step_forward_euler(net: RCNetwork, T: TemperatureField, dt: float) -> TemperatureField:
    bound = stability_bound(net)
    if dt > bound * (1 + 1e-12):
        raise UnstableDtError(f"dt={dt} exceeds stability bound {bound}")
    values = T.values + dt * (net.rhs() - net.A @ T.values) / net.c
    return TemperatureField(net.grid, values)


def ambient_field(net: RCNetwork) -> TemperatureField:
    return TemperatureField(net.grid, np.full(net.n_nodes, net.ambient_K))


def solve_steady(net: RCNetwork) -> TemperatureField:
    b = net.rhs()
    A = net.A
    dead = A.diagonal() == 0
    if dead.any():
        # fully disconnected, unpowered cells (e.g. zero-conductivity walls)
        # sit at ambient; powered ones make the system genuinely singular
        if np.any(net.p[dead] != 0):
            raise SingularSystemError("powered node with no conductive path")
        A = A + sp.diags(dead.astype(float))
        b = b + dead * net.ambient_K
    T = spla.spsolve(A.tocsc(), b)
    tol = 1e-8 * max(np.abs(b).max(), 1.0)
    if not np.all(np.isfinite(T)) or np.abs(A @ T - b).max() > tol:
        raise SingularSystemError("steady solve failed; check for isolated nodes")
    return TemperatureField(net.grid, T)


def energy_balance(net: RCNetwork, T: TemperatureField) -> tuple[float, float]:
    """(heat leaving through boundaries plus coolant, total injected power)."""
    out = float(np.sum(net.g_amb * (T.values - net.ambient_K)))
    for nodes, mdot, inlet in net.channels:
        out += mdot * (T.values[nodes[-1]] - inlet)
    return out, float(net.p.sum())


def report_metrics(T: TemperatureField) -> dict[str, float]:
    """max/mean over all nodes; gradient = per-layer (max - min) on the Si
    slabs, averaged over layers."""
    arr = T.as_array()
    spans = []
    for layer in range(T.grid.n_layers):
        si = T.grid.si_slab_index(layer)
        spans.append(arr[si].max() - arr[si].min())
    return {
        "max_K": float(arr.max()),
        "mean_K": float(arr.mean()),
        "gradient_K": float(np.mean(spans)),
    }


def simulate(fp: Floorplan, fus: dict[str, FunctionalUnit],
             materials: dict[str, Material],
             config: ThermalConfig) -> tuple[RCNetwork, TemperatureField]:
    """Assemble and solve to steady state. With temperature-dependent silicon
    conductivity the assembly is iterated (Picard) until the field settles."""
    net = assemble(fp, fus, materials, config)
    T = solve_steady(net)
    if config.si_k_temperature_dependent:
        for _ in range(config.picard_max_iter):
            net = assemble(fp, fus, materials, config, T_ref=T)
            T_new = solve_steady(net)
            delta = np.abs(T_new.values - T.values).max()
            T = T_new
            if delta < config.picard_tol_K:
                break
    return net, T
