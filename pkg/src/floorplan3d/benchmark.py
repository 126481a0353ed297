"""Synthetic 48-core stack used by the test harness and the CLI.

Four layers: two 8-core layers at the bottom, two 16-core layers on top,
with per-layer L2 memories, an L2 buffer and a crossbar. Published data for
this class of chip gives only the per-layer power totals (84 W for the
8-core layers, 139 W for the 16-core ones), so the per-block split is a
documented rule: cores take a fixed share of the layer budget evenly, the
crossbar takes a share scaled by how many cores it serves, memories share
the remainder. All of it is parameterized through BenchmarkSpec.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import (
    Floorplan, FunctionalUnit, LayerSpec, Netlist, Placement, StackSpec,
    build_grid, default_materials,
)
from .io import Problem
from .thermal import ThermalConfig


class InfeasibleAreaError(ValueError):
    pass


@dataclass
class BenchmarkSpec:
    width_um: float = 12000.0
    length_um: float = 10500.0
    cell_xy_um: float = 300.0
    ambient_K: float = 300.0
    cores_per_layer: tuple[int, ...] = (8, 8, 16, 16)
    layer_power_W: tuple[float, ...] = (84.0, 84.0, 139.0, 139.0)
    core_cells: tuple[int, int] = (5, 5)
    l2_cells: tuple[int, int] = (6, 4)
    l2b_cells: tuple[int, int] = (6, 6)
    xbar_cells: tuple[int, int] = (10, 3)
    l2_per_8_cores: int = 2          # memories scale with the core count
    core_power_share: float = 0.70
    xbar_power_share: float = 0.15   # at the largest core count, scaled down below it
    # reference isolation walls: one per layer at 5400 um, alternating sides
    wall_offset_um: float = 5400.0
    min_tsvs: int = 11
    max_channels: int = 32
    thermal: ThermalConfig = field(default_factory=ThermalConfig)

    @property
    def n_layers(self) -> int:
        return len(self.cores_per_layer)


def _layer_blocks(spec: BenchmarkSpec, layer: int):
    """FunctionalUnits of one layer, in generation order."""
    n_cores = spec.cores_per_layer[layer]
    n_l2 = spec.l2_per_8_cores * n_cores // 8
    budget = spec.layer_power_W[layer]
    xbar_W = spec.xbar_power_share * budget * n_cores / max(spec.cores_per_layer)
    core_W = spec.core_power_share * budget / n_cores
    mem_W = (budget - spec.core_power_share * budget - xbar_W) / (n_l2 + 1)
    blocks = []
    for i in range(n_cores):
        blocks.append(FunctionalUnit(f"core{layer}_{i}", "core",
                                     *spec.core_cells, core_W, "heat_source"))
    for i in range(n_l2):
        blocks.append(FunctionalUnit(f"l2_{layer}_{i}", "l2",
                                     *spec.l2_cells, mem_W, "heat_sink"))
    blocks.append(FunctionalUnit(f"l2b{layer}", "l2_buffer",
                                 *spec.l2b_cells, mem_W, "heat_sink"))
    blocks.append(FunctionalUnit(f"xbar{layer}", "crossbar",
                                 *spec.xbar_cells, xbar_W, "heat_source"))
    return blocks


def generate_benchmark(spec: BenchmarkSpec | None = None) -> Problem:
    spec = spec or BenchmarkSpec()
    stack = StackSpec(
        spec.width_um, spec.length_um,
        tuple(LayerSpec() for _ in range(spec.n_layers)),
        cell_xy_um=spec.cell_xy_um, ambient_K=spec.ambient_K)
    nx = int(spec.width_um / spec.cell_xy_um)
    ny = int(spec.length_um / spec.cell_xy_um)
    fus: dict[str, FunctionalUnit] = {}
    net = Netlist()
    for layer in range(spec.n_layers):
        blocks = _layer_blocks(spec, layer)
        area = sum(b.area_cells for b in blocks)
        if area > nx * ny:
            raise InfeasibleAreaError(
                f"layer {layer} blocks need {area} cells, grid has {nx * ny}")
        for b in blocks:
            fus[b.id] = b
        cores = [b for b in blocks if b.label == "core"]
        l2s = [b for b in blocks if b.label == "l2"]
        xbar = next(b for b in blocks if b.label == "crossbar")
        l2b = next(b for b in blocks if b.label == "l2_buffer")
        for i, c in enumerate(cores):
            net.add(c.id, xbar.id)
            net.add(c.id, l2s[i % len(l2s)].id)
        for m in l2s:
            net.add(m.id, xbar.id)
        net.add(l2b.id, xbar.id)
        if layer > 0:
            net.add(f"xbar{layer - 1}", f"xbar{layer}")
    walls = [{"layer": l, "position_um": spec.wall_offset_um, "axis": "y",
              "side": "left" if l % 2 == 0 else "right", "thickness_cells": 1}
             for l in range(spec.n_layers)]
    home = {b.id: layer for layer in range(spec.n_layers)
            for b in _layer_blocks(spec, layer)}
    constraints = {"min_tsvs": spec.min_tsvs, "max_channels": spec.max_channels,
                   "air_walls": walls, "home_layers": home}
    return Problem(stack, default_materials(), fus, net, constraints, spec.thermal)


def baseline_floorplan(problem: Problem) -> Floorplan:
    """Deterministic shelf packing: each block on its home layer, rows filled
    left to right bottom to top in declaration order. The naive stacked
    design every optimizer run is measured against."""
    grid = build_grid(problem.stack)
    home = problem.constraints.get("home_layers", {})
    placements = []
    for layer in range(grid.n_layers):
        blocks = [f for f in problem.fus.values() if home.get(f.id, 0) == layer]
        x = y = row_h = 0
        for f in blocks:
            w, h = f.length_cells, f.width_cells
            if x + w > grid.nx:
                x = 0
                y += row_h
                row_h = 0
            if y + h > grid.ny:
                raise InfeasibleAreaError(f"layer {layer} overflows during packing")
            placements.append(Placement(f.id, x, y, layer))
            x += w
            row_h = max(row_h, h)
    return Floorplan(problem.stack, placements=placements)
