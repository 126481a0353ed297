"""Problem and result serialization.

One JSON document describes a problem (stack, materials, functional_units,
netlist, constraints); results reuse the same document with placements, vias,
channels and walls appended, so any output file can be re-read as an input.
CSV exports cover temperature fields (one row per node) and Pareto fronts
(one row per individual). Serialization is deterministic: keys are sorted
and floats round-trip through repr.
"""
from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field

from .geometry import (
    AirWall, Floorplan, FunctionalUnit, LayerSpec, LiquidChannel, Material,
    Netlist, Placement, StackSpec, Tsv, default_materials,
)
from .thermal import TemperatureField, ThermalConfig


@dataclass
class Problem:
    stack: StackSpec
    materials: dict[str, Material]
    fus: dict[str, FunctionalUnit]
    netlist: Netlist
    constraints: dict = field(default_factory=dict)
    thermal: ThermalConfig = field(default_factory=ThermalConfig)

    def air_walls(self) -> list[AirWall]:
        return [AirWall(**w) for w in self.constraints.get("air_walls", [])]


def _stack_to_dict(stack: StackSpec) -> dict:
    return {
        "width_um": stack.width_um,
        "length_um": stack.length_um,
        "cell_xy_um": stack.cell_xy_um,
        "ambient_K": stack.ambient_K,
        "layers": [dataclasses.asdict(l) for l in stack.layers],
    }


def _stack_from_dict(d: dict) -> StackSpec:
    return StackSpec(d["width_um"], d["length_um"],
                     tuple(LayerSpec(**l) for l in d["layers"]),
                     cell_xy_um=d.get("cell_xy_um", 300.0),
                     ambient_K=d.get("ambient_K", 300.0))


def problem_to_dict(p: Problem) -> dict:
    return {
        "stack": _stack_to_dict(p.stack),
        "materials": {name: {"k_W_per_mK": m.k_W_per_mK,
                             "k_quad_W_per_mK2": m.k_quad_W_per_mK2,
                             "c_vol_J_per_m3K": m.c_vol_J_per_m3K}
                      for name, m in p.materials.items()},
        "functional_units": [dataclasses.asdict(f)
                             for f in sorted(p.fus.values(), key=lambda f: f.id)],
        "netlist": [list(e) for e in p.netlist],
        "constraints": p.constraints,
        "thermal": dataclasses.asdict(p.thermal),
    }


def problem_from_dict(d: dict) -> Problem:
    materials = {name: Material(name, **vals)
                 for name, vals in d.get("materials", {}).items()}
    if not materials:
        materials = default_materials()
    fus = {f["id"]: FunctionalUnit(**f) for f in d["functional_units"]}
    thermal = ThermalConfig(**d.get("thermal", {}))
    return Problem(_stack_from_dict(d["stack"]), materials, fus,
                   Netlist(d.get("netlist", [])), dict(d.get("constraints", {})),
                   thermal)


def floorplan_to_dict(fp: Floorplan) -> dict:
    return {
        "placements": [dataclasses.asdict(p) for p in fp.placements],
        "tsvs": [dataclasses.asdict(t) for t in fp.tsvs],
        "liquid_channels": [dataclasses.asdict(c) for c in fp.liquid_channels],
        "air_walls": [dataclasses.asdict(w) for w in fp.air_walls],
    }


def floorplan_from_dict(d: dict, stack: StackSpec) -> Floorplan:
    return Floorplan(
        stack,
        placements=[Placement(**p) for p in d.get("placements", [])],
        tsvs=[Tsv(**t) for t in d.get("tsvs", [])],
        liquid_channels=[LiquidChannel(**c) for c in d.get("liquid_channels", [])],
        air_walls=[AirWall(**w) for w in d.get("air_walls", [])],
    )


def _dump(d: dict, path):
    with open(path, "w") as fh:
        json.dump(d, fh, sort_keys=True, indent=2)
        fh.write("\n")


def save_problem(p: Problem, path, floorplan: Floorplan | None = None):
    d = problem_to_dict(p)
    if floorplan is not None:
        d.update(floorplan_to_dict(floorplan))
    _dump(d, path)


def load_problem(path) -> tuple[Problem, Floorplan]:
    """Read a problem document; the returned floorplan holds whatever
    placements/vias/channels/walls the document carried (possibly none)."""
    with open(path) as fh:
        d = json.load(fh)
    p = problem_from_dict(d)
    return p, floorplan_from_dict(d, p.stack)


def save_field_csv(field: TemperatureField, path):
    arr = field.as_array()
    grid = field.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "layer", "slab", "temperature_K"])
        for s, slab in enumerate(grid.slabs):
            for y in range(grid.ny):
                for x in range(grid.nx):
                    w.writerow([x, y, slab.layer, slab.kind, repr(float(arr[s, y, x]))])


def load_field_csv(path, grid) -> TemperatureField:
    import numpy as np
    arr = np.empty((len(grid.slabs), grid.ny, grid.nx))
    slab_of = {}
    for s, slab in enumerate(grid.slabs):
        slab_of[(slab.layer, slab.kind)] = s
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            s = slab_of[(int(row["layer"]), row["slab"])]
            arr[s, int(row["y"]), int(row["x"])] = float(row["temperature_K"])
    return TemperatureField(grid, arr.ravel())


def save_front_csv(front, path, columns):
    """One row per individual, objective values only, sorted for determinism."""
    rows = sorted(ind.objectives for ind in front)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def save_metrics_csv(metrics: dict, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = sorted(metrics)
        w.writerow(keys)
        w.writerow([repr(float(metrics[k])) if isinstance(metrics[k], float)
                    else metrics[k] for k in keys])
