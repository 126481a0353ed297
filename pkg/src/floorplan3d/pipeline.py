"""Staged design flow: place blocks, drill vias, budget coolant channels,
carve isolation walls, simulate, report.

Each stage reads the floorplan selected by the previous one, runs its
optimizer, applies an offline selection rule to the resulting front, and
writes the front, the selected solution and the updated floorplan into the
run directory. Every randomized stage gets its own sub-seed derived from the
master seed and the stage name, so stages can be re-run in isolation and
still match the end-to-end run byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import io as fio
from .air_domains import RegionSpec, carve_walls
from .benchmark import baseline_floorplan
from .fu_placer import FuPlacementProblem
from .geometry import Floorplan, build_grid
from .lc_placer import LcPlacementProblem
from .lc_placer import select_solution as lc_select
from .nsga2 import EvolutionConfig, evolve
from .thermal import report_metrics, simulate
from .tsv_placer import TsvPlacementProblem
from .tsv_placer import select_solution as tsv_select

PLACEMENT_STAGES = ("place-fu", "place-fu-star", "carve-ac")
ALL_STAGES = PLACEMENT_STAGES + ("place-tsv", "place-lc", "simulate", "report")


class StageDependencyError(ValueError):
    pass


class SelectionError(LookupError):
    pass


class MissingArtifactError(FileNotFoundError):
    pass


@dataclass
class PipelineConfig:
    problem_path: str
    out_dir: str
    stages: list[str] = field(default_factory=lambda: ["place-fu-star", "simulate"])
    rng_seed: int = 0
    select_rule: str = "min-temperature"   # or "min-wirelength" or "index:N"
    min_tsvs: int | None = None            # None: take from problem constraints
    max_channels: int | None = None
    evolution_overrides: dict = field(default_factory=dict)  # stage -> kwargs
    snapshot_fronts: bool = False

    def __post_init__(self):
        unknown = [s for s in self.stages if s not in ALL_STAGES]
        if unknown:
            raise StageDependencyError(f"unknown stages {unknown}")
        seen_floorplan = False
        for s in self.stages:
            if s in PLACEMENT_STAGES:
                seen_floorplan = True
            elif s in ("place-tsv", "place-lc", "simulate", "report"):
                # these can also run on a floorplan carried by the problem
                # file; that is checked at run time, not here
                pass


def stage_seed(master: int, stage: str) -> int:
    digest = hashlib.sha256(f"{master}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _evolution_config(stage: str, n_genes: int, cfg: PipelineConfig) -> EvolutionConfig:
    if stage in PLACEMENT_STAGES:
        base = dict(population_size=100, generations=n_genes,
                    crossover_prob=0.90, mutation_prob=1.0 / n_genes)
    else:
        base = dict(population_size=100, generations=250,
                    crossover_prob=0.90, mutation_prob=1.0 / max(n_genes, 1))
    base.update(cfg.evolution_overrides.get(stage, {}))
    base["rng_seed"] = stage_seed(cfg.rng_seed, stage)
    return EvolutionConfig(**base)


def _snapshot_hook(stage_dir, columns, enabled):
    if not enabled:
        return None

    def hook(gen, pop):
        front = [ind for ind in pop if ind.rank == 0]
        fio.save_front_csv(front, os.path.join(stage_dir, f"front_gen{gen:04d}.csv"),
                           columns)
    return hook


class PipelineRun:
    """One execution of a stage list against a problem file."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.problem, self.floorplan = fio.load_problem(cfg.problem_path)
        self.grid = build_grid(self.problem.stack)
        self.metrics: dict[str, float] = {}
        self.field = None
        os.makedirs(cfg.out_dir, exist_ok=True)

    # selection --------------------------------------------------------------
    def _select_placement(self, front, problem):
        feasible = [ind for ind in front if ind.objectives[0] == 0]
        if not feasible:
            raise SelectionError("no violation-free solution on the front")
        rule = self.cfg.select_rule
        if rule.startswith("index:"):
            return feasible[int(rule.split(":", 1)[1])]
        if rule == "min-wirelength":
            return min(feasible, key=lambda i: i.objectives[1])
        if rule == "min-temperature":
            best, best_t = None, None
            for ind in feasible:
                fp, _ = problem.decode(ind.genome)
                fp = replace(fp, air_walls=self.floorplan.air_walls)
                _, T = simulate(fp, self.problem.fus, self.problem.materials,
                                self.problem.thermal)
                t = report_metrics(T)["max_K"]
                if best_t is None or t < best_t:
                    best, best_t = ind, t
            return best
        raise SelectionError(f"unknown selection rule {rule!r}")

    # stages -----------------------------------------------------------------
    def _require_floorplan(self, stage):
        if not self.floorplan.placements:
            raise StageDependencyError(
                f"stage {stage} needs a placed floorplan from an earlier stage "
                "or the problem file")

    def _revalidate(self):
        from .geometry import check_topology
        probe = Floorplan(self.problem.stack, air_walls=self.floorplan.air_walls,
                          tsvs=self.floorplan.tsvs,
                          liquid_channels=self.floorplan.liquid_channels)
        for pl in self.floorplan.placements:
            v = check_topology(pl, probe, self.problem.fus)
            if v:
                raise StageDependencyError(
                    f"floorplan fails the feasibility audit at {pl.fu_id}")
            probe.placements.append(pl)

    def _run_placement(self, stage):
        star = stage in ("place-fu-star", "carve-ac")
        fus = sorted(self.problem.fus.values(), key=lambda f: f.id)
        region_spec = None
        walls = []
        if stage == "carve-ac":
            walls = [w for w in self.problem.air_walls()]
            region_spec = RegionSpec(
                self.problem.stack, fus, walls,
                overrides=self.problem.constraints.get("region_overrides"))
        problem = FuPlacementProblem(self.problem.stack, fus, self.problem.netlist,
                                     star=star, region_spec=region_spec)
        ecfg = _evolution_config(stage, len(fus), self.cfg)
        stage_dir = os.path.join(self.cfg.out_dir, stage)
        os.makedirs(stage_dir, exist_ok=True)
        cols = ["violations", "wirelength", "hotspot"]
        front = evolve(problem, ecfg,
                       on_generation=_snapshot_hook(stage_dir, cols,
                                                    self.cfg.snapshot_fronts))
        fio.save_front_csv(front, os.path.join(stage_dir, "front.csv"), cols)
        self.floorplan = replace(self.floorplan, air_walls=walls) if walls \
            else self.floorplan
        chosen = self._select_placement(front, problem)
        fp, _ = problem.decode(chosen.genome)
        self.floorplan = replace(fp, air_walls=walls)
        if walls:
            # audit the wall carve against the chosen placement
            self.floorplan = carve_walls(replace(fp, air_walls=[]), walls,
                                         self.problem.fus)
        fio.save_problem(self.problem, os.path.join(stage_dir, "floorplan.json"),
                         self.floorplan)

    def _run_tsv(self, stage):
        self._require_floorplan(stage)
        problem = TsvPlacementProblem(self.floorplan, self.problem.fus,
                                      self.problem.netlist)
        ecfg = _evolution_config(stage, problem.n_bits, self.cfg)
        stage_dir = os.path.join(self.cfg.out_dir, stage)
        os.makedirs(stage_dir, exist_ok=True)
        cols = ["tsv_count", "wirelength"]
        front = evolve(problem, ecfg,
                       on_generation=_snapshot_hook(stage_dir, cols,
                                                    self.cfg.snapshot_fronts))
        fio.save_front_csv(front, os.path.join(stage_dir, "front.csv"), cols)
        min_tsvs = self.cfg.min_tsvs
        if min_tsvs is None:
            min_tsvs = int(self.problem.constraints.get("min_tsvs", 0))
        chosen = tsv_select(front, min_tsvs)
        self.floorplan = problem.apply_to_floorplan(chosen.genome)
        fio.save_problem(self.problem, os.path.join(stage_dir, "floorplan.json"),
                         self.floorplan)

    def _run_lc(self, stage):
        self._require_floorplan(stage)
        _, T = simulate(self.floorplan, self.problem.fus, self.problem.materials,
                        self.problem.thermal)
        cap = self.cfg.max_channels
        if cap is None:
            cap = self.problem.constraints.get("max_channels")
        problem = LcPlacementProblem(self.floorplan, T, max_channels=cap)
        ecfg = _evolution_config(stage, problem.n_bits, self.cfg)
        stage_dir = os.path.join(self.cfg.out_dir, stage)
        os.makedirs(stage_dir, exist_ok=True)
        cols = ["channel_count", "surrogate_sum_K"]
        front = evolve(problem, ecfg,
                       on_generation=_snapshot_hook(stage_dir, cols,
                                                    self.cfg.snapshot_fronts))
        fio.save_front_csv(front, os.path.join(stage_dir, "front.csv"), cols)
        chosen = lc_select(front, cap)
        self.floorplan = problem.apply_to_floorplan(chosen.genome)
        fio.save_problem(self.problem, os.path.join(stage_dir, "floorplan.json"),
                         self.floorplan)

    def _run_simulate(self):
        self._require_floorplan("simulate")
        _, T = simulate(self.floorplan, self.problem.fus, self.problem.materials,
                        self.problem.thermal)
        self.field = T
        self.metrics = report_metrics(T)
        from .geometry import manhattan_wirelength
        self.metrics["wirelength_cells"] = manhattan_wirelength(
            self.floorplan, self.problem.netlist, self.problem.fus)
        fio.save_field_csv(T, os.path.join(self.cfg.out_dir, "field.csv"))
        fio.save_metrics_csv(self.metrics, os.path.join(self.cfg.out_dir, "metrics.csv"))

    def _run_report(self):
        if self.field is None:
            field_path = os.path.join(self.cfg.out_dir, "field.csv")
            if not os.path.exists(field_path):
                raise MissingArtifactError("report requires a completed simulate stage")
            self.field = fio.load_field_csv(field_path, self.grid)
            self.metrics = report_metrics(self.field)
        arr = self.field.as_array()
        report_dir = os.path.join(self.cfg.out_dir, "report")
        os.makedirs(report_dir, exist_ok=True)
        for layer in range(self.grid.n_layers):
            s = self.grid.si_slab_index(layer)
            np.savetxt(os.path.join(report_dir, f"thermal_map_layer{layer}.csv"),
                       arr[s], delimiter=",", fmt="%.17g")
        fio.save_metrics_csv(self.metrics, os.path.join(report_dir, "metrics.csv"))

    def run(self):
        for stage in self.cfg.stages:
            if self.floorplan.placements:
                self._revalidate()
            if stage in PLACEMENT_STAGES:
                self._run_placement(stage)
            elif stage == "place-tsv":
                self._run_tsv(stage)
            elif stage == "place-lc":
                self._run_lc(stage)
            elif stage == "simulate":
                self._run_simulate()
            elif stage == "report":
                self._run_report()
        fio.save_problem(self.problem, os.path.join(self.cfg.out_dir, "final.json"),
                         self.floorplan)
        return self


def run_pipeline(cfg: PipelineConfig) -> PipelineRun:
    return PipelineRun(cfg).run()
