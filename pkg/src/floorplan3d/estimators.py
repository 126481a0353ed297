"""Estimator-style wrappers around the three optimizers.

Each wrapper holds its hyperparameters as constructor arguments, exposes
get_params/set_params through scikit-learn's BaseEstimator, and fit() runs
the evolutionary search, leaving the front and the selected solution in
trailing-underscore attributes. Handy for grid searches over evolution
parameters and for notebook use; the pipeline module drives the same
problems directly.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator

from .fu_placer import FuPlacementProblem
from .lc_placer import LcPlacementProblem
from .lc_placer import select_solution as lc_select
from .nsga2 import EvolutionConfig, evolve
from .thermal import simulate
from .tsv_placer import TsvPlacementProblem
from .tsv_placer import select_solution as tsv_select


class FuPlacer(BaseEstimator):
    def __init__(self, population_size=100, generations=None, crossover_prob=0.9,
                 mutation_prob=None, star=False, rng_seed=0, layer_pitch_cells=1.0):
        self.population_size = population_size
        self.generations = generations
        self.crossover_prob = crossover_prob
        self.mutation_prob = mutation_prob
        self.star = star
        self.rng_seed = rng_seed
        self.layer_pitch_cells = layer_pitch_cells

    def fit(self, problem, region_spec=None, seed_genomes=None):
        fus = sorted(problem.fus.values(), key=lambda f: f.id)
        self.problem_ = FuPlacementProblem(
            problem.stack, fus, problem.netlist, star=self.star,
            layer_pitch_cells=self.layer_pitch_cells, region_spec=region_spec,
            seed_genomes=seed_genomes)
        n = len(fus)
        cfg = EvolutionConfig(
            population_size=self.population_size,
            generations=self.generations if self.generations is not None else n,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob if self.mutation_prob is not None
            else 1.0 / n,
            rng_seed=self.rng_seed)
        self.front_ = evolve(self.problem_, cfg)
        return self

    def decode(self, individual):
        return self.problem_.decode(individual.genome)


class TsvPlacer(BaseEstimator):
    def __init__(self, population_size=100, generations=250, crossover_prob=0.9,
                 mutation_prob=None, min_tsvs=0, rng_seed=0):
        self.population_size = population_size
        self.generations = generations
        self.crossover_prob = crossover_prob
        self.mutation_prob = mutation_prob
        self.min_tsvs = min_tsvs
        self.rng_seed = rng_seed

    def fit(self, problem, floorplan):
        self.problem_ = TsvPlacementProblem(floorplan, problem.fus, problem.netlist)
        n = max(self.problem_.n_bits, 1)
        cfg = EvolutionConfig(
            population_size=self.population_size, generations=self.generations,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob if self.mutation_prob is not None
            else 1.0 / n,
            rng_seed=self.rng_seed)
        self.front_ = evolve(self.problem_, cfg)
        self.selected_ = tsv_select(self.front_, self.min_tsvs)
        self.floorplan_ = self.problem_.apply_to_floorplan(self.selected_.genome)
        return self


class LcPlacer(BaseEstimator):
    def __init__(self, population_size=100, generations=250, crossover_prob=0.9,
                 mutation_prob=None, max_channels=None, si_only=False, rng_seed=0):
        self.population_size = population_size
        self.generations = generations
        self.crossover_prob = crossover_prob
        self.mutation_prob = mutation_prob
        self.max_channels = max_channels
        self.si_only = si_only
        self.rng_seed = rng_seed

    def fit(self, problem, floorplan, field=None):
        if field is None:
            _, field = simulate(floorplan, problem.fus, problem.materials,
                                problem.thermal)
        self.problem_ = LcPlacementProblem(floorplan, field,
                                           max_channels=self.max_channels,
                                           si_only=self.si_only)
        n = max(self.problem_.n_bits, 1)
        cfg = EvolutionConfig(
            population_size=self.population_size, generations=self.generations,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob if self.mutation_prob is not None
            else 1.0 / n,
            rng_seed=self.rng_seed)
        self.front_ = evolve(self.problem_, cfg)
        self.selected_ = lc_select(self.front_, self.max_channels)
        self.floorplan_ = self.problem_.apply_to_floorplan(self.selected_.genome)
        return self
