"""Generic NSGA-II loop: non-dominated sorting, crowding distance, binary
tournament selection and elitist reduction, parameterised by a problem object.

A problem supplies four pure operations:

    initialize(rng) -> genome
    evaluate(genome) -> tuple of objective values (minimised)
    crossover(a, b, rng) -> (child_a, child_b)
    mutate(genome, rng, p) -> genome

Operators must return fresh genomes and never modify their inputs; the engine
never inspects genomes. All stochastic choices draw from a single seeded
stream in a fixed order (selection, crossover coin, crossover, mutation), so a
run is fully reproducible from its seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EvolutionConfig:
    population_size: int = 100
    generations: int = 100
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 2")
        for p in (self.crossover_prob, self.mutation_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")


@dataclass
class Individual:
    genome: object
    objectives: tuple = ()
    rank: int = -1
    crowding: float = 0.0


def dominates(a, b) -> bool:
    """a dominates b: no objective worse, at least one strictly better."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def nondominated_sort(pop: list[Individual]) -> list[list[Individual]]:
    n = len(pop)
    if n == 0:
        return []
    m = len(pop[0].objectives)
    if any(len(ind.objectives) != m for ind in pop):
        raise ValueError("mismatched objective vector lengths")
    obj = np.array([ind.objectives for ind in pop], dtype=float)
    le = np.all(obj[:, None, :] <= obj[None, :, :], axis=2)
    lt = np.any(obj[:, None, :] < obj[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    n_dominators = dom.sum(axis=0)
    fronts = []
    assigned = np.zeros(n, dtype=bool)
    rank = 0
    while not assigned.all():
        current = (n_dominators == 0) & ~assigned
        members = np.flatnonzero(current)
        for i in members:
            pop[i].rank = rank
        fronts.append([pop[i] for i in members])
        assigned[members] = True
        n_dominators = n_dominators - dom[members].sum(axis=0)
        rank += 1
    return fronts


def crowding_distance(front: list[Individual]) -> list[float]:
    """Assign and return NSGA-II crowding distances; boundary individuals per
    objective get infinity, interior ones sum normalised neighbour gaps."""
    if not front:
        raise ValueError("empty front")
    n = len(front)
    dist = np.zeros(n)
    obj = np.array([ind.objectives for ind in front], dtype=float)
    for m in range(obj.shape[1]):
        order = np.argsort(obj[:, m], kind="stable")
        vals = obj[order, m]
        dist[order[0]] = dist[order[-1]] = np.inf
        # infinite objective values (infeasible members) would poison the
        # normalisation, so the objective is skipped unless its span is finite
        if n > 2 and np.isfinite(vals[0]) and np.isfinite(vals[-1]) \
                and vals[-1] > vals[0]:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / (vals[-1] - vals[0])
    for ind, d in zip(front, dist):
        ind.crowding = float(d)
    return dist.tolist()


def binary_tournament(pop: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = rng.integers(0, len(pop), size=2)
    a, b = pop[i], pop[j]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def _rank_and_crowd(pop: list[Individual]) -> list[list[Individual]]:
    fronts = nondominated_sort(pop)
    for front in fronts:
        crowding_distance(front)
    return fronts


def reduce_population(pop: list[Individual], n: int) -> list[Individual]:
    """Elitist reduction to exactly n by rank then crowding; crowding ties are
    broken stably by insertion order."""
    fronts = _rank_and_crowd(pop)
    kept = []
    for front in fronts:
        if len(kept) + len(front) <= n:
            kept.extend(front)
        else:
            order = np.argsort([-ind.crowding for ind in front], kind="stable")
            kept.extend(front[i] for i in order[:n - len(kept)])
            break
    return kept


def evolve(problem, cfg: EvolutionConfig, on_generation=None) -> list[Individual]:
    """Run the NSGA-II loop and return the final rank-0 set.

    on_generation(gen, population) is called after each reduction (and once for
    the initial population as generation 0's predecessor with gen=-1 omitted).
    """
    rng = np.random.default_rng(cfg.rng_seed)
    n = cfg.population_size
    pop = [Individual(problem.initialize(rng)) for _ in range(n)]
    for ind in pop:
        ind.objectives = tuple(problem.evaluate(ind.genome))
    _rank_and_crowd(pop)
    for gen in range(cfg.generations):
        offspring = []
        for _ in range(n // 2):
            p1 = binary_tournament(pop, rng)
            p2 = binary_tournament(pop, rng)
            if rng.random() < cfg.crossover_prob:
                c1, c2 = problem.crossover(p1.genome, p2.genome, rng)
            else:
                c1, c2 = p1.genome, p2.genome
            for g in (c1, c2):
                g = problem.mutate(g, rng, cfg.mutation_prob)
                offspring.append(Individual(g, tuple(problem.evaluate(g))))
        pop = reduce_population(pop + offspring, n)
        _rank_and_crowd(pop)
        if on_generation is not None:
            on_generation(gen, pop)
    return [ind for ind in pop if ind.rank == 0]
