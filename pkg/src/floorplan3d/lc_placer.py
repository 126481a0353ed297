"""Coolant channel budgeting on a simulated floorplan.

Evolution does not re-run the thermal solver per individual. Instead each
selected channel rewrites the temperature of its own column and of the two
columns on either side with fitted logarithmic curves, and the objective is
the sum of the rewritten field. The curves were fitted on hot inputs, so
every update is clamped to [ambient, previous value] to keep cold cells
physical. The selected solution is then re-simulated with real channel
physics by the thermal solver.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .geometry import (
    CollisionError, Floorplan, LiquidChannel, build_grid,
)
from .thermal import TemperatureField


class ChromosomeLengthError(ValueError):
    pass


class InsufficientCandidatesError(LookupError):
    pass


# (slope, offset) of T_new = slope * ln(T_old) - offset, by |column offset|
_CURVES = {0: (342.46, 1664.4), 1: (321.28, 1541.5), 2: (293.60, 1380.8)}


@dataclass(frozen=True)
class LcCandidateArray:
    pairs: tuple[LiquidChannel, ...]  # ordered by (layer, x)

    def __len__(self):
        return len(self.pairs)


def _blocked_columns(fp: Floorplan, grid) -> set[tuple[int, int]]:
    """(x, layer) pairs a full-length y channel may not occupy."""
    blocked = set()
    for t in fp.tsvs:
        for layer in range(t.to_layer, grid.n_layers):
            blocked.add((t.x, layer))
    for w in fp.air_walls:
        if w.axis == "y":
            c = w.column(grid)
            for dx in range(w.thickness_cells):
                blocked.add((c + dx, w.layer))
    return blocked


def enumerate_candidates(fp: Floorplan) -> LcCandidateArray:
    grid = build_grid(fp.stack)
    blocked = _blocked_columns(fp, grid)
    pairs = [LiquidChannel(x, layer)
             for layer in range(grid.n_layers) for x in range(grid.nx)
             if (x, layer) not in blocked]
    return LcCandidateArray(tuple(pairs))


def apply_channel_updates(field: np.ndarray, channels, grid,
                          ambient_K: float) -> np.ndarray:
    """Rewrite a (slabs, ny, nx) working field for the given channels, in
    order. Each channel touches every sub-slab of its layer at columns
    x, x-1, x-2, x+1, x+2."""
    out = field.copy()
    for ch in channels:
        slabs = grid.layer_slab_indices(ch.layer)
        for dx in (0, -1, -2, 1, 2):
            x = ch.x + dx
            if not 0 <= x < grid.nx:
                continue
            a, b = _CURVES[abs(dx)]
            for s in slabs:
                col = out[s, :, x]
                updated = a * np.log(col) - b
                out[s, :, x] = np.clip(updated, ambient_K, col)
    return out


class LcPlacementProblem:
    """Engine-facing problem: bit tuples over the candidate array, objectives
    (channel count, surrogate field sum). A configured channel budget makes
    over-budget chromosomes infinite rather than repairing them."""

    def __init__(self, fp: Floorplan, field: TemperatureField,
                 candidates: LcCandidateArray | None = None,
                 max_channels: int | None = None, si_only: bool = False):
        self.fp = fp
        self.grid = field.grid
        self.candidates = candidates if candidates is not None \
            else enumerate_candidates(fp)
        self.max_channels = max_channels
        self.si_only = si_only
        self.ambient_K = fp.stack.ambient_K
        self._field = field.as_array()
        self._layer_xs = {
            layer: sorted(i for i, c in enumerate(self.candidates.pairs)
                          if c.layer == layer)
            for layer in range(self.grid.n_layers)}
        if si_only:
            self._sum_slabs = [self.grid.si_slab_index(l)
                               for l in range(self.grid.n_layers)]
        else:
            self._sum_slabs = list(range(len(self.grid.slabs)))

    @property
    def n_bits(self) -> int:
        return len(self.candidates)

    def initialize(self, rng: np.random.Generator):
        density = 0.5
        if self.max_channels is not None and self.n_bits:
            # half the population starts from evenly spread layouts (random
            # per-layer count within the budget); these are strong building
            # blocks the pure-random start takes far too long to rediscover
            per_cap = max(1, self.max_channels // max(self.grid.n_layers, 1))
            if rng.random() < 0.5:
                k = int(rng.integers(1, per_cap + 1))
                return self._spread_genome(k)
            # keep the expected count inside the budget so the first
            # generation is not uniformly infeasible
            density = min(0.5, self.max_channels / (2 * self.n_bits))
        return tuple(int(b) for b in rng.random(self.n_bits) < density)

    def _spread_genome(self, per_layer: int):
        bits = [0] * self.n_bits
        for layer in range(self.grid.n_layers):
            free = self._layer_xs[layer]
            taken = set()
            for i in range(per_layer):
                t = int(np.floor((i + 0.5) * self.grid.nx / per_layer))
                options = [j for j in free if j not in taken]
                if not options:
                    break
                j = min(options,
                        key=lambda j: (abs(self.candidates.pairs[j].x - t), j))
                taken.add(j)
                bits[j] = 1
        return tuple(bits)

    def selected_channels(self, genome) -> list[LiquidChannel]:
        return [c for c, b in zip(self.candidates.pairs, genome) if b]

    def evaluate(self, genome) -> tuple[float, float]:
        if len(genome) != self.n_bits:
            raise ChromosomeLengthError(
                f"chromosome length {len(genome)} != {self.n_bits} candidates")
        f6 = float(sum(genome))
        if self.max_channels is not None and f6 > self.max_channels:
            return f6, np.inf
        work = apply_channel_updates(self._field, self.selected_channels(genome),
                                     self.grid, self.ambient_K)
        return f6, float(work[self._sum_slabs].sum())

    def crossover(self, a, b, rng: np.random.Generator):
        if self.n_bits < 2:
            return a, b
        cut = int(rng.integers(1, self.n_bits))
        return a[:cut] + b[cut:], b[:cut] + a[cut:]

    def mutate(self, genome, rng: np.random.Generator, p: float):
        flips = rng.random(self.n_bits) < p
        return tuple(int(g) ^ int(f) for g, f in zip(genome, flips))

    def apply_to_floorplan(self, genome) -> Floorplan:
        grid = build_grid(self.fp.stack)
        blocked = _blocked_columns(self.fp, grid)
        chans = self.selected_channels(genome)
        for ch in chans:
            if (ch.x, ch.layer) in blocked:
                raise CollisionError(f"channel {ch} overlaps a via or wall column")
        return dataclasses.replace(
            self.fp, liquid_channels=self.fp.liquid_channels + chans)


def homogeneous_placement(fp: Floorplan, per_layer: int) -> Floorplan:
    """Evenly spaced channels on every layer, snapped to the nearest
    collision-free column; the hand-design baseline the optimizer is
    compared against."""
    grid = build_grid(fp.stack)
    cands = enumerate_candidates(fp)
    chosen = []
    for layer in range(grid.n_layers):
        free = sorted(c.x for c in cands.pairs if c.layer == layer)
        targets = [int(np.floor((i + 0.5) * grid.nx / per_layer))
                   for i in range(per_layer)]
        taken = set()
        for t in targets:
            options = [x for x in free if x not in taken]
            if not options:
                raise InsufficientCandidatesError(
                    f"layer {layer} has {len(free)} free columns, need {per_layer}")
            x = min(options, key=lambda x: (abs(x - t), x))
            taken.add(x)
            chosen.append(LiquidChannel(x, layer))
    return dataclasses.replace(fp, liquid_channels=fp.liquid_channels + chosen)


def select_solution(front, max_channels: int | None = None):
    """Lowest surrogate-temperature front member within the budget."""
    eligible = [ind for ind in front if np.isfinite(ind.objectives[1])
                and (max_channels is None or ind.objectives[0] <= max_channels)]
    if not eligible:
        raise InsufficientCandidatesError("no feasible front member within budget")
    return min(eligible, key=lambda ind: (ind.objectives[1], ind.objectives[0]))
