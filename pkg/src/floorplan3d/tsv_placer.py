"""Vertical-via planning on a frozen floorplan.

Candidate drill sites are the free columns of the occupancy grid, listed as a
flat array grouped by target layer (deepest first). A binary chromosome over
that array trades via count against via-aware total wirelength: cross-layer
nets route through the cheapest selected via that reaches deep enough, with
horizontal Manhattan legs only.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Floorplan, FunctionalUnit, Netlist, Tsv, center, occupancy_grid,
)


class ChromosomeLengthError(ValueError):
    pass


class NoSolutionError(LookupError):
    """No front member satisfies the requested minimum via count."""


@dataclass(frozen=True)
class TsvCandidateArray:
    """Drillable (x, y, to_layer) triples, contiguous per to_layer region.

    A column free down to layer 0 reappears in every shallower region, so one
    site can host vias of different depths."""
    triples: tuple[Tsv, ...]
    region_sizes: tuple[int, ...]  # per to_layer, ascending

    def __len__(self):
        return len(self.triples)


def enumerate_candidates(fp: Floorplan, fus: dict[str, FunctionalUnit]) -> TsvCandidateArray:
    occ = occupancy_grid(fp, fus)
    reach = occ.column_reach()  # lowest reachable layer per column
    n_layers = occ.grid.n_layers
    triples = []
    sizes = []
    for to_layer in range(n_layers - 1):
        ys, xs = np.nonzero(reach <= to_layer)
        sizes.append(len(xs))
        triples.extend(Tsv(int(x), int(y), to_layer) for x, y in zip(xs, ys))
    return TsvCandidateArray(tuple(triples), tuple(sizes))


def _net_geometry(fp, fus, netlist):
    """Per-net endpoint centers and layer span."""
    rows = []
    for a, b in netlist:
        xa, ya, za = center(fus[a], fp.placement_of(a))
        xb, yb, zb = center(fus[b], fp.placement_of(b))
        rows.append((xa, ya, za, xb, yb, zb))
    return rows


class TsvPlacementProblem:
    """Engine-facing problem: genomes are bit tuples over the candidate array.

    Objectives are (via count, wirelength). A cross-layer net with no usable
    selected via makes the wirelength infinite rather than raising, so the
    evolutionary pressure repairs infeasible chromosomes on its own.
    """

    def __init__(self, fp: Floorplan, fus: dict[str, FunctionalUnit],
                 netlist: Netlist, candidates: TsvCandidateArray | None = None,
                 layer_pitch_cells: float = 1.0, include_vertical: bool = False,
                 initial_density: float = 0.5):
        self.fp = fp
        self.fus = fus
        self.netlist = netlist
        self.candidates = candidates if candidates is not None \
            else enumerate_candidates(fp, fus)
        self.layer_pitch_cells = layer_pitch_cells
        self.include_vertical = include_vertical
        self.initial_density = initial_density
        self._same_layer_total = 0.0
        self._net_dists = []   # per cross-layer net: distances, +inf where unusable
        cand = self.candidates.triples
        tx = np.array([t.x + 0.5 for t in cand])
        ty = np.array([t.y + 0.5 for t in cand])
        tl = np.array([t.to_layer for t in cand], dtype=int)
        for xa, ya, za, xb, yb, zb in _net_geometry(fp, fus, netlist):
            if za == zb:
                self._same_layer_total += abs(xa - xb) + abs(ya - yb)
                continue
            d = (np.abs(xa - tx) + np.abs(ya - ty)
                 + np.abs(xb - tx) + np.abs(yb - ty))
            if include_vertical:
                d = d + abs(za - zb) * layer_pitch_cells
            d = np.where(tl <= min(za, zb), d, np.inf)
            self._net_dists.append(d)

    @property
    def n_bits(self) -> int:
        return len(self.candidates)

    def initialize(self, rng: np.random.Generator):
        return tuple(int(b) for b in rng.random(self.n_bits) < self.initial_density)

    def evaluate(self, genome) -> tuple[float, float]:
        if len(genome) != self.n_bits:
            raise ChromosomeLengthError(
                f"chromosome length {len(genome)} != {self.n_bits} candidates")
        sel = np.asarray(genome, dtype=bool)
        f4 = float(sel.sum())
        f5 = self._same_layer_total
        for d in self._net_dists:
            ds = d[sel]
            best = ds.min() if ds.size else np.inf
            if not np.isfinite(best):
                return f4, np.inf
            f5 += best
        return f4, float(f5)

    def crossover(self, a, b, rng: np.random.Generator):
        if self.n_bits < 2:
            return a, b
        cut = int(rng.integers(1, self.n_bits))
        return a[:cut] + b[cut:], b[:cut] + a[cut:]

    def mutate(self, genome, rng: np.random.Generator, p: float):
        flips = rng.random(self.n_bits) < p
        return tuple(int(g) ^ int(f) for g, f in zip(genome, flips))

    def selected_tsvs(self, genome) -> list[Tsv]:
        return [t for t, b in zip(self.candidates.triples, genome) if b]

    def apply_to_floorplan(self, genome) -> Floorplan:
        return dataclasses.replace(self.fp, tsvs=self.fp.tsvs + self.selected_tsvs(genome))


def select_solution(front, min_tsvs: int):
    """Pick the front member to carry forward given a minimum via count.

    With a positive minimum, vias are a manufacturing cost, so the fewest
    vias meeting the bar win (wirelength breaks ties). With no minimum the
    count is unconstrained and the global wirelength optimum is taken.
    """
    eligible = [ind for ind in front
                if ind.objectives[0] >= min_tsvs and np.isfinite(ind.objectives[1])]
    if not eligible:
        raise NoSolutionError(f"no front member has >= {min_tsvs} vias")
    if min_tsvs > 0:
        return min(eligible, key=lambda ind: (ind.objectives[0], ind.objectives[1]))
    return min(eligible, key=lambda ind: (ind.objectives[1], ind.objectives[0]))
