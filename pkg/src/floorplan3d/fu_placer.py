"""Functional-unit placement: permutation-with-rotation chromosomes, the greedy
exhaustive decoder, pairwise hotspot proxy, cycle crossover and mutation.

The decoder places blocks in chromosome order. For every block it scans all
in-bounds positions (x fastest, then y, then z); among violation-free
positions, heat sources take the one minimising the incremental hotspot proxy
and heat sinks the one minimising incremental wirelength, first strict minimum
winning. With the TSV-aware variant a position is only usable if every
cross-layer connection to an already-placed block can still be served by at
least one drillable free column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Floorplan, FunctionalUnit, Netlist, Placement, StackSpec, build_grid,
)

COINCIDENT_FLOOR_CELLS = 0.5  # distance floor for the hotspot proxy


@dataclass(frozen=True)
class FuGenome:
    """Placement order (indices into the problem's FU list) plus rotation bits."""
    order: tuple[int, ...]
    rotated: tuple[bool, ...]

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("genome is not a permutation")


@dataclass(frozen=True)
class FuObjectives:
    violations: int        # count of topological violations
    wirelength: float      # cells
    hotspot: float         # pairwise power-density proxy

    @property
    def transformed(self) -> tuple[float, float, float]:
        f1 = self.violations
        return (float(f1), (1 + f1) * self.wirelength, (1 + f1) * self.hotspot)


def f3_proxy(placements, fus: dict[str, FunctionalUnit],
             layer_pitch_cells: float = 1.0) -> float:
    """Sum over pairs of power-density products divided by euclidean center
    distance (cells); coincident centers are floored at half a cell."""
    items = []
    for pl in placements:
        fu = fus[pl.fu_id]
        w = fu.width_cells if pl.rotated else fu.length_cells
        h = fu.length_cells if pl.rotated else fu.width_cells
        items.append((pl.x + w / 2.0, pl.y + h / 2.0, pl.z,
                      fu.power_W / fu.area_cells))
    total = 0.0
    for i in range(len(items)):
        xi, yi, zi, pi = items[i]
        for j in range(i + 1, len(items)):
            xj, yj, zj, pj = items[j]
            d = np.sqrt((xi - xj) ** 2 + (yi - yj) ** 2
                        + ((zi - zj) * layer_pitch_cells) ** 2)
            total += pi * pj / max(d, COINCIDENT_FLOOR_CELLS)
    return total


def cycle_crossover(a: FuGenome, b: FuGenome, rng) -> tuple[FuGenome, FuGenome]:
    """Standard CX on the cycle containing position 0; rotation bits travel
    with their gene record."""
    if sorted(a.order) != sorted(b.order):
        raise ValueError("parents place different FU sets")
    pos_in_a = {v: i for i, v in enumerate(a.order)}
    cycle = set()
    i = 0
    while i not in cycle:
        cycle.add(i)
        i = pos_in_a[b.order[i]]

    def child(src, other):
        order = tuple(src.order[i] if i in cycle else other.order[i]
                      for i in range(len(src.order)))
        rot = tuple(src.rotated[i] if i in cycle else other.rotated[i]
                    for i in range(len(src.order)))
        return FuGenome(order, rot)

    return child(a, b), child(b, a)


def mutate(genome: FuGenome, rng, p: float) -> FuGenome:
    """With probability p, either swap two distinct genes or flip one rotation
    bit (50/50)."""
    if rng.random() >= p:
        return genome
    order, rot = list(genome.order), list(genome.rotated)
    if rng.random() < 0.5:
        i, j = rng.choice(len(order), size=2, replace=False)
        order[i], order[j] = order[j], order[i]
        rot[i], rot[j] = rot[j], rot[i]
    else:
        i = int(rng.integers(len(order)))
        rot[i] = not rot[i]
    return FuGenome(tuple(order), tuple(rot))


def _integral(mask: np.ndarray) -> np.ndarray:
    ii = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int32)
    np.cumsum(np.cumsum(mask, axis=0), axis=1, out=ii[1:, 1:])
    return ii


def window_counts(ii: np.ndarray, w: int, h: int) -> np.ndarray:
    """Per in-bounds window position (y0, x0): sum of the integral image's
    underlying mask over the h x w window."""
    ny, nx = ii.shape[0] - 1, ii.shape[1] - 1
    return (ii[h:ny + 1, w:nx + 1] - ii[h:ny + 1, :nx - w + 1]
            - ii[:ny - h + 1, w:nx + 1] + ii[:ny - h + 1, :nx - w + 1])


class _DecodeState:
    """Incremental occupancy, entity ids and per-layer integral images."""

    def __init__(self, nx, ny, n_layers, walls_mask=None):
        self.nx, self.ny, self.n_layers = nx, ny, n_layers
        self.occ = np.zeros((n_layers, ny, nx), dtype=bool)
        self.entity = np.full((n_layers, ny, nx), -1, dtype=np.int32)
        if walls_mask is not None:
            self.occ |= walls_mask
        self._ii = [_integral(self.occ[z]) for z in range(n_layers)]
        self._reach = None

    def occupy(self, z, x0, y0, w, h, eid):
        self.occ[z, y0:y0 + h, x0:x0 + w] = True
        self.entity[z, y0:y0 + h, x0:x0 + w] = eid
        self._ii[z] = _integral(self.occ[z])
        self._reach = None

    def free_windows(self, z, w, h):
        return window_counts(self._ii[z], w, h) == 0

    def column_reach(self):
        if self._reach is None:
            reach = np.full((self.ny, self.nx), self.n_layers, dtype=int)
            clear = np.ones((self.ny, self.nx), dtype=bool)
            for z in range(self.n_layers - 1, -1, -1):
                clear &= ~self.occ[z]
                reach[clear] = z
            self._reach = reach
        return self._reach


class FuPlacementProblem:
    """Problem definition consumed by the NSGA-II engine.

    star=True enables the TSV-feasibility check (free-cell matrix variant);
    region_spec, when given, restricts every FU's footprint to its assigned
    region and treats wall cells as occupied. Decoding is pure per chromosome.
    """

    def __init__(self, stack: StackSpec, fus: list[FunctionalUnit],
                 netlist: Netlist, layer_pitch_cells: float = 1.0,
                 star: bool = False, region_spec=None,
                 seed_genomes: list[FuGenome] | None = None):
        self.stack = stack
        self.fus = fus
        self.netlist = netlist
        netlist.validate([f.id for f in fus])
        self.layer_pitch_cells = layer_pitch_cells
        self.star = star
        self.region_spec = region_spec
        self.grid = build_grid(stack)
        self._index = {f.id: i for i, f in enumerate(fus)}
        self.adjacency = [set() for _ in fus]
        for a, b in netlist:
            ia, ib = self._index[a], self._index[b]
            self.adjacency[ia].add(ib)
            self.adjacency[ib].add(ia)
        self.density = np.array([f.power_W / f.area_cells for f in fus])
        self._seed_genomes = list(seed_genomes or [])
        if region_spec is not None:
            # per FU and layer: integral image of out-of-region cells
            self._region_ii = [
                [_integral(~region_spec.mask_for(f)[z])
                 for z in range(self.grid.n_layers)]
                for f in fus]
            self._walls_mask = region_spec.walls_mask()
        else:
            self._region_ii = None
            self._walls_mask = None

    # engine interface -----------------------------------------------------
    def initialize(self, rng) -> FuGenome:
        if self._seed_genomes:
            return self._seed_genomes.pop(0)
        n = len(self.fus)
        order = tuple(int(v) for v in rng.permutation(n))
        rotated = tuple(bool(v) for v in rng.integers(0, 2, size=n))
        return FuGenome(order, rotated)

    def crossover(self, a, b, rng):
        return cycle_crossover(a, b, rng)

    def mutate(self, genome, rng, p):
        return mutate(genome, rng, p)

    def evaluate(self, genome: FuGenome) -> tuple[float, float, float]:
        return self.decode(genome)[1].transformed

    # decoding -------------------------------------------------------------
    def decode(self, genome: FuGenome) -> tuple[Floorplan, FuObjectives]:
        g = self.grid
        nx, ny, nl = g.nx, g.ny, g.n_layers
        state = _DecodeState(nx, ny, nl, self._walls_mask)
        placements: list[Placement] = []
        placed_idx: list[int] = []
        px = np.empty(len(self.fus))
        py = np.empty(len(self.fus))
        pz = np.empty(len(self.fus))
        violations = 0

        for gene_pos, fu_idx in enumerate(genome.order):
            fu = self.fus[fu_idx]
            rot = genome.rotated[gene_pos]
            w = fu.width_cells if rot else fu.length_cells
            h = fu.length_cells if rot else fu.width_cells
            n_placed = len(placements)
            best = None   # (score, z, y0, x0)
            any_free = None
            if w <= nx and h <= ny:
                xs = np.arange(nx - w + 1) + w / 2.0
                ys = np.arange(ny - h + 1) + h / 2.0
                conn = [j for j in range(n_placed)
                        if placed_idx[j] in self.adjacency[fu_idx]]
                score_per_layer = self._layer_scores(
                    fu, xs, ys, px[:n_placed], py[:n_placed], pz[:n_placed],
                    self.density[placed_idx], conn)
                for z in range(nl):
                    free = state.free_windows(z, w, h)
                    if self._region_ii is not None:
                        free &= window_counts(self._region_ii[fu_idx][z], w, h) == 0
                    if not free.any():
                        continue
                    if any_free is None:
                        y0, x0 = np.argwhere(free)[0]
                        any_free = (z, int(y0), int(x0))
                    if self.star:
                        free = self._veto_unreachable(
                            state, free, z, w, h, placements, conn, pz)
                        if not free.any():
                            continue
                    score = np.where(free, score_per_layer(z), np.inf)
                    flat = int(np.argmin(score))
                    val = float(score.flat[flat])
                    if np.isfinite(val) and (best is None or val < best[0]):
                        y0, x0 = np.unravel_index(flat, score.shape)
                        best = (val, z, int(y0), int(x0))

            if best is not None:
                _, z, y0, x0 = best
            elif any_free is not None:
                # violation-free cells exist but the TSV check rejected all of
                # them; keep the chromosome evaluable and count one violation
                # so such solutions never report as fully feasible
                z, y0, x0 = any_free
                violations += 1
            else:
                z, y0, x0, v = self._fallback_min_violations(state, w, h, fu_idx)
                violations += v

            placements.append(Placement(fu.id, x0, y0, z, rot))
            placed_idx.append(fu_idx)
            state.occupy(z, max(x0, 0), max(y0, 0),
                         min(w, nx - max(x0, 0)), min(h, ny - max(y0, 0)),
                         eid=n_placed)
            px[n_placed] = x0 + w / 2.0
            py[n_placed] = y0 + h / 2.0
            pz[n_placed] = z

        fp = Floorplan(self.stack, placements=placements)
        pos_of = {placed_idx[j]: j for j in range(len(placed_idx))}
        wirelength = 0.0
        for a, b in self.netlist:
            ja, jb = pos_of[self._index[a]], pos_of[self._index[b]]
            wirelength += (abs(px[ja] - px[jb]) + abs(py[ja] - py[jb])
                           + abs(pz[ja] - pz[jb]) * self.layer_pitch_cells)
        hotspot = self._hotspot_total(px, py, pz, placed_idx)
        return fp, FuObjectives(violations, wirelength, hotspot)

    def _hotspot_total(self, px, py, pz, placed_idx):
        n = len(placed_idx)
        if n < 2:
            return 0.0
        dens = self.density[placed_idx]
        dx = px[:n, None] - px[None, :n]
        dy = py[:n, None] - py[None, :n]
        dz = (pz[:n, None] - pz[None, :n]) * self.layer_pitch_cells
        dist = np.sqrt(dx ** 2 + dy ** 2 + dz ** 2)
        np.maximum(dist, COINCIDENT_FLOOR_CELLS, out=dist)
        contrib = dens[:, None] * dens[None, :] / dist
        return float(np.triu(contrib, k=1).sum())

    def _layer_scores(self, fu, xs, ys, pxa, pya, pza, pdens, conn):
        """Return a z -> score-array function for one block. The x/y terms are
        shared by every layer, so they are computed once per block: hotspot
        proxy increments for heat sources, wirelength to connected placed
        blocks for heat sinks."""
        shape = (ys.size, xs.size)
        if fu.kind == "heat_source":
            if pxa.size == 0:
                return lambda z: np.zeros(shape)
            dx2 = (xs[None, :] - pxa[:, None]) ** 2
            dy2 = (ys[None, :] - pya[:, None]) ** 2
            own_density = fu.power_W / fu.area_cells
            buf = np.empty((pxa.size,) + shape)

            def score(z):
                dz2 = ((z - pza) * self.layer_pitch_cells) ** 2
                np.add((dx2 + dz2[:, None])[:, None, :], dy2[:, :, None], out=buf)
                np.sqrt(buf, out=buf)
                np.maximum(buf, COINCIDENT_FLOOR_CELLS, out=buf)
                np.divide(pdens[:, None, None], buf, out=buf)
                return own_density * buf.sum(axis=0)

            return score
        if not conn:
            return lambda z: np.zeros(shape)
        dx = np.abs(xs[None, :] - pxa[conn][:, None])
        dy = np.abs(ys[None, :] - pya[conn][:, None])
        pzc = pza[conn]

        def score(z):
            dz = np.abs(z - pzc) * self.layer_pitch_cells
            return (dx[:, None, :] + dy[:, :, None] + dz[:, None, None]).sum(axis=0)

        return score

    def _veto_unreachable(self, state, free, z, w, h, placements, conn, pz):
        """Reject candidate positions whose cross-layer connections to already
        placed blocks would be left without any drillable free column."""
        cross = [j for j in conn if placements[j].z != z]
        if not cross:
            return free
        reach = state.column_reach()
        for j in cross:
            required = min(z, placements[j].z)
            qual = reach <= required
            total = int(qual.sum())
            if total == 0:
                return np.zeros_like(free)
            inside = window_counts(_integral(qual), w, h)
            free = free & (total - inside > 0)
        return free

    def _fallback_min_violations(self, state, w, h, fu_idx):
        """No violation-free position: exact per-entity violation minimisation
        over the scan order (infeasibility path, exercised rarely). Wall
        overlap and out-of-region cells each count as one extra violation."""
        g = self.grid
        nx, ny = g.nx, g.ny

        def extra(z, y0, x0, hh, ww):
            e = 0
            if self._walls_mask is not None:
                if self._walls_mask[z, y0:y0 + hh, x0:x0 + ww].any():
                    e += 1
                mask = self.region_spec.mask_for(self.fus[fu_idx])
                if not mask[z, y0:y0 + hh, x0:x0 + ww].all():
                    e += 1
            return e

        if w > nx or h > ny:
            over = np.unique(state.entity[0, :min(h, ny), :min(w, nx)])
            return 0, 0, 0, 1 + int(np.sum(over >= 0)) + extra(0, 0, 0,
                                                               min(h, ny), min(w, nx))
        best = None
        for z in range(g.n_layers):
            for y0 in range(ny - h + 1):
                for x0 in range(nx - w + 1):
                    over = np.unique(state.entity[z, y0:y0 + h, x0:x0 + w])
                    v = int(np.sum(over >= 0)) + extra(z, y0, x0, h, w)
                    if best is None or v < best[0]:
                        best = (v, z, y0, x0)
            if best[0] == 1:
                break
        v, z, y0, x0 = best
        return z, y0, x0, v
