import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floorplan3d.geometry import (
    AirWall, Floorplan, FunctionalUnit, GridDimensionError, LayerSpec, Netlist,
    OutOfBoundsError, Placement, StackSpec, Tsv, build_grid, check_topology,
    manhattan_wirelength, occupancy_grid, tsv_path_exists,
)


def make_spec(nx=4, ny=4, layers=2, cell=300.0):
    return StackSpec(nx * cell, ny * cell, tuple(LayerSpec() for _ in range(layers)),
                     cell_xy_um=cell)


def fu(fid, l=1, w=1, p=1.0, kind="heat_source"):
    return FunctionalUnit(fid, fid, l, w, p, kind)


class TestBuildGrid:
    def test_reference_stack_dimensions(self):
        spec = StackSpec(12000, 10500, tuple(LayerSpec() for _ in range(4)))
        g = build_grid(spec)
        assert (g.nx, g.ny) == (40, 35)

    def test_single_cell(self):
        g = build_grid(StackSpec(300, 300, (LayerSpec(),)))
        assert (g.nx, g.ny, g.n_layers) == (1, 1, 1)

    def test_non_multiple_raises(self):
        with pytest.raises(GridDimensionError):
            build_grid(StackSpec(12001, 10500, (LayerSpec(),)))

    def test_zero_epoxy_only_on_top(self):
        with pytest.raises(ValueError):
            StackSpec(600, 600, (LayerSpec(epoxy_height_um=0), LayerSpec()))
        spec = StackSpec(600, 600, (LayerSpec(), LayerSpec(epoxy_height_um=0)))
        assert len(build_grid(spec).slabs) == 5


class TestCheckTopology:
    def test_out_of_bounds(self):
        spec = StackSpec(12000, 10500, (LayerSpec(),))
        fus = {"a": fu("a", 2, 2)}
        fp = Floorplan(spec)
        assert check_topology(Placement("a", 39, 0, 0), fp, fus) >= 1

    def test_empty_grid_in_bounds(self):
        fus = {"a": fu("a", 2, 2)}
        fp = Floorplan(make_spec())
        assert check_topology(Placement("a", 0, 0, 0), fp, fus) == 0

    def test_full_overlap_counts_one(self):
        fus = {"a": fu("a", 2, 2), "b": fu("b", 2, 2)}
        fp = Floorplan(make_spec(), placements=[Placement("a", 1, 1, 0)])
        assert check_topology(Placement("b", 1, 1, 0), fp, fus) == 1

    def test_counts_entities_not_cells(self):
        fus = {"a": fu("a", 1, 1), "b": fu("b", 1, 1), "c": fu("c", 4, 1)}
        fp = Floorplan(make_spec(), placements=[Placement("a", 0, 0, 0),
                                                Placement("b", 2, 0, 0)])
        assert check_topology(Placement("c", 0, 0, 0), fp, fus) == 2

    def test_tsv_and_wall_are_obstacles(self):
        fus = {"a": fu("a", 1, 1)}
        fp = Floorplan(make_spec(), tsvs=[Tsv(1, 1, 0)],
                       air_walls=[AirWall(layer=0, position_um=0.0)])
        assert check_topology(Placement("a", 1, 1, 0), fp, fus) == 1
        assert check_topology(Placement("a", 0, 2, 0), fp, fus) == 1
        assert check_topology(Placement("a", 2, 2, 0), fp, fus) == 0

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_zero_violations_iff_bruteforce_clear(self, data):
        """Exhaustive per-cell oracle on small grids."""
        nx = data.draw(st.integers(2, 8))
        ny = data.draw(st.integers(2, 8))
        nl = data.draw(st.integers(1, 4))
        spec = make_spec(nx, ny, nl)
        fus = {}
        placements = []
        for i in range(data.draw(st.integers(0, 4))):
            f = fu(f"f{i}", data.draw(st.integers(1, 3)), data.draw(st.integers(1, 3)))
            fus[f.id] = f
            placements.append(Placement(f.id, data.draw(st.integers(0, nx - 1)),
                                        data.draw(st.integers(0, ny - 1)),
                                        data.draw(st.integers(0, nl - 1))))
        cand = fu("cand", data.draw(st.integers(1, 4)), data.draw(st.integers(1, 4)))
        fus[cand.id] = cand
        pl = Placement("cand", data.draw(st.integers(0, nx - 1)),
                       data.draw(st.integers(0, ny - 1)),
                       data.draw(st.integers(0, nl - 1)))
        # keep the partial floorplan itself legal enough to reason about
        fp = Floorplan(spec, placements=[q for q in placements
                                         if q.x + fus[q.fu_id].length_cells <= nx
                                         and q.y + fus[q.fu_id].width_cells <= ny])

        occupied = set()
        for q in fp.placements:
            f = fus[q.fu_id]
            for dx in range(f.length_cells):
                for dy in range(f.width_cells):
                    occupied.add((q.z, q.x + dx, q.y + dy))
        in_bounds = pl.x + cand.length_cells <= nx and pl.y + cand.width_cells <= ny
        clear = all((pl.z, pl.x + dx, pl.y + dy) not in occupied
                    for dx in range(cand.length_cells)
                    for dy in range(cand.width_cells))
        expected_zero = in_bounds and clear
        assert (check_topology(pl, fp, fus) == 0) == expected_zero


class TestWirelength:
    def test_direct_arithmetic(self):
        fus = {"a": fu("a", 2, 2), "b": fu("b", 2, 2)}
        # centers land at (1,1,0) and (4,5,0)
        fp = Floorplan(make_spec(8, 8), placements=[Placement("a", 0, 0, 0),
                                                    Placement("b", 3, 4, 0)])
        assert manhattan_wirelength(fp, Netlist([("a", "b")]), fus) == 7

    def test_empty_netlist(self):
        fp = Floorplan(make_spec())
        assert manhattan_wirelength(fp, Netlist(), {}) == 0

    def test_vertical_only_scaled_by_pitch(self):
        fus = {"a": fu("a", 2, 2), "b": fu("b", 2, 2)}
        fp = Floorplan(make_spec(4, 4, 3), placements=[Placement("a", 0, 0, 0),
                                                       Placement("b", 0, 0, 2)])
        net = Netlist([("a", "b")])
        assert manhattan_wirelength(fp, net, fus) == 2
        assert manhattan_wirelength(fp, net, fus, layer_pitch_cells=0.5) == 1

    def test_unplaced_endpoint(self):
        fus = {"a": fu("a"), "b": fu("b")}
        fp = Floorplan(make_spec(), placements=[Placement("a", 0, 0, 0)])
        with pytest.raises(KeyError):
            manhattan_wirelength(fp, Netlist([("a", "b")]), fus)

    def test_reflection_symmetry(self):
        rng = np.random.default_rng(0)
        spec = make_spec(10, 10)
        fus = {f"f{i}": fu(f"f{i}", int(rng.integers(1, 3)), int(rng.integers(1, 3)))
               for i in range(5)}
        pls = [Placement(fid, int(rng.integers(0, 7)), int(rng.integers(0, 7)), 0)
               for fid in fus]
        net = Netlist([("f0", "f1"), ("f1", "f2"), ("f3", "f4")])
        fp = Floorplan(spec, placements=pls)
        mirrored = [Placement(p.fu_id, 10 - p.x - fus[p.fu_id].length_cells, p.y, p.z)
                    for p in pls]
        fpm = Floorplan(spec, placements=mirrored)
        assert manhattan_wirelength(fp, net, fus) == pytest.approx(
            manhattan_wirelength(fpm, net, fus))


class TestTsvPathExists:
    def test_empty_grid(self):
        occ = occupancy_grid(Floorplan(make_spec(4, 4, 4)), {})
        assert tsv_path_exists(occ, 2, 2, 0)

    def test_blocked_column(self):
        fus = {"a": fu("a")}
        fp = Floorplan(make_spec(4, 4, 4), placements=[Placement("a", 2, 2, 2)])
        occ = occupancy_grid(fp, fus)
        assert not tsv_path_exists(occ, 2, 2, 0)
        assert tsv_path_exists(occ, 2, 2, 3)

    def test_clear_above_occupied_bottom(self):
        fus = {"a": fu("a")}
        fp = Floorplan(make_spec(4, 4, 2), placements=[Placement("a", 1, 1, 0)])
        occ = occupancy_grid(fp, fus)
        assert tsv_path_exists(occ, 1, 1, 1)
        assert not tsv_path_exists(occ, 1, 1, 0)

    def test_out_of_bounds(self):
        occ = occupancy_grid(Floorplan(make_spec()), {})
        with pytest.raises(OutOfBoundsError):
            tsv_path_exists(occ, 9, 0, 0)

    def test_monotone_under_freeing(self):
        rng = np.random.default_rng(3)
        spec = make_spec(5, 5, 3)
        occ = occupancy_grid(Floorplan(spec), {})
        occ.occ = rng.random(occ.occ.shape) < 0.4
        before = {(x, y, l): tsv_path_exists(occ, x, y, l)
                  for x in range(5) for y in range(5) for l in range(3)}
        freed = occ.copy()
        freed.occ &= rng.random(occ.occ.shape) < 0.5
        for key, val in before.items():
            if val:
                assert tsv_path_exists(freed, *key)


def test_occupancy_rebuild_matches_incremental():
    rng = np.random.default_rng(7)
    spec = make_spec(8, 8, 3)
    fus = {f"f{i}": fu(f"f{i}", int(rng.integers(1, 3)), int(rng.integers(1, 3)))
           for i in range(6)}
    fp = Floorplan(spec)
    inc = occupancy_grid(fp, fus)
    for i, fid in enumerate(fus):
        pl = Placement(fid, int(rng.integers(0, 6)), int(rng.integers(0, 6)),
                       int(rng.integers(0, 3)))
        fp.placements.append(pl)
        f = fus[fid]
        inc.mark_rect(pl.z, pl.x, pl.y, f.length_cells, f.width_cells)
        assert occupancy_grid(fp, fus).state_hash() == inc.state_hash()


def test_column_reach():
    spec = make_spec(3, 1, 4)
    occ = occupancy_grid(Floorplan(spec), {})
    occ.occ[2, 0, 0] = True   # blocked at layer 2 -> reach 3
    occ.occ[3, 0, 1] = True   # top blocked -> no reach
    reach = occ.column_reach()
    assert list(reach[0]) == [3, 4, 0]


def test_air_wall_cells_and_sides():
    grid = build_grid(StackSpec(12000, 10500, tuple(LayerSpec() for _ in range(4))))
    wall = AirWall(layer=0, position_um=5400.0, side="left")
    cells = list(wall.cells(grid))
    assert all(x == 18 for x, _ in cells) and len(cells) == 35
    right = AirWall(layer=1, position_um=5400.0, side="right")
    assert right.column(grid) == 40 - 18 - 1
