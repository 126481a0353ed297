import filecmp
import json
import os

import numpy as np
import pytest

from floorplan3d.benchmark import (
    BenchmarkSpec, InfeasibleAreaError, baseline_floorplan, generate_benchmark,
)
from floorplan3d.cli import main as cli_main
from floorplan3d.estimators import FuPlacer, LcPlacer, TsvPlacer
from floorplan3d.geometry import (
    Floorplan, Placement, build_grid, check_topology, occupancy_grid,
)
from floorplan3d.io import (
    load_field_csv, load_problem, save_field_csv, save_problem,
)
from floorplan3d.pipeline import (
    PipelineConfig, StageDependencyError, run_pipeline, stage_seed,
)
from floorplan3d.thermal import TemperatureField


def small_spec():
    return BenchmarkSpec(width_um=3000.0, length_um=2400.0,
                         cores_per_layer=(2, 2), layer_power_W=(4.0, 6.0),
                         core_cells=(2, 2), l2_cells=(2, 2), l2b_cells=(2, 2),
                         xbar_cells=(3, 1), l2_per_8_cores=4,
                         wall_offset_um=1200.0, min_tsvs=1, max_channels=4)


@pytest.fixture()
def small_problem(tmp_path):
    path = tmp_path / "problem.json"
    save_problem(generate_benchmark(small_spec()), path)
    return str(path)


class TestBenchmark:
    def test_reference_dimensions(self):
        p = generate_benchmark()
        grid = build_grid(p.stack)
        assert (grid.nx, grid.ny, grid.n_layers) == (40, 35, 4)
        assert len([f for f in p.fus.values() if f.label == "core"]) == 48

    def test_layer_power_budgets(self):
        p = generate_benchmark()
        home = p.constraints["home_layers"]
        for layer, budget in enumerate((84.0, 84.0, 139.0, 139.0)):
            total = sum(f.power_W for f in p.fus.values() if home[f.id] == layer)
            assert abs(total - budget) <= 0.01 * budget

    def test_every_core_connected(self):
        p = generate_benchmark()
        degree = {fid: 0 for fid in p.fus}
        for a, b in p.netlist:
            degree[a] += 1
            degree[b] += 1
        assert all(d >= 1 for fid, d in degree.items())

    def test_crossbar_chain_spans_layers(self):
        p = generate_benchmark()
        edges = set(p.netlist)
        for l in range(3):
            pair = tuple(sorted((f"xbar{l}", f"xbar{l + 1}")))
            assert pair in edges

    def test_infeasible_area_raises(self):
        spec = BenchmarkSpec(width_um=1200.0, length_um=1200.0,
                             cores_per_layer=(8,), layer_power_W=(84.0,))
        with pytest.raises(InfeasibleAreaError):
            generate_benchmark(spec)

    def test_baseline_is_violation_free(self):
        p = generate_benchmark()
        fp = baseline_floorplan(p)
        assert len(fp.placements) == len(p.fus)
        probe = Floorplan(p.stack)
        for pl in fp.placements:
            assert check_topology(pl, probe, p.fus) == 0
            probe.placements.append(pl)


class TestIo:
    def test_problem_round_trip(self, tmp_path, small_problem):
        p, fp = load_problem(small_problem)
        out = tmp_path / "again.json"
        save_problem(p, out, fp)
        p2, fp2 = load_problem(out)
        assert p2.stack == p.stack
        assert {f.id for f in p2.fus.values()} == set(p.fus)
        assert sorted(p2.netlist) == sorted(p.netlist)
        assert p2.constraints == p.constraints
        assert fp2.placements == fp.placements

    def test_floorplan_round_trip(self, tmp_path, small_problem):
        p, _ = load_problem(small_problem)
        fp = baseline_floorplan(p)
        fp.air_walls.extend(p.air_walls())
        out = tmp_path / "fp.json"
        save_problem(p, out, fp)
        _, fp2 = load_problem(out)
        assert fp2.placements == fp.placements
        assert fp2.air_walls == fp.air_walls
        assert occupancy_grid(fp2, p.fus).state_hash() == \
            occupancy_grid(fp, p.fus).state_hash()

    def test_field_csv_round_trip(self, tmp_path, small_problem):
        p, _ = load_problem(small_problem)
        grid = build_grid(p.stack)
        rng = np.random.default_rng(0)
        T = TemperatureField(grid, rng.uniform(300, 400, len(grid.slabs) * grid.ny * grid.nx))
        path = tmp_path / "field.csv"
        save_field_csv(T, path)
        T2 = load_field_csv(path, grid)
        assert (T2.values == T.values).all()


class TestStageSeeds:
    def test_differ_by_stage_and_master(self):
        assert stage_seed(0, "place-fu") != stage_seed(0, "place-tsv")
        assert stage_seed(0, "place-fu") != stage_seed(1, "place-fu")
        assert stage_seed(5, "place-lc") == stage_seed(5, "place-lc")


class TestPipeline:
    def test_dependency_error_without_floorplan(self, tmp_path, small_problem):
        cfg = PipelineConfig(small_problem, str(tmp_path / "run"),
                             stages=["place-lc"])
        with pytest.raises(StageDependencyError):
            run_pipeline(cfg)

    def test_unknown_stage_rejected(self, tmp_path, small_problem):
        with pytest.raises(StageDependencyError):
            PipelineConfig(small_problem, str(tmp_path), stages=["place-everything"])

    def test_full_flow_artifacts(self, tmp_path, small_problem):
        out = tmp_path / "run"
        cfg = PipelineConfig(small_problem, str(out),
                             stages=["place-fu-star", "place-tsv", "place-lc",
                                     "simulate", "report"],
                             rng_seed=3, select_rule="min-wirelength")
        run = run_pipeline(cfg)
        for rel in ["place-fu-star/front.csv", "place-fu-star/floorplan.json",
                    "place-tsv/front.csv", "place-lc/front.csv",
                    "field.csv", "metrics.csv", "final.json",
                    "report/metrics.csv", "report/thermal_map_layer0.csv"]:
            assert (out / rel).exists(), rel
        assert run.metrics["max_K"] > 300.0
        final = json.loads((out / "final.json").read_text())
        assert final["tsvs"] and final["liquid_channels"]
        assert len(final["liquid_channels"]) <= 4

    def test_deterministic_reruns_byte_identical(self, tmp_path, small_problem):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            cfg = PipelineConfig(small_problem, str(out),
                                 stages=["place-fu-star", "place-tsv", "simulate"],
                                 rng_seed=11, select_rule="min-wirelength")
            run_pipeline(cfg)
            outs.append(out)
        for rel in ["place-fu-star/front.csv", "place-tsv/front.csv",
                    "field.csv", "metrics.csv", "final.json"]:
            assert filecmp.cmp(outs[0] / rel, outs[1] / rel, shallow=False), rel

    def test_stage_isolation_from_saved_artifacts(self, tmp_path, small_problem):
        full = tmp_path / "full"
        cfg = PipelineConfig(small_problem, str(full),
                             stages=["place-fu-star", "place-tsv"],
                             rng_seed=4, select_rule="min-wirelength")
        run_pipeline(cfg)
        # re-run only the TSV stage from the saved placement artifact
        partial = tmp_path / "partial"
        cfg2 = PipelineConfig(str(full / "place-fu-star" / "floorplan.json"),
                              str(partial), stages=["place-tsv"], rng_seed=4)
        run_pipeline(cfg2)
        assert filecmp.cmp(full / "place-tsv" / "front.csv",
                           partial / "place-tsv" / "front.csv", shallow=False)

    def test_carve_ac_stage_places_walls(self, tmp_path, small_problem):
        out = tmp_path / "run"
        cfg = PipelineConfig(small_problem, str(out),
                             stages=["carve-ac", "simulate"],
                             rng_seed=5, select_rule="min-wirelength")
        run = run_pipeline(cfg)
        assert len(run.floorplan.air_walls) == 2
        final = json.loads((out / "final.json").read_text())
        assert len(final["air_walls"]) == 2

    def test_min_temperature_selection_runs(self, tmp_path, small_problem):
        out = tmp_path / "run"
        cfg = PipelineConfig(small_problem, str(out), stages=["place-fu", "simulate"],
                             rng_seed=2, select_rule="min-temperature")
        run = run_pipeline(cfg)
        assert run.metrics["max_K"] > 300.0


class TestCli:
    def test_generate_bench_and_simulate(self, tmp_path, capsys):
        prob = tmp_path / "bench.json"
        cli_main(["generate-bench", "--out", str(prob)])
        assert "68 blocks" in capsys.readouterr().out
        # simulating requires placements; write a baseline first
        p, _ = load_problem(prob)
        save_problem(p, prob, baseline_floorplan(p))
        cli_main(["simulate", "--config", str(prob), "--out", str(tmp_path / "sim")])
        out = capsys.readouterr().out
        assert "max_K" in out

    def test_run_and_select(self, tmp_path, capsys, small_problem):
        out = tmp_path / "run"
        cli_main(["run", "--config", small_problem, "--out", str(out),
                  "--stage", "place-fu-star", "--stage", "place-tsv",
                  "--seed", "9", "--select-rule", "min-wirelength",
                  "--min-tsvs", "1"])
        capsys.readouterr()
        cli_main(["select", "--front", str(out / "place-tsv" / "front.csv"),
                  "--min-tsvs", "1"])
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "tsv_count,wirelength"
        assert float(lines[1].split(",")[0]) >= 1


class TestEstimators:
    def test_fu_placer_params_and_fit(self, small_problem):
        p, _ = load_problem(small_problem)
        est = FuPlacer(population_size=20, generations=5, rng_seed=1, star=True)
        assert est.get_params()["population_size"] == 20
        est.fit(p)
        assert est.front_
        fp, obj = est.decode(est.front_[0])
        assert len(fp.placements) == len(p.fus)

    def test_tsv_then_lc_chain(self, small_problem):
        p, _ = load_problem(small_problem)
        fu = FuPlacer(population_size=20, generations=5, rng_seed=1, star=True).fit(p)
        feasible = [i for i in fu.front_ if i.objectives[0] == 0]
        fp, _ = fu.decode(min(feasible, key=lambda i: i.objectives[1]))
        tsv = TsvPlacer(population_size=20, generations=10, min_tsvs=1,
                        rng_seed=2).fit(p, fp)
        assert tsv.selected_.objectives[0] >= 1
        lc = LcPlacer(population_size=20, generations=10, max_channels=4,
                      rng_seed=3).fit(p, tsv.floorplan_)
        assert len(lc.floorplan_.liquid_channels) <= 4
