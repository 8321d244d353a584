import json

import numpy as np
import pytest

from viewplan import SceneSpec, generate_scene
from viewplan.cli import main
from viewplan.io import read_json, read_ply


@pytest.fixture
def tiny_config(tmp_path):
    """Config that shrinks every budget so commands finish in seconds."""
    path = tmp_path / "tiny.json"
    path.write_text(
        json.dumps(
            {
                "scene": {"points_per_plant": 15},
                "bo": {"n_cameras": 2, "n_init": 4, "n_iters": 2, "af_budget": 32},
                "baseline_candidates": 4,
                "realizations": 2,
            }
        )
    )
    return str(path)


def run(*argv):
    return main(list(argv))


class TestGenerateScene:
    def test_writes_ply_and_sidecar(self, tmp_path, tiny_config, capsys):
        out = tmp_path / "out"
        code = run(
            "generate-scene", "--scene", "single", "--seed", "3",
            "--config", tiny_config, "--out", str(out),
        )
        assert code == 0
        cloud = read_ply(out / "scene_single.ply")
        expect = generate_scene(SceneSpec(layout="single", points_per_plant=15, rng_seed=1003))
        assert np.array_equal(cloud.points, expect.points)
        sidecar = read_json(out / "scene_single.json")
        assert sidecar["layout"] == "single"
        assert sidecar["n_points"] == 15
        assert sidecar["plant_ranges"] == [[0, 15]]
        assert sidecar["config"]["scene"]["rng_seed"] == 1003
        assert sidecar["config"]["noise"]["rng_seed"] == 2003
        assert sidecar["config"]["bo"]["rng_seed"] == 3
        assert "scene_single.ply" in capsys.readouterr().out

    def test_grid_layout_camera_default(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        code = run(
            "generate-scene", "--scene", "grid9", "--config", tiny_config, "--out", str(out),
        )
        assert code == 0
        sidecar = read_json(out / "scene_grid9.json")
        assert sidecar["n_points"] == 9 * 15
        assert len(sidecar["plant_ranges"]) == 9


class TestPlan:
    def test_outputs_and_accounting(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        code = run(
            "plan", "--scene", "single", "--seed", "1",
            "--config", tiny_config, "--out", str(out),
        )
        assert code == 0
        payload = read_json(out / "placement_single.json")
        assert payload["scene"] == "single"
        assert payload["incomplete"] is False
        assert payload["n_observations"] == 6
        assert len(payload["encoded_best"]) == 10
        assert len(payload["placement"]["cameras"]) == 2
        assert payload["final_simple_regret"] == 1.0 - payload["best_value"]
        assert payload["config"]["bo"]["kernel"] == "matern25"

        lines = (out / "trace_single.csv").read_text().splitlines()
        assert lines[0] == "iteration,phase,observed,running_best,simple_regret"
        assert len(lines) == 1 + 6
        observed = [float(ln.split(",")[2]) for ln in lines[1:]]
        assert payload["best_value"] == max(observed)

    def test_rerun_is_byte_identical(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        argv = ("plan", "--scene", "single", "--seed", "7",
                "--config", tiny_config, "--out", str(out))
        assert run(*argv) == 0
        first = {
            name: (out / name).read_bytes()
            for name in ("placement_single.json", "trace_single.csv")
        }
        assert run(*argv) == 0
        for name, body in first.items():
            assert (out / name).read_bytes() == body

    def test_flags_override_config(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        code = run(
            "plan", "--scene", "single", "--config", tiny_config, "--out", str(out),
            "--cameras", "3", "--init", "3", "--iters", "1", "--candidates", "16",
            "--kernel", "ard",
        )
        assert code == 0
        payload = read_json(out / "placement_single.json")
        assert payload["config"]["bo"]["kernel"] == "ard_rbf"
        assert payload["config"]["bo"]["n_cameras"] == 3
        assert payload["n_observations"] == 4
        assert len(payload["encoded_best"]) == 15

    def test_ply_scene_input(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        assert run(
            "generate-scene", "--scene", "single", "--config", tiny_config, "--out", str(out),
        ) == 0
        code = run(
            "plan", "--scene", str(out / "scene_single.ply"),
            "--config", tiny_config, "--out", str(out),
        )
        assert code == 0
        payload = read_json(out / "placement_scene_single.json")
        assert payload["scene"] == "scene_single"

    def test_smoke_budgets(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        code = run(
            "plan", "--scene", "single", "--config", tiny_config, "--out", str(out),
            "--smoke", "--candidates", "64",
        )
        assert code == 0
        lines = (out / "trace_single.csv").read_text().splitlines()
        assert len(lines) == 1 + 10 + 30


class TestBaseline:
    def test_outputs(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        code = run(
            "baseline", "--scene", "single", "--seed", "4",
            "--config", tiny_config, "--out", str(out), "--candidates", "5",
        )
        assert code == 0
        payload = read_json(out / "baseline_single.json")
        assert len(payload["values"]) == 5
        assert len(payload["radii"]) == 5
        assert len(payload["heights"]) == 5
        assert payload["best_value"] == max(payload["values"])
        assert payload["final_simple_regret"] == 1.0 - payload["best_value"]
        assert len(payload["placement"]["cameras"]) == 2


class TestExperiment:
    def run_small(self, out, tiny_config, *extra):
        return run(
            "experiment", "--scenes", "single", "--kernels", "rbf",
            "--seed", "2", "--config", tiny_config, "--out", str(out), *extra,
        )

    def test_outputs_and_accounting(self, tmp_path, tiny_config, capsys):
        out = tmp_path / "out"
        assert self.run_small(out, tiny_config) == 0

        lines = (out / "single_report.csv").read_text().splitlines()
        assert lines[0] == (
            "scene,kernel,realization,iteration,observed,running_best,simple_regret"
        )
        # 2 realizations x 6 BO rows, plus 2 x 4 baseline candidate rows
        assert len(lines) == 1 + 2 * 6 + 2 * 4
        kernels = {ln.split(",")[1] for ln in lines[1:]}
        assert kernels == {"rbf", "baseline"}

        mean_lines = (out / "single_mean_regret.csv").read_text().splitlines()
        assert mean_lines[0] == "scene,method,iteration,mean_simple_regret"
        assert len(mean_lines) == 1 + 2 * 2

        summary = read_json(out / "single_summary.json")
        assert summary["scene"] == "single"
        assert summary["kernels"] == ["rbf"]
        assert summary["errors"] == {}
        assert len(summary["cells"]) == 2
        assert len(summary["baselines"]) == 2
        assert all(not cell["incomplete"] for cell in summary["cells"])

        console = capsys.readouterr().out
        assert "scene=single cells=4/4" in console
        assert "rbf: mean_final_regret=" in console

    def test_rerun_is_byte_identical(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        assert self.run_small(out, tiny_config) == 0
        first = {
            name: (out / name).read_bytes()
            for name in ("single_report.csv", "single_mean_regret.csv", "single_summary.json")
        }
        assert self.run_small(out, tiny_config) == 0
        for name, body in first.items():
            assert (out / name).read_bytes() == body

    def test_threaded_matches_serial(self, tmp_path, tiny_config, monkeypatch):
        serial_out = tmp_path / "serial"
        assert self.run_small(serial_out, tiny_config) == 0
        monkeypatch.setenv("VIEWPLAN_THREADS", "3")
        threaded_out = tmp_path / "threaded"
        assert self.run_small(threaded_out, tiny_config) == 0
        assert (
            (serial_out / "single_report.csv").read_bytes()
            == (threaded_out / "single_report.csv").read_bytes()
        )

    def test_smoke_single_realization(self, tmp_path, tiny_config):
        out = tmp_path / "out"
        assert self.run_small(out, tiny_config, "--smoke", "--candidates", "32") == 0
        summary = read_json(out / "single_summary.json")
        assert len(summary["cells"]) == 1
        assert summary["config"]["bo"]["n_init"] == 10
        assert summary["config"]["bo"]["n_iters"] == 30


class TestExitCodes:
    def test_no_command_is_usage_error(self, capsys):
        assert run() == 1

    def test_unknown_command(self, capsys):
        assert run("frobnicate") == 1

    def test_bad_flag_value(self, capsys):
        assert run("plan", "--iters", "many") == 1

    def test_bad_kernel_choice(self, capsys):
        assert run("plan", "--kernel", "spline") == 1

    def test_too_few_cameras(self, tmp_path, tiny_config, capsys):
        code = run("plan", "--scene", "single", "--cameras", "1",
                   "--config", tiny_config, "--out", str(tmp_path / "o"))
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_layout_in_experiment(self, tmp_path, tiny_config, capsys):
        code = run("experiment", "--scenes", "hexfield",
                   "--config", tiny_config, "--out", str(tmp_path / "o"))
        assert code == 1

    def test_unknown_kernel_in_experiment(self, tmp_path, tiny_config, capsys):
        code = run("experiment", "--scenes", "single", "--kernels", "rbf,spline",
                   "--config", tiny_config, "--out", str(tmp_path / "o"))
        assert code == 1

    def test_missing_config_file(self, tmp_path, capsys):
        code = run("plan", "--scene", "single",
                   "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o"))
        assert code == 2

    def test_config_not_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        code = run("plan", "--scene", "single", "--config", str(bad),
                   "--out", str(tmp_path / "o"))
        assert code == 1

    def test_config_not_an_object(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        code = run("plan", "--scene", "single", "--config", str(bad),
                   "--out", str(tmp_path / "o"))
        assert code == 1

    def test_malformed_ply_scene(self, tmp_path, tiny_config, capsys):
        bad = tmp_path / "bad.ply"
        bad.write_text("hello\n")
        code = run("plan", "--scene", str(bad),
                   "--config", tiny_config, "--out", str(tmp_path / "o"))
        assert code == 2

    def test_missing_ply_scene(self, tmp_path, tiny_config, capsys):
        code = run("plan", "--scene", str(tmp_path / "ghost.ply"),
                   "--config", tiny_config, "--out", str(tmp_path / "o"))
        assert code == 2

    def test_invalid_thread_env(self, tmp_path, tiny_config, monkeypatch, capsys):
        monkeypatch.setenv("VIEWPLAN_THREADS", "abc")
        code = run("experiment", "--scenes", "single", "--kernels", "rbf",
                   "--config", tiny_config, "--out", str(tmp_path / "o"))
        assert code == 1

    def test_nonpositive_thread_env(self, tmp_path, tiny_config, monkeypatch, capsys):
        monkeypatch.setenv("VIEWPLAN_THREADS", "0")
        code = run("experiment", "--scenes", "single", "--kernels", "rbf",
                   "--config", tiny_config, "--out", str(tmp_path / "o"))
        assert code == 1

    def test_unsupported_noise_kind(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"noise": {"kind": "gaussian"}}))
        code = run("plan", "--scene", "single", "--config", str(cfg),
                   "--out", str(tmp_path / "o"))
        assert code == 1
