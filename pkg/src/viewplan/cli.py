"""Command line front end.

Commands: generate-scene, plan, baseline, experiment. Exit codes: 0 success,
1 usage or configuration problem, 2 file I/O problem, 3 numerical failure.
Outputs always embed the fully resolved configuration, defaults included.
Set VIEWPLAN_THREADS to run experiment cells on that many threads.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import io as vio
from .geometry import SearchSpace, decode
from .gp import KERNEL_FAMILIES, FactorizationError
from .planner import BoConfig, circular_baseline, run_bo, run_experiment
from .reward import RewardParams
from .scene import (
    DEFAULT_SIGMA,
    LAYOUTS,
    NoiseModel,
    SceneSpec,
    apply_noise,
    generate_scene,
    sample_realization,
)

__all__ = ["main", "build_parser"]

_KERNEL_CHOICES = ("rbf", "ard", "ard_rbf", "matern15", "matern25")
_DEFAULT_CAMERAS = {"single": 4, "row3": 6, "grid9": 6}
# Keeps every default scene under 2000 points so a full experiment stays fast.
_DEFAULT_POINTS = {"single": 600, "row3": 500, "grid9": 220}

_DEFAULTS = {
    "scene": {
        "layout": "single",
        "plant_spacing": 1.0,
        "points_per_plant": None,
        "base_height": 1.0,
        "rng_seed": None,
    },
    "noise": {
        "kind": "motion",
        "sigma": DEFAULT_SIGMA,
        "direction": [1.0, 0.0, 0.0],
        "rng_seed": None,
        "shared_draw": False,
    },
    "reward": {"fov": 0.5 * math.pi, "theta_match": 0.25 * math.pi},
    "space": {"lower": [-2.5, -2.5, 0.05], "upper": [2.5, 2.5, 1.2]},
    "bo": {
        "n_cameras": None,
        "n_init": 50,
        "n_iters": 200,
        "kernel": "matern25",
        "rng_seed": 0,
        "af_budget": 2048,
        "refit_every": 0,
        "resample_noise": False,
    },
    "kernels": list(KERNEL_FAMILIES),
    "realizations": 5,
    "baseline_candidates": 50,
    "realization_id": 0,
    "out_dir": "out",
}


class _FileFormatError(Exception):
    """A file exists but cannot be used (bad PLY/JSON payload)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="viewplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p, scene=True):
        p.add_argument("--config", help="JSON config file; flags override it")
        if scene:
            p.add_argument("--scene", help="layout name (single|row3|grid9) or a .ply path")
        p.add_argument("--seed", type=int, help="master seed for the optimizer")
        p.add_argument("--out", help="output directory")

    p_gen = sub.add_parser("generate-scene", help="write a procedural scene to PLY + JSON")
    add_common(p_gen)
    p_gen.set_defaults(func=cmd_generate_scene)

    p_plan = sub.add_parser("plan", help="optimize a camera placement on one noisy cloud")
    add_common(p_plan)
    p_plan.add_argument("--cameras", type=int, help="number of cameras")
    p_plan.add_argument("--kernel", choices=_KERNEL_CHOICES, help="surrogate kernel")
    p_plan.add_argument("--init", type=int, help="initial design size")
    p_plan.add_argument("--iters", type=int, help="sequential iterations")
    p_plan.add_argument("--noise-sigma", type=float, help="motion noise scale, meters")
    p_plan.add_argument("--candidates", type=int, help="acquisition candidate budget")
    p_plan.add_argument("--smoke", action="store_true", help="reduced budgets for a quick check")
    p_plan.set_defaults(func=cmd_plan)

    p_base = sub.add_parser("baseline", help="best-of-n circular formation on one noisy cloud")
    add_common(p_base)
    p_base.add_argument("--cameras", type=int, help="number of cameras")
    p_base.add_argument("--noise-sigma", type=float, help="motion noise scale, meters")
    p_base.add_argument("--candidates", type=int, help="number of circular candidates")
    p_base.set_defaults(func=cmd_baseline)

    p_exp = sub.add_parser("experiment", help="kernel-menu regret comparison over realizations")
    add_common(p_exp, scene=False)
    p_exp.add_argument("--scenes", help="comma-separated layout names", default=None)
    p_exp.add_argument("--cameras", type=int, help="number of cameras (all scenes)")
    p_exp.add_argument("--kernels", help="comma-separated kernel subset", default=None)
    p_exp.add_argument("--init", type=int, help="initial design size")
    p_exp.add_argument("--iters", type=int, help="sequential iterations")
    p_exp.add_argument("--noise-sigma", type=float, help="motion noise scale, meters")
    p_exp.add_argument("--realizations", type=int, help="noise realizations per scene")
    p_exp.add_argument("--candidates", type=int, help="acquisition candidate budget")
    p_exp.add_argument("--smoke", action="store_true", help="reduced budgets for a quick check")
    p_exp.set_defaults(func=cmd_experiment)
    return parser


# -- configuration ---------------------------------------------------------


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_config(args) -> dict:
    cfg = json.loads(json.dumps(_DEFAULTS))
    path = getattr(args, "config", None)
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError:
            raise
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as err:
            raise ValueError(f"config file {path} is not valid JSON: {err}") from None
        if not isinstance(payload, dict):
            raise ValueError(f"config file {path} must contain a JSON object")
        cfg = _merge(cfg, payload)

    def set_if(path_keys, value):
        if value is None:
            return
        node = cfg
        for key in path_keys[:-1]:
            node = node[key]
        node[path_keys[-1]] = value

    set_if(("out_dir",), getattr(args, "out", None))
    set_if(("bo", "rng_seed"), getattr(args, "seed", None))
    set_if(("bo", "n_cameras"), getattr(args, "cameras", None))
    set_if(("bo", "n_init"), getattr(args, "init", None))
    set_if(("bo", "n_iters"), getattr(args, "iters", None))
    set_if(("bo", "af_budget"), getattr(args, "candidates", None))
    set_if(("noise", "sigma"), getattr(args, "noise_sigma", None))
    set_if(("realizations",), getattr(args, "realizations", None))
    kernel = getattr(args, "kernel", None)
    if kernel is not None:
        cfg["bo"]["kernel"] = "ard_rbf" if kernel == "ard" else kernel
    scene = getattr(args, "scene", None)
    if scene is not None:
        if scene in LAYOUTS:
            cfg["scene"]["layout"] = scene
            cfg["scene_path"] = None
        else:
            cfg["scene_path"] = scene
    if getattr(args, "smoke", False):
        cfg["bo"]["n_init"] = 10
        cfg["bo"]["n_iters"] = 30
        cfg["realizations"] = 1
    if getattr(args, "command", "") == "baseline":
        base_candidates = getattr(args, "candidates", None)
        if base_candidates is not None:
            cfg["baseline_candidates"] = base_candidates
    seed = cfg["bo"]["rng_seed"]
    if cfg["scene"]["rng_seed"] is None:
        cfg["scene"]["rng_seed"] = seed + 1000
    if cfg["noise"]["rng_seed"] is None:
        cfg["noise"]["rng_seed"] = seed + 2000
    return cfg


def _typed(cfg: dict, layout: str | None = None):
    scene_cfg = dict(cfg["scene"])
    if layout is not None:
        scene_cfg["layout"] = layout
    if scene_cfg["points_per_plant"] is None:
        scene_cfg["points_per_plant"] = _DEFAULT_POINTS.get(scene_cfg["layout"], 500)
    spec = SceneSpec(
        layout=scene_cfg["layout"],
        plant_spacing=float(scene_cfg["plant_spacing"]),
        points_per_plant=int(scene_cfg["points_per_plant"]),
        base_height=float(scene_cfg["base_height"]),
        rng_seed=int(scene_cfg["rng_seed"]),
    )
    noise = NoiseModel(
        kind=cfg["noise"]["kind"],
        sigma=float(cfg["noise"]["sigma"]),
        direction=tuple(cfg["noise"]["direction"]),
        rng_seed=int(cfg["noise"]["rng_seed"]),
        shared_draw=bool(cfg["noise"]["shared_draw"]),
    )
    params = RewardParams(
        fov=float(cfg["reward"]["fov"]), theta_match=float(cfg["reward"]["theta_match"])
    )
    space = SearchSpace(tuple(cfg["space"]["lower"]), tuple(cfg["space"]["upper"]))
    n_cameras = cfg["bo"]["n_cameras"]
    if n_cameras is None:
        n_cameras = _DEFAULT_CAMERAS.get(spec.layout, 4)
    bo = BoConfig(
        n_cameras=int(n_cameras),
        n_init=int(cfg["bo"]["n_init"]),
        n_iters=int(cfg["bo"]["n_iters"]),
        kernel=cfg["bo"]["kernel"],
        reward_params=params,
        space=space,
        rng_seed=int(cfg["bo"]["rng_seed"]),
        af_budget=int(cfg["bo"]["af_budget"]),
        refit_every=int(cfg["bo"]["refit_every"]),
        resample_noise=bool(cfg["bo"]["resample_noise"]),
    )
    return spec, noise, bo


def _echo(cfg: dict, spec: SceneSpec, noise: NoiseModel, bo: BoConfig) -> dict:
    return {
        "scene": {
            "layout": spec.layout,
            "plant_spacing": spec.plant_spacing,
            "points_per_plant": spec.points_per_plant,
            "base_height": spec.base_height,
            "rng_seed": spec.rng_seed,
        },
        "scene_path": cfg.get("scene_path"),
        "noise": {
            "kind": noise.kind,
            "sigma": noise.sigma,
            "direction": list(noise.direction),
            "rng_seed": noise.rng_seed,
            "shared_draw": noise.shared_draw,
        },
        "reward": {
            "fov": bo.reward_params.fov,
            "theta_match": bo.reward_params.theta_match,
        },
        "space": {"lower": list(bo.space.lower), "upper": list(bo.space.upper)},
        "bo": {
            "n_cameras": bo.n_cameras,
            "n_init": bo.n_init,
            "n_iters": bo.n_iters,
            "kernel": bo.kernel,
            "rng_seed": bo.rng_seed,
            "af_budget": bo.af_budget,
            "refit_every": bo.refit_every,
            "resample_noise": bo.resample_noise,
        },
        "kernels": list(cfg["kernels"]),
        "realizations": cfg["realizations"],
        "baseline_candidates": cfg["baseline_candidates"],
        "realization_id": cfg["realization_id"],
        "out_dir": cfg["out_dir"],
    }


def _scene_cloud(cfg: dict, spec: SceneSpec):
    """(cloud, label): procedural unless a .ply path was configured."""
    path = cfg.get("scene_path")
    if path:
        try:
            sidecar = Path(path).with_suffix(".json")
            ranges = None
            if sidecar.exists():
                ranges = [tuple(r) for r in vio.read_json(sidecar).get("plant_ranges", [])] or None
            return vio.read_ply(path, ranges), Path(path).stem
        except ValueError as err:
            raise _FileFormatError(str(err)) from None
    return generate_scene(spec), spec.layout


def _threads() -> int:
    raw = os.environ.get("VIEWPLAN_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"VIEWPLAN_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError("VIEWPLAN_THREADS must be at least 1")
    return value


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ----------------------------------------------------------------


def cmd_generate_scene(args) -> int:
    cfg = _load_config(args)
    spec, noise, bo = _typed(cfg)
    cloud, label = _scene_cloud(cfg, spec)
    out = _out_dir(cfg)
    ply_path = out / f"scene_{label}.ply"
    vio.write_ply(ply_path, cloud)
    sidecar = {
        "layout": spec.layout,
        "n_points": len(cloud),
        "plant_ranges": [list(r) for r in cloud.plant_ranges],
        "config": _echo(cfg, spec, noise, bo),
    }
    vio.write_json(ply_path.with_suffix(".json"), sidecar)
    print(f"wrote {ply_path} ({len(cloud)} points) and {ply_path.with_suffix('.json')}")
    return 0


def _noisy_cloud(cfg, spec, noise):
    cloud, label = _scene_cloud(cfg, spec)
    realization = sample_realization(noise, cloud, int(cfg["realization_id"]))
    return cloud, apply_noise(cloud, realization), label


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    spec, noise, bo = _typed(cfg)
    clean, noisy, label = _noisy_cloud(cfg, spec, noise)
    trace = run_bo(bo, noisy, clean_cloud=clean, noise_model=noise, meta={"scene": label})
    out = _out_dir(cfg)
    best_vec = trace.best_input()
    placement = decode(best_vec, bo.space)
    payload = {
        "scene": label,
        "best_value": trace.best_value(),
        "final_simple_regret": trace.final_regret(),
        "incomplete": trace.incomplete,
        "n_observations": len(trace),
        "encoded_best": [float(v) for v in best_vec],
        "placement": vio.placement_to_dict(placement),
        "config": _echo(cfg, spec, noise, bo),
    }
    vio.write_json(out / f"placement_{label}.json", payload)
    vio.write_trace_csv(out / f"trace_{label}.csv", trace)
    print(
        f"scene={label} best_value={trace.best_value():.6f} "
        f"final_simple_regret={trace.final_regret():.6f}"
    )
    if trace.incomplete:
        print("warning: run ended early on a numerical failure", file=sys.stderr)
        return 3
    return 0


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    spec, noise, bo = _typed(cfg)
    _, noisy, label = _noisy_cloud(cfg, spec, noise)
    result = circular_baseline(bo, noisy, n_candidates=int(cfg["baseline_candidates"]))
    out = _out_dir(cfg)
    payload = {
        "scene": label,
        "best_value": result.best_value,
        "final_simple_regret": result.final_regret(),
        "values": list(result.values),
        "radii": list(result.radii),
        "heights": list(result.heights),
        "placement": vio.placement_to_dict(result.placement),
        "config": _echo(cfg, spec, noise, bo),
    }
    vio.write_json(out / f"baseline_{label}.json", payload)
    print(
        f"scene={label} best_value={result.best_value:.6f} "
        f"final_simple_regret={result.final_regret():.6f}"
    )
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    scenes = [s.strip() for s in (args.scenes or ",".join(["single", "row3", "grid9"])).split(",") if s.strip()]
    for s in scenes:
        if s not in LAYOUTS:
            raise ValueError(f"unknown layout {s!r}; choose from {LAYOUTS}")
    if args.kernels:
        kernels = []
        for k in (s.strip() for s in args.kernels.split(",")):
            if not k:
                continue
            k = "ard_rbf" if k == "ard" else k
            if k not in KERNEL_FAMILIES:
                raise ValueError(f"unknown kernel {k!r}; choose from {KERNEL_FAMILIES}")
            kernels.append(k)
        cfg["kernels"] = kernels
    workers = _threads()
    out = _out_dir(cfg)

    exit_code = 0
    all_failed = True
    for layout in scenes:
        spec, noise, bo = _typed(cfg, layout=layout)
        cloud, label = _scene_cloud(dict(cfg, scene_path=None), spec)
        report = run_experiment(
            cloud,
            noise,
            bo,
            kernels=tuple(cfg["kernels"]),
            n_realizations=int(cfg["realizations"]),
            n_baseline=int(cfg["baseline_candidates"]),
            scene_label=label,
            max_workers=workers,
        )
        report.config = _echo(cfg, spec, noise, bo)
        vio.write_report_csv(out / f"{label}_report.csv", report)
        vio.write_mean_regret_csv(out / f"{label}_mean_regret.csv", report)
        summary = {
            "scene": label,
            "kernels": list(report.kernels),
            "realizations": report.n_realizations,
            "baseline_mean_regret": report.baseline_mean_regret(),
            "cells": [
                {
                    "kernel": kernel,
                    "realization": rid,
                    "final_simple_regret": trace.final_regret(),
                    "best_value": trace.best_value(),
                    "incomplete": trace.incomplete,
                }
                for (kernel, rid), trace in sorted(report.traces.items())
            ],
            "baselines": [
                {
                    "realization": rid,
                    "best_value": b.best_value,
                    "final_simple_regret": b.final_regret(),
                }
                for rid, b in sorted(report.baselines.items())
            ],
            "errors": dict(sorted(report.errors.items())),
            "config": report.config,
        }
        vio.write_json(out / f"{label}_summary.json", summary)
        done = len(report.traces) + len(report.baselines)
        if done > 0:
            all_failed = False
        print(
            f"scene={label} cells={done}/{report.n_cells()} "
            f"baseline_mean_regret={report.baseline_mean_regret():.6f}"
        )
        for kernel in report.kernels:
            curve = report.mean_bo_regrets(kernel)
            final = curve[-1] if curve.size else float("nan")
            print(f"  {kernel}: mean_final_regret={final:.6f}")
    if all_failed:
        print("error: every experiment cell failed", file=sys.stderr)
        exit_code = 3
    return exit_code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        return args.func(args)
    except (ValueError, NotImplementedError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except _FileFormatError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FactorizationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
