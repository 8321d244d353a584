"""Optimization loop, circular baseline, and the regret experiment grid."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .acquisition import EiState, maximize_ei
from .geometry import CameraPose, Placement, Point3, PointCloud, SearchSpace, decode
from .gp import KERNEL_FAMILIES, FactorizationError, GpModel
from .reward import RewardParams, noisy_reward
from .scene import NoiseModel, sample_realization, apply_noise

__all__ = [
    "OPTIMUM_VALUE",
    "BoConfig",
    "RegretTrace",
    "BaselineResult",
    "ExperimentReport",
    "simple_regret",
    "init_design",
    "run_bo",
    "circular_baseline",
    "run_experiment",
]

# Regret reference: rewards live in [0, 1], so 1 upper-bounds any placement's
# value and gives a scene-independent target shared by all methods.
OPTIMUM_VALUE = 1.0

_EVAL_RETRIES = 100


@dataclass(frozen=True)
class BoConfig:
    """Everything one optimization run depends on besides the cloud itself."""

    n_cameras: int
    n_init: int = 50
    n_iters: int = 200
    kernel: str = "matern25"
    reward_params: RewardParams = field(default_factory=RewardParams)
    space: SearchSpace = field(default_factory=SearchSpace.default)
    rng_seed: int = 0
    af_budget: int = 2048
    refit_every: int = 0
    resample_noise: bool = False

    def __post_init__(self):
        if self.n_cameras < 2:
            raise ValueError("n_cameras must be at least 2")
        if self.n_init < 1:
            raise ValueError("n_init must be at least 1")
        if self.n_iters < 0:
            raise ValueError("n_iters must be nonnegative")
        if self.kernel not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from {KERNEL_FAMILIES}")
        if self.af_budget < 1:
            raise ValueError("af_budget must be at least 1")
        if self.refit_every < 0:
            raise ValueError("refit_every must be nonnegative")

    def dim(self) -> int:
        return 5 * self.n_cameras


def simple_regret(value: float, optimum: float = OPTIMUM_VALUE) -> float:
    """Gap between the reference optimum and an achieved value."""
    return optimum - value


@dataclass
class RegretTrace:
    """Observation-by-observation record of one optimization run.

    The first ``n_init`` entries are the space-filling design, the rest the
    sequential queries. ``incomplete`` marks runs cut short by a surrogate
    factorization failure.
    """

    inputs: list
    observed: list
    n_init: int
    meta: dict = field(default_factory=dict)
    incomplete: bool = False
    optimum: float = OPTIMUM_VALUE

    def __len__(self) -> int:
        return len(self.observed)

    def running_best(self) -> np.ndarray:
        return np.maximum.accumulate(np.asarray(self.observed, dtype=float))

    def regrets(self) -> np.ndarray:
        return self.optimum - self.running_best()

    def bo_regrets(self) -> np.ndarray:
        """Regret after each sequential query (design rows excluded)."""
        return self.regrets()[self.n_init :]

    def best_value(self) -> float:
        return float(self.running_best()[-1])

    def final_regret(self) -> float:
        return float(self.regrets()[-1])

    def best_input(self) -> np.ndarray:
        idx = int(np.argmax(np.asarray(self.observed)))
        return np.asarray(self.inputs[idx], dtype=float)

    def rows(self):
        """(iteration, phase, observed, running_best, simple_regret) tuples."""
        best = self.running_best()
        for t, value in enumerate(self.observed):
            phase = "init" if t < self.n_init else "bo"
            yield (t + 1, phase, float(value), float(best[t]), float(self.optimum - best[t]))


@dataclass(frozen=True)
class BaselineResult:
    """Best-of-n circular formation on one noisy cloud."""

    placement: Placement
    best_value: float
    values: Tuple[float, ...]
    radii: Tuple[float, ...]
    heights: Tuple[float, ...]

    def final_regret(self) -> float:
        return simple_regret(self.best_value)

    def rows(self):
        best = np.maximum.accumulate(np.asarray(self.values, dtype=float))
        for t, value in enumerate(self.values):
            yield (t + 1, "baseline", float(value), float(best[t]), simple_regret(float(best[t])))


class _Objective:
    """Noisy reward evaluator with the configured noise handling."""

    def __init__(self, config: BoConfig, cloud: PointCloud,
                 clean_cloud: Optional[PointCloud], noise_model: Optional[NoiseModel]):
        self.config = config
        self.cloud = cloud
        self.clean_cloud = clean_cloud
        self.noise_model = noise_model
        self.eval_count = 0
        if config.resample_noise and (clean_cloud is None or noise_model is None):
            raise ValueError("resample_noise requires clean_cloud and noise_model")

    def __call__(self, vec: np.ndarray) -> float:
        if self.config.resample_noise:
            realization = sample_realization(self.noise_model, self.clean_cloud, self.eval_count)
            cloud = apply_noise(self.clean_cloud, realization)
        else:
            cloud = self.cloud
        self.eval_count += 1
        placement = decode(vec, self.config.space)
        return noisy_reward(placement, cloud, self.config.reward_params)


def _nudged(vec: np.ndarray, attempt: int, rng: np.random.Generator) -> np.ndarray:
    return np.clip(vec + rng.uniform(-1e-8, 1e-8, vec.shape) * (attempt + 1), 0.0, 1.0)


def init_design(config: BoConfig, cloud: PointCloud,
                objective: Optional[_Objective] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform seeded design on the unit cube with its observed values.

    Points whose decoded placement collides with a scene point are redrawn,
    up to 100 times each.
    """
    obj = objective or _Objective(config, cloud, None, None)
    ss = np.random.SeedSequence(config.rng_seed, spawn_key=(0,))
    rng = np.random.default_rng(ss)
    d = config.dim()
    zs = np.empty((config.n_init, d))
    ys = np.empty(config.n_init)
    for k in range(config.n_init):
        last_err = None
        for _ in range(_EVAL_RETRIES):
            vec = rng.uniform(0.0, 1.0, d)
            try:
                ys[k] = obj(vec)
                zs[k] = vec
                last_err = None
                break
            except ValueError as err:
                last_err = err
        if last_err is not None:
            raise last_err
    return zs, ys


def run_bo(
    config: BoConfig,
    cloud: PointCloud,
    clean_cloud: Optional[PointCloud] = None,
    noise_model: Optional[NoiseModel] = None,
    meta: Optional[dict] = None,
) -> RegretTrace:
    """Sequential surrogate optimization of the noisy reward.

    Hyperparameters are fitted once on the initial design (optionally
    refreshed every ``refit_every`` queries) and frozen in between. A
    factorization failure ends the run early with the trace flagged
    incomplete rather than raising.
    """
    objective = _Objective(config, cloud, clean_cloud, noise_model)
    zs, ys = init_design(config, cloud, objective)
    trace = RegretTrace(
        inputs=[z.copy() for z in zs],
        observed=[float(v) for v in ys],
        n_init=config.n_init,
        meta=dict(meta or {}, kernel=config.kernel, rng_seed=config.rng_seed),
    )

    fit_seed = np.random.SeedSequence(config.rng_seed, spawn_key=(1,))
    af_rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(2,)))
    af_seeds = af_rng.integers(0, 2**31 - 1, size=max(config.n_iters, 1))
    nudge_rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(3,)))

    try:
        model = GpModel.fit(zs, ys, family=config.kernel, seed=fit_seed)
    except FactorizationError:
        trace.incomplete = True
        return trace

    for t in range(config.n_iters):
        try:
            if config.refit_every and t > 0 and t % config.refit_every == 0:
                model = GpModel.fit(
                    np.asarray(trace.inputs), np.asarray(trace.observed),
                    family=config.kernel, seed=fit_seed,
                )
            state = EiState.from_model(model)
            vec = maximize_ei(state, budget=config.af_budget, rng_seed=int(af_seeds[t]))
            value = None
            for attempt in range(_EVAL_RETRIES):
                try:
                    value = objective(vec)
                    break
                except ValueError:
                    vec = _nudged(vec, attempt, nudge_rng)
            if value is None:
                raise ValueError("could not evaluate the suggested placement")
            model.add_observation(vec, value)
        except FactorizationError:
            trace.incomplete = True
            break
        trace.inputs.append(vec.copy())
        trace.observed.append(float(value))
    return trace


def circular_baseline(config: BoConfig, cloud: PointCloud, n_candidates: int = 50) -> BaselineResult:
    """Best of ``n_candidates`` centroid-facing circular formations.

    Each candidate spreads the cameras evenly on a horizontal circle that
    surrounds the cloud, sampling the radius uniformly between the cloud's
    enclosing horizontal radius and the box half-extent and the height
    uniformly over the box's vertical range; circles that leave the box are
    resampled.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(0xBA5E,)))
    centroid = cloud.centroid()
    lo = np.array(config.space.lower)
    hi = np.array(config.space.upper)
    r_cap = 0.5 * min(hi[0] - lo[0], hi[1] - lo[1])
    r_enclose = float(
        np.hypot(cloud.points[:, 0] - centroid[0], cloud.points[:, 1] - centroid[1]).max()
    )
    if r_enclose >= r_cap:
        raise ValueError("search box cannot hold a formation surrounding the cloud")
    angles = 2.0 * math.pi * np.arange(config.n_cameras) / config.n_cameras

    values, radii, heights = [], [], []
    best_value, best_placement = -math.inf, None
    for _ in range(n_candidates):
        placement = None
        for _ in range(1000):
            radius = rng.uniform(r_enclose, r_cap)
            height = rng.uniform(lo[2], hi[2])
            xs = centroid[0] + radius * np.cos(angles)
            ys = centroid[1] + radius * np.sin(angles)
            if np.any(xs < lo[0]) or np.any(xs > hi[0]) or np.any(ys < lo[1]) or np.any(ys > hi[1]):
                continue
            try:
                cams = tuple(
                    CameraPose.looking_at((x, y, height), centroid) for x, y in zip(xs, ys)
                )
                value = noisy_reward(Placement(cams), cloud, config.reward_params)
            except ValueError:
                continue
            placement = Placement(cams)
            break
        if placement is None:
            raise ValueError("could not sample an in-box circular candidate")
        values.append(value)
        radii.append(radius)
        heights.append(height)
        if value > best_value:
            best_value, best_placement = value, placement
    return BaselineResult(
        placement=best_placement,
        best_value=float(best_value),
        values=tuple(float(v) for v in values),
        radii=tuple(float(r) for r in radii),
        heights=tuple(float(h) for h in heights),
    )


@dataclass
class ExperimentReport:
    """Traces and baselines for a (kernel x realization) grid on one scene."""

    scene_label: str
    kernels: Tuple[str, ...]
    n_realizations: int
    n_iters: int
    traces: Dict[Tuple[str, int], RegretTrace] = field(default_factory=dict)
    baselines: Dict[int, BaselineResult] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def mean_bo_regrets(self, kernel: str) -> np.ndarray:
        """Mean regret per sequential iteration across complete realizations."""
        curves = [
            tr.bo_regrets()
            for (k, _), tr in sorted(self.traces.items())
            if k == kernel and not tr.incomplete
        ]
        if not curves:
            return np.full(self.n_iters, np.nan)
        return np.mean(np.stack(curves), axis=0)

    def baseline_mean_regret(self) -> float:
        if not self.baselines:
            return float("nan")
        return float(np.mean([b.final_regret() for b in self.baselines.values()]))

    def n_failed(self) -> int:
        return len(self.errors)

    def n_cells(self) -> int:
        return len(self.kernels) * self.n_realizations + self.n_realizations


def _cell_seed(master: int, spawn_key: Tuple[int, ...]) -> int:
    return int(np.random.SeedSequence(master, spawn_key=spawn_key).generate_state(1)[0])


def run_experiment(
    scene_cloud: PointCloud,
    noise_model: NoiseModel,
    base_config: BoConfig,
    kernels: Sequence[str] = KERNEL_FAMILIES,
    n_realizations: int = 5,
    n_baseline: int = 50,
    scene_label: str = "scene",
    max_workers: int = 1,
) -> ExperimentReport:
    """Paired regret comparison over noise realizations and kernels.

    Every method (and the baseline) sees the identical noisy cloud within a
    realization. The whole grid is a pure function of the seeds in
    ``base_config``, ``noise_model`` and the scene itself; cells run
    independently, optionally across ``max_workers`` threads, and one
    failing cell only annotates the report.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be at least 1")
    for k in kernels:
        if k not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel {k!r}")
    report = ExperimentReport(
        scene_label=scene_label,
        kernels=tuple(kernels),
        n_realizations=n_realizations,
        n_iters=base_config.n_iters,
    )

    noisy_clouds = {
        rid: apply_noise(scene_cloud, sample_realization(noise_model, scene_cloud, rid))
        for rid in range(n_realizations)
    }
    master = base_config.rng_seed

    def bo_cell(kernel_idx: int, rid: int):
        kernel = report.kernels[kernel_idx]
        cfg = replace(base_config, kernel=kernel, rng_seed=_cell_seed(master, (1, kernel_idx, rid)))
        return run_bo(
            cfg,
            noisy_clouds[rid],
            clean_cloud=scene_cloud if cfg.resample_noise else None,
            noise_model=noise_model if cfg.resample_noise else None,
            meta={"scene": scene_label, "realization": rid},
        )

    def baseline_cell(rid: int):
        cfg = replace(base_config, rng_seed=_cell_seed(master, (2, rid)))
        return circular_baseline(cfg, noisy_clouds[rid], n_candidates=n_baseline)

    tasks = []
    for kernel_idx in range(len(report.kernels)):
        for rid in range(n_realizations):
            tasks.append(("bo", kernel_idx, rid))
    for rid in range(n_realizations):
        tasks.append(("baseline", rid))

    def run_task(task):
        if task[0] == "bo":
            return bo_cell(task[1], task[2])
        return baseline_cell(task[1])

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(lambda t: _safe(run_task, t), tasks))
    else:
        outcomes = [_safe(run_task, t) for t in tasks]

    for task, (result, error) in zip(tasks, outcomes):
        if task[0] == "bo":
            label = f"{report.kernels[task[1]]}/r{task[2]}"
            if error is not None:
                report.errors[label] = error
            else:
                report.traces[(report.kernels[task[1]], task[2])] = result
                if result.incomplete:
                    report.errors[label] = "incomplete: surrogate factorization failed"
        else:
            label = f"baseline/r{task[1]}"
            if error is not None:
                report.errors[label] = error
            else:
                report.baselines[task[1]] = result
    return report


def _safe(fn, task):
    try:
        return fn(task), None
    except Exception as err:  # cell isolation: record, keep the grid running
        return None, f"{type(err).__name__}: {err}"
