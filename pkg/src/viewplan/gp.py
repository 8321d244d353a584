"""Gaussian process surrogate: kernels, exact inference, likelihood fitting.

Inference follows the standard Cholesky route. Targets are optionally
standardized to zero mean / unit variance before factorization; the
transform is recorded at construction and inverted on prediction, and it is
deliberately frozen when later observations are appended so the fitted
hyperparameters keep their meaning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

__all__ = [
    "KERNEL_FAMILIES",
    "KernelSpec",
    "Posterior",
    "GpModel",
    "FactorizationError",
    "kernel_eval",
    "kernel_matrix",
]

KERNEL_FAMILIES = ("rbf", "ard_rbf", "matern15", "matern25")

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)
_JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

# Bounds for likelihood fitting, assuming unit-cube inputs and
# standardized outputs.
_LS_BOUNDS = (1e-3, 10.0)
_VAR_BOUNDS = (1e-4, 10.0)
_NOISE_BOUNDS = (1e-8, 1.0)


class FactorizationError(RuntimeError):
    """Kernel matrix stayed non positive definite through jitter escalation."""

    def __init__(self, jitter: float):
        super().__init__(f"Cholesky factorization failed at jitter {jitter:g}")
        self.jitter = jitter


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance: family name, signal variance, lengthscale(s).

    ``lengthscales`` is a scalar for isotropic families or a per-dimension
    vector for ``ard_rbf``.
    """

    family: str
    output_variance: float = 1.0
    lengthscales: Union[float, np.ndarray] = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (self.output_variance > 0.0 and math.isfinite(self.output_variance)):
            raise ValueError("output_variance must be positive and finite")
        ls = np.asarray(self.lengthscales, dtype=float)
        if ls.ndim > 1 or not np.all(np.isfinite(ls)) or not np.all(ls > 0.0):
            raise ValueError("lengthscales must be positive and finite")
        if ls.ndim == 0:
            object.__setattr__(self, "lengthscales", float(ls))
        else:
            object.__setattr__(self, "lengthscales", ls.copy())

    def lengthscale_vector(self, dim: int) -> np.ndarray:
        ls = np.asarray(self.lengthscales, dtype=float)
        if ls.ndim == 0:
            return np.full(dim, float(ls))
        if ls.size != dim:
            raise ValueError("lengthscale vector does not match input dimension")
        return ls


def _scaled_sqdist(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ls = spec.lengthscale_vector(a.shape[1])
    return cdist(a / ls, b / ls, metric="sqeuclidean")


def kernel_matrix(spec: KernelSpec, a, b=None) -> np.ndarray:
    """Cross-covariance matrix between two sets of row-vector inputs."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    d2 = np.maximum(_scaled_sqdist(spec, a, b), 0.0)
    if spec.family in ("rbf", "ard_rbf"):
        return spec.output_variance * np.exp(-0.5 * d2)
    d = np.sqrt(d2)
    if spec.family == "matern15":
        return spec.output_variance * (1.0 + _SQRT3 * d) * np.exp(-_SQRT3 * d)
    return spec.output_variance * (1.0 + _SQRT5 * d + (5.0 / 3.0) * d2) * np.exp(-_SQRT5 * d)


def kernel_eval(spec: KernelSpec, a, b) -> float:
    """Covariance between two single inputs."""
    a = np.asarray(a, dtype=float).reshape(1, -1)
    b = np.asarray(b, dtype=float).reshape(1, -1)
    return float(kernel_matrix(spec, a, b)[0, 0])


def _chol_with_jitter(k: np.ndarray):
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    eye = np.eye(k.shape[0])
    last = 0.0
    for jitter in _JITTERS:
        last = jitter
        try:
            return cholesky(k + jitter * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(last)


@dataclass(frozen=True)
class Posterior:
    """Predictive mean and (nonnegative) variance at one input."""

    mean: float
    variance: float

    @property
    def stddev(self) -> float:
        return math.sqrt(self.variance)


class GpModel:
    """Exact GP regressor with fixed hyperparameters once constructed.

    A constructed model is immutable from the reader's point of view:
    posterior queries are pure. :meth:`add_observation` refactorizes from
    scratch and must not race with concurrent queries.
    """

    def __init__(
        self,
        kernel: KernelSpec,
        noise_variance: float,
        inputs,
        targets,
        standardize: bool = True,
    ):
        if noise_variance < 0.0 or not math.isfinite(noise_variance):
            raise ValueError("noise_variance must be nonnegative and finite")
        z = np.atleast_2d(np.asarray(inputs, dtype=float))
        y = np.asarray(targets, dtype=float).reshape(-1)
        if z.shape[0] != y.shape[0]:
            raise ValueError("inputs and targets disagree on sample count")
        if z.shape[0] < 1:
            raise ValueError("need at least one observation")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
            raise ValueError("inputs and targets must be finite")
        self.kernel = kernel
        self.noise_variance = float(noise_variance)
        self.standardize = bool(standardize)
        if standardize:
            self._y_mean = float(y.mean())
            scale = float(y.std())
            self._y_scale = scale if scale > 1e-12 else 1.0
        else:
            self._y_mean = 0.0
            self._y_scale = 1.0
        self._z = z.copy()
        self._y = y.copy()
        self._refactor()

    # -- factorization ---------------------------------------------------

    def _refactor(self) -> None:
        k = kernel_matrix(self.kernel, self._z)
        k[np.diag_indices_from(k)] += self.noise_variance
        self._chol, self.jitter = _chol_with_jitter(k)
        self._alpha = cho_solve((self._chol, True), self._y_working)

    @property
    def _y_working(self) -> np.ndarray:
        return (self._y - self._y_mean) / self._y_scale

    # -- views -----------------------------------------------------------

    @property
    def inputs(self) -> np.ndarray:
        return self._z.copy()

    @property
    def targets(self) -> np.ndarray:
        return self._y.copy()

    @property
    def dim(self) -> int:
        return int(self._z.shape[1])

    @property
    def n_train(self) -> int:
        return int(self._z.shape[0])

    @property
    def y_mean(self) -> float:
        return self._y_mean

    @property
    def y_scale(self) -> float:
        return self._y_scale

    # -- inference -------------------------------------------------------

    def posterior_batch(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Predictive means and variances (original target scale) at rows of z."""
        zq = np.atleast_2d(np.asarray(z, dtype=float))
        if zq.shape[1] != self.dim:
            raise ValueError("query dimension does not match training inputs")
        ks = kernel_matrix(self.kernel, self._z, zq)
        mean_w = ks.T @ self._alpha
        v = solve_triangular(self._chol, ks, lower=True)
        var_w = self.kernel.output_variance - np.einsum("ij,ij->j", v, v)
        var_w = np.maximum(var_w, 0.0)
        mean = self._y_mean + self._y_scale * mean_w
        var = (self._y_scale**2) * var_w
        return mean, var

    def posterior(self, z) -> Posterior:
        mean, var = self.posterior_batch(np.asarray(z, dtype=float).reshape(1, -1))
        return Posterior(float(mean[0]), float(var[0]))

    def log_marginal_likelihood(self) -> float:
        """Exact data log likelihood on the working (standardized) scale."""
        yw = self._y_working
        t = yw.shape[0]
        return float(
            -0.5 * float(yw @ self._alpha)
            - float(np.sum(np.log(np.diag(self._chol))))
            - 0.5 * t * math.log(2.0 * math.pi)
        )

    def add_observation(self, z, y: float) -> None:
        """Append one observation and refactorize.

        Hyperparameters stay frozen, but the output standardization is
        recomputed over the full target vector: the initial design often
        spans a far narrower value range than what optimization later finds,
        and a transform frozen there would push new observations hundreds of
        working standard deviations out, collapsing every downstream
        improvement computation to zero.
        """
        zq = np.asarray(z, dtype=float).reshape(1, -1)
        if zq.shape[1] != self.dim:
            raise ValueError("observation dimension does not match training inputs")
        if not math.isfinite(float(y)):
            raise ValueError("target must be finite")
        self._z = np.vstack([self._z, zq])
        self._y = np.append(self._y, float(y))
        if self.standardize:
            self._y_mean = float(self._y.mean())
            scale = float(self._y.std())
            self._y_scale = scale if scale > 1e-12 else 1.0
        self._refactor()

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        ls = self.kernel.lengthscales
        return {
            "kernel": {
                "family": self.kernel.family,
                "output_variance": self.kernel.output_variance,
                "lengthscales": ls.tolist() if isinstance(ls, np.ndarray) else ls,
            },
            "noise_variance": self.noise_variance,
            "standardize": self.standardize,
            "inputs": self._z.tolist(),
            "targets": self._y.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GpModel":
        kern = payload["kernel"]
        ls = kern["lengthscales"]
        spec = KernelSpec(
            kern["family"],
            float(kern["output_variance"]),
            np.asarray(ls, dtype=float) if isinstance(ls, list) else float(ls),
        )
        return cls(
            spec,
            float(payload["noise_variance"]),
            np.asarray(payload["inputs"], dtype=float),
            np.asarray(payload["targets"], dtype=float),
            standardize=bool(payload["standardize"]),
        )

    # -- fitting ---------------------------------------------------------

    @classmethod
    def fit(
        cls,
        inputs,
        targets,
        family: str = "matern25",
        seed: int = 0,
        n_starts: int = 8,
        standardize: bool = True,
    ) -> "GpModel":
        """Maximum-likelihood hyperparameters via multi-start bounded L-BFGS.

        The optimization runs in log space with analytic gradients. The
        returned model's likelihood is at least the likelihood at every
        start point.
        """
        if family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {family!r}")
        z = np.atleast_2d(np.asarray(inputs, dtype=float))
        y = np.asarray(targets, dtype=float).reshape(-1)
        if z.shape[0] != y.shape[0] or z.shape[0] < 2:
            raise ValueError("fitting needs at least two (input, target) pairs")
        dim = z.shape[1]
        n_ls = dim if family == "ard_rbf" else 1

        if standardize:
            y_mean = float(y.mean())
            scale = float(y.std())
            y_scale = scale if scale > 1e-12 else 1.0
        else:
            y_mean, y_scale = 0.0, 1.0
        yw = (y - y_mean) / y_scale

        bounds = (
            [tuple(np.log(_LS_BOUNDS))] * n_ls
            + [tuple(np.log(_VAR_BOUNDS))]
            + [tuple(np.log(_NOISE_BOUNDS))]
        )
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])

        starts = _fit_starts(n_ls, n_starts, seed, lo, hi)

        def objective(theta: np.ndarray):
            value, grad = _mll_and_grad(theta, z, yw, family, n_ls)
            return -value, -grad

        candidates = []
        for theta0 in starts:
            v0, _ = objective(theta0)
            if math.isfinite(v0):
                candidates.append((-v0, theta0))
            res = minimize(
                objective,
                theta0,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": 200, "ftol": 1e-12, "gtol": 1e-8},
            )
            if math.isfinite(res.fun):
                candidates.append((-res.fun, res.x))
        if not candidates:
            raise FactorizationError(_JITTERS[-1])

        best_mll, best_theta = max(candidates, key=lambda c: c[0])
        ls = np.exp(best_theta[:n_ls])
        spec = KernelSpec(
            family,
            float(np.exp(best_theta[n_ls])),
            ls if n_ls > 1 else float(ls[0]),
        )
        return cls(spec, float(np.exp(best_theta[n_ls + 1])), z, y, standardize=standardize)


def _fit_starts(n_ls: int, n_starts: int, seed, lo: np.ndarray, hi: np.ndarray):
    """Deterministic multi-start points in log-hyperparameter space."""
    rng = np.random.default_rng(seed)
    starts = [np.concatenate([np.full(n_ls, math.log(0.5)), [0.0, math.log(1e-2)]])]
    while len(starts) < n_starts:
        starts.append(rng.uniform(lo, hi))
    return starts


def _mll_and_grad(theta: np.ndarray, z: np.ndarray, yw: np.ndarray, family: str, n_ls: int):
    """Log marginal likelihood and its gradient w.r.t. log hyperparameters."""
    t, dim = z.shape
    ls = np.exp(theta[:n_ls])
    out_var = float(np.exp(theta[n_ls]))
    noise_var = float(np.exp(theta[n_ls + 1]))
    spec = KernelSpec(family, out_var, ls if n_ls > 1 else float(ls[0]))

    d2 = np.maximum(_scaled_sqdist(spec, z, z), 0.0)
    if family in ("rbf", "ard_rbf"):
        kf = out_var * np.exp(-0.5 * d2)
    elif family == "matern15":
        d = np.sqrt(d2)
        kf = out_var * (1.0 + _SQRT3 * d) * np.exp(-_SQRT3 * d)
    else:
        d = np.sqrt(d2)
        kf = out_var * (1.0 + _SQRT5 * d + (5.0 / 3.0) * d2) * np.exp(-_SQRT5 * d)

    k = kf + noise_var * np.eye(t)
    try:
        chol, _ = _chol_with_jitter(k)
    except FactorizationError:
        return -np.inf, np.zeros_like(theta)
    alpha = cho_solve((chol, True), yw)
    mll = (
        -0.5 * float(yw @ alpha)
        - float(np.sum(np.log(np.diag(chol))))
        - 0.5 * t * math.log(2.0 * math.pi)
    )

    # d(mll)/d(theta_j) = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta_j)
    k_inv = cho_solve((chol, True), np.eye(t))
    a = np.outer(alpha, alpha) - k_inv

    grad = np.empty_like(theta)
    if family == "ard_rbf":
        for j in range(dim):
            diff_j = (z[:, j : j + 1] - z[:, j : j + 1].T) / ls[j]
            grad[j] = 0.5 * float(np.sum(a * (kf * diff_j**2)))
    elif family in ("rbf",):
        grad[0] = 0.5 * float(np.sum(a * (kf * d2)))
    elif family == "matern15":
        dk = out_var * 3.0 * d2 * np.exp(-_SQRT3 * d)
        grad[0] = 0.5 * float(np.sum(a * dk))
    else:
        dk = out_var * (5.0 / 3.0) * d2 * (1.0 + _SQRT5 * d) * np.exp(-_SQRT5 * d)
        grad[0] = 0.5 * float(np.sum(a * dk))
    grad[n_ls] = 0.5 * float(np.sum(a * kf))
    grad[n_ls + 1] = 0.5 * noise_var * float(np.trace(a))
    return mll, grad
