"""Single-output Gaussian process regression with the ARD squared-exponential kernel.

    kappa(a, b) = sigma_pi^2 exp(-1/2 sum_i (a_i - b_i)^2 / l_i^2)

Hyperparameters (sigma_pi, l_1..l_d, sigma_n) are fitted by maximizing the
log marginal likelihood

    log q(y) = -1/2 y^T K_y^-1 y - 1/2 log det K_y - N/2 log 2pi,
    K_y = K + sigma_n^2 I,

over log-transformed parameters with L-BFGS-B and multiple restarts.  The
gradient uses the trace identity
d/dtheta log q = 1/2 tr((alpha alpha^T - K_y^-1) dK_y/dtheta) with
alpha = K_y^-1 y.

Predictions return the posterior over the latent function: the observation
noise sigma_n^2 is deliberately not added to the returned variances, since
downstream sampling models observation noise separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

__all__ = [
    "ArdSeKernel",
    "GprModel",
    "FactorizationError",
    "GprFitError",
    "kernel_eval",
    "kernel_matrix",
    "build_gpr_model",
    "log_marginal_likelihood",
    "fit_hyperparameters",
    "predict",
]

LOG_2PI = float(np.log(2.0 * np.pi))


class FactorizationError(RuntimeError):
    """K_y stayed non-positive-definite after jitter escalation."""


class GprFitError(RuntimeError):
    """No optimizer restart produced a finite marginal likelihood."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ArdSeKernel:
    signal_sigma: float
    lengthscales: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "signal_sigma", float(self.signal_sigma))
        object.__setattr__(self, "lengthscales", _frozen(np.atleast_1d(self.lengthscales)))
        ok = np.isfinite(self.signal_sigma) and self.signal_sigma > 0
        ok = ok and np.isfinite(self.lengthscales).all() and (self.lengthscales > 0).all()
        if not ok:
            raise ValueError("kernel hyperparameters must be positive and finite")

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]


def kernel_eval(kern: ArdSeKernel, a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape or a.shape[0] != kern.dim:
        raise ValueError("kernel inputs must both have the kernel's dimension")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("kernel inputs must be finite")
    r2 = np.sum(((a - b) / kern.lengthscales) ** 2)
    return float(kern.signal_sigma**2 * np.exp(-0.5 * r2))


def kernel_matrix(kern: ArdSeKernel, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Cross Gram matrix kappa(a_i, b_j); symmetric when b is omitted."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64)) / kern.lengthscales
    if b is None:
        d2 = cdist(a, a, metric="sqeuclidean")
    else:
        b = np.atleast_2d(np.asarray(b, dtype=np.float64)) / kern.lengthscales
        d2 = cdist(a, b, metric="sqeuclidean")
    return kern.signal_sigma**2 * np.exp(-0.5 * d2)


def _chol_jittered(k_y: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky with adaptive diagonal jitter.

    The first attempt is jitter-free; on failure, jitter starts at
    1e-10 * trace / N and escalates tenfold up to three times.
    """
    n = k_y.shape[0]
    base = 1e-10 * np.trace(k_y) / n
    for jitter in (0.0, base, 10 * base, 100 * base, 1000 * base):
        try:
            ell = cholesky(k_y + jitter * np.eye(n), lower=True)
            return ell, jitter
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError("kernel matrix not positive definite after jitter escalation")


@dataclass(frozen=True, eq=False)
class GprModel:
    """Fitted model with the cached factorization of K_y = K + sigma_n^2 I."""

    kernel: ArdSeKernel
    noise_sigma: float
    train_inputs: np.ndarray
    train_targets: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))
        object.__setattr__(self, "train_inputs", _frozen(np.atleast_2d(self.train_inputs)))
        object.__setattr__(self, "train_targets", _frozen(self.train_targets).reshape(-1))
        object.__setattr__(self, "chol", _frozen(self.chol))
        object.__setattr__(self, "alpha", _frozen(self.alpha).reshape(-1))

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[0]


def build_gpr_model(kernel: ArdSeKernel, noise_sigma: float,
                    inputs: np.ndarray, targets: np.ndarray) -> GprModel:
    """Factorize K_y and solve for alpha = K_y^-1 y."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets disagree on the number of points")
    if inputs.shape[1] != kernel.dim:
        raise ValueError("input dimension does not match the kernel")
    k_y = kernel_matrix(kernel, inputs)
    k_y[np.diag_indices_from(k_y)] += float(noise_sigma) ** 2
    ell, _ = _chol_jittered(k_y)
    alpha = cho_solve((ell, True), targets)
    return GprModel(kernel, noise_sigma, inputs, targets, ell, alpha)


def log_marginal_likelihood(m: GprModel) -> float:
    """Gaussian log evidence of the training targets under the fitted model."""
    fit = -0.5 * float(m.train_targets @ m.alpha)
    logdet = float(np.log(np.diag(m.chol)).sum())
    return fit - logdet - 0.5 * m.n_train * LOG_2PI


def _neg_lml_and_grad(theta: np.ndarray, sqdiffs: list[np.ndarray], y: np.ndarray):
    """Negative log ML and gradient w.r.t. log(sigma_pi), log(l_i), log(sigma_n)."""
    n = y.shape[0]
    d = len(sqdiffs)
    sig2 = np.exp(2.0 * theta[0])
    ls2 = np.exp(2.0 * theta[1 : 1 + d])
    noise2 = np.exp(2.0 * theta[1 + d])
    q = np.zeros((n, n))
    for i in range(d):
        q += sqdiffs[i] / ls2[i]
    gram = sig2 * np.exp(-0.5 * q)
    k_y = gram + noise2 * np.eye(n)
    try:
        ell, _ = _chol_jittered(k_y)
    except FactorizationError:
        return np.inf, np.zeros_like(theta)
    alpha = cho_solve((ell, True), y)
    lml = -0.5 * float(y @ alpha) - float(np.log(np.diag(ell)).sum()) - 0.5 * n * LOG_2PI
    k_inv = cho_solve((ell, True), np.eye(n))
    w = np.outer(alpha, alpha) - k_inv
    grad = np.empty_like(theta)
    grad[0] = float(np.sum(w * gram))                       # d/dlog sigma_pi
    for i in range(d):
        grad[1 + i] = 0.5 * float(np.sum(w * gram * (sqdiffs[i] / ls2[i])))
    grad[1 + d] = noise2 * float(np.trace(w))               # d/dlog sigma_n
    return -lml, -grad


def fit_hyperparameters(inputs: np.ndarray, targets: np.ndarray,
                        restarts: int = 5, seed: int = 0,
                        maxiter: int = 200) -> GprModel:
    """Maximize the log marginal likelihood over log hyperparameters.

    Lengthscales start at the per-dimension input range times a multiplier:
    the first three restarts walk the ladder {0.5, 0.1, 1.0} and later ones
    sample per-dimension multipliers from the same set.  The signal scale
    starts at the target standard deviation and the noise at a tenth of it,
    with a noise floor of 1e-6 times the target standard deviation.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    n, d = inputs.shape
    if n < 2:
        raise ValueError("need at least two training points")
    if targets.shape[0] != n:
        raise ValueError("inputs and targets disagree on the number of points")
    if int(restarts) < 1:
        raise ValueError("restarts must be at least 1")

    y_std = float(targets.std())
    scale_ref = y_std if y_std > 0 else 1.0
    ranges = inputs.max(axis=0) - inputs.min(axis=0)
    ranges[ranges <= 0] = 1.0
    noise_floor = max(1e-6 * y_std, 1e-12)

    sqdiffs = [(inputs[:, i][:, None] - inputs[None, :, i]) ** 2 for i in range(d)]
    bounds = (
        [(np.log(1e-6 * scale_ref), np.log(1e3 * scale_ref))]
        + [(np.log(1e-3 * r), np.log(1e4 * r)) for r in ranges]
        + [(np.log(noise_floor), np.log(1e2 * scale_ref))]
    )

    rng = np.random.default_rng(seed)
    best_theta, best_obj = None, np.inf
    ladder = (0.5, 0.1, 1.0)
    for restart in range(int(restarts)):
        # deterministic multiplier ladder first, sampled multipliers after
        if restart < len(ladder):
            mult = np.full(d, ladder[restart])
        else:
            mult = rng.choice([0.1, 0.5, 1.0], size=d)
        theta0 = np.concatenate([
            [np.log(scale_ref)],
            np.log(ranges * mult),
            [np.log(max(0.1 * scale_ref, noise_floor))],
        ])
        theta0 = np.clip(theta0, [b[0] for b in bounds], [b[1] for b in bounds])
        try:
            res = minimize(_neg_lml_and_grad, theta0, args=(sqdiffs, targets),
                           jac=True, method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": maxiter})
        except (np.linalg.LinAlgError, FactorizationError):
            continue
        if np.isfinite(res.fun) and res.fun < best_obj:
            best_obj, best_theta = float(res.fun), res.x.copy()
    if best_theta is None:
        raise GprFitError("all restarts failed to produce a finite objective")

    sigma = float(np.exp(best_theta[0]))
    lengthscales = np.exp(best_theta[1 : 1 + d])
    noise = float(np.exp(best_theta[1 + d]))
    return build_gpr_model(ArdSeKernel(sigma, lengthscales), noise, inputs, targets)


def predict(m: GprModel, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent-function variance at the query points.

    mean = kappa^T K_y^-1 y and var = sigma_pi^2 - kappa^T K_y^-1 kappa,
    clipped at zero.  Observation noise is not added.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != m.kernel.dim:
        raise ValueError("query dimension does not match the kernel")
    k_cross = kernel_matrix(m.kernel, m.train_inputs, queries)
    means = k_cross.T @ m.alpha
    v = solve_triangular(m.chol, k_cross, lower=True)
    variances = m.kernel.signal_sigma**2 - np.sum(v**2, axis=0)
    return means, np.clip(variances, 0.0, None)
