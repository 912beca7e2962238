"""GPR recognition model: parameters -> factorized Gaussian over POD latents.

Because the latent coordinates are mutually uncorrelated over the parameter
distribution, each coordinate gets its own independent single-output GPR.
Targets are standardized per coordinate before fitting (latent scales decay
with the spectrum), and posteriors are mapped back to latent units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gpr
from .dataset import ParameterSet
from .pod import LatentCoords
from .seeding import derive_seed

__all__ = [
    "LatentRecognition",
    "LatentPosterior",
    "RecognitionFitError",
    "fit_recognition",
    "truncated",
    "posterior_at",
    "sample_latents",
]


class RecognitionFitError(RuntimeError):
    """A per-coordinate GPR fit failed; carries the coordinate index."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LatentRecognition:
    """k independent GPRs plus the standardization constants used to fit them."""

    models: tuple[gpr.GprModel, ...]
    latent_shift: np.ndarray
    latent_scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "latent_shift", _frozen(self.latent_shift).reshape(-1))
        object.__setattr__(self, "latent_scale", _frozen(self.latent_scale).reshape(-1))
        k = len(self.models)
        if k < 1:
            raise ValueError("need at least one latent coordinate")
        if self.latent_shift.shape != (k,) or self.latent_scale.shape != (k,):
            raise ValueError("standardization constants must have one entry per coordinate")

    @property
    def k(self) -> int:
        return len(self.models)

    @property
    def param_dim(self) -> int:
        return self.models[0].kernel.dim


@dataclass(frozen=True, eq=False)
class LatentPosterior:
    """Factorized Gaussian over latents at Q query parameters (Q x k each)."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(np.atleast_2d(self.mean)))
        object.__setattr__(self, "variance", _frozen(np.atleast_2d(self.variance)))
        if self.mean.shape != self.variance.shape:
            raise ValueError("mean and variance must have the same shape")
        if (self.variance < 0).any():
            raise ValueError("variances must be nonnegative")

    @property
    def k(self) -> int:
        return self.mean.shape[1]


def fit_recognition(params: ParameterSet, latents: LatentCoords,
                    restarts: int = 5, seed: int = 0) -> LatentRecognition:
    """Fit one GPR per latent coordinate on standardized targets.

    Coordinates are independent; each uses a seed derived from (seed, j) so
    results do not depend on fit order.
    """
    inputs = params.samples
    coords = latents.coords
    if inputs.shape[0] != coords.shape[0]:
        raise ValueError("parameter and latent row counts differ")
    k = coords.shape[1]
    shift = coords.mean(axis=0)
    scale = coords.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    models = []
    for j in range(k):
        targets = (coords[:, j] - shift[j]) / scale[j]
        try:
            models.append(gpr.fit_hyperparameters(
                inputs, targets, restarts=restarts, seed=derive_seed(seed, "latent", j)))
        except (gpr.GprFitError, gpr.FactorizationError) as exc:
            raise RecognitionFitError(f"latent coordinate {j}: {exc}") from exc
    return LatentRecognition(tuple(models), shift, scale)


def truncated(r: LatentRecognition, k: int) -> LatentRecognition:
    """First k coordinate models; identical to fitting with rank k directly."""
    if not 1 <= k <= r.k:
        raise ValueError(f"k must lie in [1, {r.k}]")
    return LatentRecognition(r.models[:k], r.latent_shift[:k], r.latent_scale[:k])


def _query_array(queries) -> np.ndarray:
    samples = getattr(queries, "samples", queries)
    return np.atleast_2d(np.asarray(samples, dtype=np.float64))


def posterior_at(r: LatentRecognition, queries) -> LatentPosterior:
    """De-standardized factorized posterior at the query parameters."""
    q = _query_array(queries)
    if q.shape[1] != r.param_dim:
        raise ValueError(f"queries have dimension {q.shape[1]}, models expect {r.param_dim}")
    mean = np.empty((q.shape[0], r.k))
    var = np.empty_like(mean)
    for j, model in enumerate(r.models):
        mu, sig2 = gpr.predict(model, q)
        mean[:, j] = mu * r.latent_scale[j] + r.latent_shift[j]
        var[:, j] = sig2 * r.latent_scale[j] ** 2
    return LatentPosterior(mean, var)


def sample_latents(p: LatentPosterior, n_samples: int, seed: int) -> np.ndarray:
    """Independent Gaussian draws, shaped (n_samples, Q, k)."""
    if int(n_samples) < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((int(n_samples),) + p.mean.shape)
    return p.mean + np.sqrt(p.variance) * eps
