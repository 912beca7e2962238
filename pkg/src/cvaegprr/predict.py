"""End-to-end prediction with Monte-Carlo uncertainty quantification.

For each query parameter, latent samples from the recognition posterior are
pushed through the likelihood network; the predictive mean is the sample
average of the network means and the predictive variance follows the law of
total variance,

    Var = E[sigma^2 + mu^2] - (E mu)^2,

clipped at zero against roundoff.  Two baselines are provided: the
GPR-based ROM that decodes posterior latent means through the basis, and
the discrete (field-head) likelihood model bound to the training grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import liknet
from .dataset import ParameterSet, PhysicalGrid, SnapshotSet, write_snapshots
from .pod import PodBasis, reconstruct
from .recognition import LatentRecognition, posterior_at, sample_latents

__all__ = [
    "PredictiveDistribution",
    "predict_cvae_gprr",
    "predict_discrete",
    "predict_gpr_rom",
    "relative_test_mean_error",
    "write_prediction",
]

_CHUNK_ROWS = 32768


@dataclass(frozen=True, eq=False)
class PredictiveDistribution:
    """Per-query mean and total variance fields (Q queries x P points)."""

    mean: np.ndarray
    variance: np.ndarray
    n_latent_samples: int

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.variance, dtype=np.float64))
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)
        if mean.shape != var.shape:
            raise ValueError("mean and variance shapes differ")
        if (var < 0).any():
            raise ValueError("variances must be nonnegative")

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def _net_moments(net: liknet.LikelihoodNet, feats: np.ndarray):
    """Scalar-head means and variances in original units, chunked."""
    mu = np.empty(feats.shape[0])
    s2 = np.empty(feats.shape[0])
    scaled = net.scaler.apply(feats) if net.scaler is not None else feats
    for start in range(0, feats.shape[0], _CHUNK_ROWS):
        out = liknet.raw_outputs(net, scaled[start : start + _CHUNK_ROWS])
        mu[start : start + _CHUNK_ROWS] = out[:, 0]
        s2[start : start + _CHUNK_ROWS] = liknet.softplus(out[:, 1])
    ts = net.target_scale
    return mu * ts + net.target_shift, s2 * ts**2


def predict_cvae_gprr(pod: PodBasis, recog: LatentRecognition, net: liknet.LikelihoodNet,
                      xi_queries, x_queries, n_samples: int, seed: int) -> PredictiveDistribution:
    """Monte-Carlo predictive mean and total variance on arbitrary points.

    ``x_queries`` may be any set of physical points, not just the training
    grid; that is the whole point of feeding the physical variable to the
    network.
    """
    if int(n_samples) < 1:
        raise ValueError("n_samples must be at least 1")
    xi = np.atleast_2d(np.asarray(xi_queries, dtype=np.float64))
    x = np.asarray(x_queries, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if pod.k != recog.k:
        raise ValueError(f"basis rank {pod.k} differs from recognition rank {recog.k}")
    k, m, d = recog.k, x.shape[1], xi.shape[1]
    if net.arch.input_dim != k + m + d:
        raise ValueError("network input dimension does not match (k, m, d)")

    n_q, n_p = xi.shape[0], x.shape[0]
    post = posterior_at(recog, xi)
    z = sample_latents(post, int(n_samples), seed)  # (S, Q, k)

    mean = np.empty((n_q, n_p))
    var = np.empty((n_q, n_p))
    samples_per_block = max(1, _CHUNK_ROWS // n_p)
    for q in range(n_q):
        static = np.hstack([x, np.tile(xi[q], (n_p, 1))])
        sum_mu = np.zeros(n_p)
        sum_mu2 = np.zeros(n_p)
        sum_s2 = np.zeros(n_p)
        for start in range(0, int(n_samples), samples_per_block):
            zblock = z[start : start + samples_per_block, q, :]
            nb = zblock.shape[0]
            feats = np.hstack([
                np.repeat(zblock, n_p, axis=0),
                np.tile(static, (nb, 1)),
            ])
            mu, s2 = _net_moments(net, feats)
            mu = mu.reshape(nb, n_p)
            s2 = s2.reshape(nb, n_p)
            sum_mu += mu.sum(axis=0)
            sum_mu2 += (mu**2).sum(axis=0)
            sum_s2 += s2.sum(axis=0)
        mean[q] = sum_mu / n_samples
        var[q] = (sum_s2 + sum_mu2) / n_samples - mean[q] ** 2
    return PredictiveDistribution(mean, np.clip(var, 0.0, None), int(n_samples))


def predict_gpr_rom(pod: PodBasis, recog: LatentRecognition, xi_queries) -> np.ndarray:
    """Decode posterior latent means through the POD basis (training grid only)."""
    if pod.k != recog.k:
        raise ValueError(f"basis rank {pod.k} differs from recognition rank {recog.k}")
    post = posterior_at(recog, xi_queries)
    return reconstruct(pod, post.mean)


def predict_discrete(recog: LatentRecognition, net: liknet.LikelihoodNet,
                     xi_queries, n_samples: int, seed: int) -> PredictiveDistribution:
    """Monte-Carlo prediction with the field-head baseline (fixed grid)."""
    if net.head != "field":
        raise ValueError("predict_discrete expects a field-head net")
    if int(n_samples) < 1:
        raise ValueError("n_samples must be at least 1")
    xi = np.atleast_2d(np.asarray(xi_queries, dtype=np.float64))
    if net.arch.input_dim != recog.k + xi.shape[1]:
        raise ValueError("network input dimension does not match (k, d)")
    n_q = xi.shape[0]
    n_p = net.arch.output_dim // 2
    post = posterior_at(recog, xi)
    z = sample_latents(post, int(n_samples), seed)

    mean = np.empty((n_q, n_p))
    var = np.empty((n_q, n_p))
    ts = net.target_scale
    for q in range(n_q):
        feats = np.hstack([z[:, q, :], np.tile(xi[q], (int(n_samples), 1))])
        scaled = net.scaler.apply(feats) if net.scaler is not None else feats
        out = liknet.raw_outputs(net, scaled)
        mu = out[:, :n_p] * ts + net.target_shift
        s2 = liknet.softplus(out[:, n_p:]) * ts**2
        mean[q] = mu.mean(axis=0)
        var[q] = (s2 + mu**2).mean(axis=0) - mean[q] ** 2
    return PredictiveDistribution(mean, np.clip(var, 0.0, None), int(n_samples))


def relative_test_mean_error(pred_mean: np.ndarray, truth: np.ndarray) -> float:
    """Mean over rows of ||pred - truth||_2 / ||truth||_2."""
    pred = np.atleast_2d(np.asarray(pred_mean, dtype=np.float64))
    ref = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    norms = np.linalg.norm(ref, axis=1)
    if (norms == 0).any():
        raise ValueError("reference rows must have nonzero norm")
    return float(np.mean(np.linalg.norm(pred - ref, axis=1) / norms))


def write_prediction(dist: PredictiveDistribution, params: ParameterSet,
                     grid: PhysicalGrid, path) -> None:
    """Emit the mean field as a snapshot file and the variance alongside it."""
    path = Path(path)
    write_snapshots(SnapshotSet(grid, params, dist.mean), path)
    write_snapshots(SnapshotSet(grid, params, dist.variance),
                    path.with_name(path.name + ".var"))
