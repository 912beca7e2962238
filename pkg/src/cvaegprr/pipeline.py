"""Experiment orchestration: data preparation, full training, evaluation.

All stages draw their randomness from seeds derived from the experiment's
master seed, so any stage can be rerun in isolation and reproduce the same
result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import liknet, pod, predict, recognition
from .bundle import ModelBundle
from .config import ExperimentConfig, config_hash
from .dataset import SnapshotSet, add_noise, generate_morlet_set, morlet_response, split
from .seeding import derive_seed

__all__ = [
    "MorletData",
    "MetricRow",
    "StageError",
    "prepare_morlet_data",
    "fit_bundle",
    "evaluate_bundle",
    "sweep_npod",
    "fine_grid_points",
    "fine_grid_truth",
]


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


@dataclass(frozen=True)
class MorletData:
    train_clean: SnapshotSet
    train_noisy: SnapshotSet
    test_clean: SnapshotSet
    test_noisy: SnapshotSet


@dataclass(frozen=True)
class MetricRow:
    method: str
    noise: float
    n_pod: int
    grid: str
    epsilon_test: float
    wall_seconds: float


def prepare_morlet_data(cfg: ExperimentConfig) -> MorletData:
    """Generate, split and noise the Morlet snapshot set for this config.

    Noise goes on the observations; test errors are always computed against
    the clean reference signals.
    """
    full = generate_morlet_set(cfg.n_snapshots, cfg.grid_intervals,
                               derive_seed(cfg.seed, "data"))
    train_clean, test_clean = split(full, cfg.n_train, derive_seed(cfg.seed, "split"))
    train_noisy = add_noise(train_clean, cfg.noise, derive_seed(cfg.seed, "noise", "train"))
    test_noisy = add_noise(test_clean, cfg.noise, derive_seed(cfg.seed, "noise", "test"))
    return MorletData(train_clean, train_noisy, test_clean, test_noisy)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(f"stage '{name}' failed: {exc}") from exc


def fit_bundle(train: SnapshotSet, cfg: ExperimentConfig,
               n_pod: int | None = None, train_seed_tag=()) -> tuple[ModelBundle, np.ndarray]:
    """Run the full training pipeline on one training set.

    Returns the bundle and the likelihood-net loss history.  ``n_pod``
    overrides the config's rank (used by the rank sweep); ``train_seed_tag``
    extends the derived network seed so sweep entries draw distinct
    initializations.
    """
    if n_pod is not None:
        basis = _stage("pod", pod.fit_pod_fixed_k, train, n_pod)
    elif cfg.n_pod is not None:
        basis = _stage("pod", pod.fit_pod_fixed_k, train, cfg.n_pod)
    else:
        basis = _stage("pod", pod.fit_pod, train, cfg.eps_pod)
    latents = _stage("project", pod.project, basis, train)
    recog = _stage("recognition", recognition.fit_recognition,
                   train.params, latents, cfg.gpr_restarts, derive_seed(cfg.seed, "gpr"))

    train_cfg = liknet.TrainConfig(
        lr_stages=cfg.lr_stages,
        schedule_unit=cfg.schedule_unit,
        batch_size=cfg.batch_size,
        n_mc=cfg.n_mc,
        seed=derive_seed(cfg.seed, "train", *train_seed_tag),
    )
    k, m, d = basis.k, train.grid.dim, train.params.dim
    arch = liknet.MlpArchitecture(k + m + d, cfg.hidden, 2)
    net = liknet.init_net(arch, derive_seed(cfg.seed, "init", *train_seed_tag))
    result = _stage("likelihood-train", liknet.train, net, train, recog, train_cfg)

    discrete = None
    if cfg.train_discrete:
        disc_arch = liknet.MlpArchitecture(k + d, cfg.hidden, 2 * train.n_points)
        disc_net = liknet.init_net(disc_arch, derive_seed(cfg.seed, "init-discrete"), head="field")
        disc_cfg = liknet.TrainConfig(
            lr_stages=cfg.lr_stages,
            schedule_unit=cfg.schedule_unit,
            batch_size=min(cfg.batch_size, train.n_snapshots),
            n_mc=cfg.n_mc,
            seed=derive_seed(cfg.seed, "train-discrete"),
        )
        discrete = _stage("discrete-train", liknet.train_discrete,
                          disc_net, train, recog, disc_cfg).net

    meta = {"config_hash": config_hash(cfg), "seed": cfg.seed, "noise": train.noise_sigma}
    return ModelBundle(basis, recog, result.net, discrete, meta), result.history


def fine_grid_points(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(-1.0, 1.0, cfg.fine_grid_intervals + 1)[:, None]


def fine_grid_truth(cfg: ExperimentConfig, test: SnapshotSet) -> np.ndarray:
    pts = fine_grid_points(cfg)
    return morlet_response(test.params.samples, pts)


def evaluate_bundle(bundle: ModelBundle, test: SnapshotSet, cfg: ExperimentConfig,
                    grid: str = "coarse", truth: np.ndarray | None = None,
                    x_fine: np.ndarray | None = None) -> list[MetricRow]:
    """Relative test mean errors for every applicable method.

    On the coarse (training) grid all methods apply; on a fine grid only
    the physics-variable-aware network generalizes, so the baselines are
    skipped there.
    """
    if grid not in ("coarse", "fine"):
        raise ValueError("grid must be 'coarse' or 'fine'")
    if grid == "coarse":
        x_queries = test.grid.points
        reference = test.values if truth is None else truth
    else:
        if x_fine is None:
            if cfg.data != "morlet":
                raise ValueError("fine-grid evaluation needs morlet data or explicit points")
            x_fine = fine_grid_points(cfg)
            truth = fine_grid_truth(cfg, test)
        if truth is None:
            raise ValueError("fine-grid evaluation needs reference values")
        x_queries = x_fine
        reference = truth

    rows = []
    eval_seed = derive_seed(cfg.seed, "predict", grid)
    t0 = time.perf_counter()
    dist = predict.predict_cvae_gprr(bundle.pod, bundle.recognition, bundle.net,
                                     test.params.samples, x_queries,
                                     cfg.n_samples, eval_seed)
    eps = predict.relative_test_mean_error(dist.mean, reference)
    rows.append(MetricRow("cvae-gprr", cfg.noise, bundle.pod.k, grid,
                          eps, time.perf_counter() - t0))

    if grid == "coarse":
        t0 = time.perf_counter()
        rom_mean = predict.predict_gpr_rom(bundle.pod, bundle.recognition, test.params.samples)
        eps = predict.relative_test_mean_error(rom_mean, reference)
        rows.append(MetricRow("gpr-rom", cfg.noise, bundle.pod.k, grid,
                              eps, time.perf_counter() - t0))
        if bundle.discrete_net is not None:
            t0 = time.perf_counter()
            disc = predict.predict_discrete(bundle.recognition, bundle.discrete_net,
                                            test.params.samples, cfg.n_samples,
                                            derive_seed(cfg.seed, "predict-discrete"))
            eps = predict.relative_test_mean_error(disc.mean, reference)
            rows.append(MetricRow("discrete", cfg.noise, bundle.pod.k, grid,
                                  eps, time.perf_counter() - t0))
    return rows


def sweep_npod(train: SnapshotSet, test: SnapshotSet, cfg: ExperimentConfig,
               ranks) -> tuple[list[MetricRow], list[tuple[int, str]]]:
    """Errors of the network model and the GPR-ROM across basis ranks.

    The decomposition and the per-coordinate GPRs are fitted once at the
    largest rank and truncated: per-coordinate seeds make the truncation
    identical to a direct fit at each rank.  Per-rank failures are recorded
    and the sweep continues.
    """
    ranks = sorted(set(int(r) for r in ranks))
    if not ranks or ranks[0] < 1:
        raise ValueError("ranks must be positive integers")
    max_rank = ranks[-1]
    basis_full = pod.fit_pod_fixed_k(train, max_rank)
    latents = pod.project(basis_full, train)
    recog_full = recognition.fit_recognition(train.params, latents, cfg.gpr_restarts,
                                             derive_seed(cfg.seed, "gpr"))
    rows: list[MetricRow] = []
    failures: list[tuple[int, str]] = []
    for k in ranks:
        try:
            basis_k = pod.truncate(basis_full, k)
            recog_k = recognition.truncated(recog_full, k)

            t0 = time.perf_counter()
            rom_mean = predict.predict_gpr_rom(basis_k, recog_k, test.params.samples)
            eps = predict.relative_test_mean_error(rom_mean, test.values)
            rows.append(MetricRow("gpr-rom", cfg.noise, k, "coarse",
                                  eps, time.perf_counter() - t0))

            train_cfg = liknet.TrainConfig(
                lr_stages=cfg.lr_stages,
                schedule_unit=cfg.schedule_unit,
                batch_size=cfg.batch_size,
                n_mc=cfg.n_mc,
                seed=derive_seed(cfg.seed, "train", "rank", k),
            )
            arch = liknet.MlpArchitecture(k + train.grid.dim + train.params.dim, cfg.hidden, 2)
            net = liknet.init_net(arch, derive_seed(cfg.seed, "init", "rank", k))
            t0 = time.perf_counter()
            liknet.train(net, train, recog_k, train_cfg)
            dist = predict.predict_cvae_gprr(basis_k, recog_k, net,
                                             test.params.samples, test.grid.points,
                                             cfg.n_samples,
                                             derive_seed(cfg.seed, "predict", "rank", k))
            eps = predict.relative_test_mean_error(dist.mean, test.values)
            rows.append(MetricRow("cvae-gprr", cfg.noise, k, "coarse",
                                  eps, time.perf_counter() - t0))
        except Exception as exc:  # record and keep sweeping
            failures.append((k, f"{type(exc).__name__}: {exc}"))
    return rows, failures
