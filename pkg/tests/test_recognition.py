import numpy as np
import pytest

from cvaegprr import gpr
from cvaegprr.dataset import ParameterSet, add_noise, generate_morlet_set, split
from cvaegprr.pod import LatentCoords, fit_pod_fixed_k, project
from cvaegprr.recognition import (
    LatentPosterior,
    LatentRecognition,
    RecognitionFitError,
    fit_recognition,
    posterior_at,
    sample_latents,
    truncated,
)
from cvaegprr.seeding import derive_seed


def make_params(values, bounds=None):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if bounds is None:
        bounds = np.column_stack([values.min(axis=0), values.max(axis=0)])
    return ParameterSet(values, bounds)


@pytest.fixture(scope="module")
def smooth_latents():
    """Latents generated from known smooth functions of a 1D parameter."""
    rng = np.random.default_rng(8)
    xi = np.sort(rng.uniform(0, 1, size=60))[:, None]
    clean = np.column_stack([np.sin(4 * xi[:, 0]), 3.0 * np.cos(2 * xi[:, 0])])
    noisy = clean + rng.normal(0, 0.01, size=clean.shape)
    return make_params(xi), clean, noisy


class TestFit:
    def test_single_coordinate_reduces_to_gpr(self, smooth_latents):
        params, _, noisy = smooth_latents
        recog = fit_recognition(params, LatentCoords(noisy[:, :1]), restarts=2, seed=5)
        targets = (noisy[:, 0] - noisy[:, 0].mean()) / noisy[:, 0].std()
        direct = gpr.fit_hyperparameters(params.samples, targets, restarts=2,
                                         seed=derive_seed(5, "latent", 0))
        assert recog.models[0].kernel.signal_sigma == direct.kernel.signal_sigma
        assert np.array_equal(recog.models[0].kernel.lengthscales, direct.kernel.lengthscales)
        assert recog.models[0].noise_sigma == direct.noise_sigma

    def test_held_out_error_tracks_noise(self, smooth_latents):
        params, clean, noisy = smooth_latents
        train_idx = np.arange(0, 60, 2)
        test_idx = np.arange(1, 60, 2)
        recog = fit_recognition(make_params(params.samples[train_idx]),
                                LatentCoords(noisy[train_idx]), restarts=3, seed=0)
        post = posterior_at(recog, params.samples[test_idx])
        err = np.abs(post.mean - clean[test_idx]).mean(axis=0)
        assert (err <= 5 * 0.01).all()

    def test_coordinate_independence(self, smooth_latents):
        params, _, noisy = smooth_latents
        both = fit_recognition(params, LatentCoords(noisy), restarts=2, seed=3)
        first_only = fit_recognition(params, LatentCoords(noisy[:, :1]), restarts=2, seed=3)
        assert both.models[0].kernel.signal_sigma == first_only.models[0].kernel.signal_sigma
        assert both.models[0].noise_sigma == first_only.models[0].noise_sigma
        sliced = truncated(both, 1)
        assert sliced.models[0] is both.models[0]

    def test_row_count_mismatch(self, smooth_latents):
        params, _, noisy = smooth_latents
        with pytest.raises(ValueError):
            fit_recognition(params, LatentCoords(noisy[:-1]), restarts=1, seed=0)

    def test_failure_names_coordinate(self, smooth_latents, monkeypatch):
        params, _, noisy = smooth_latents

        calls = {"n": 0}
        original = gpr.fit_hyperparameters

        def fail_on_second(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 2:
                raise gpr.GprFitError("forced failure")
            return original(*args, **kwargs)

        monkeypatch.setattr("cvaegprr.recognition.gpr.fit_hyperparameters", fail_on_second)
        with pytest.raises(RecognitionFitError, match="coordinate 1"):
            fit_recognition(params, LatentCoords(noisy), restarts=1, seed=0)


class TestPosterior:
    def make_fixed_recognition(self, xi, targets, shift, scale, noise=1e-6):
        kern = gpr.ArdSeKernel(1.0, [0.3])
        model = gpr.build_gpr_model(kern, noise, xi, targets)
        return LatentRecognition((model,), np.array([shift]), np.array([scale]))

    def test_interpolates_training_latents(self, smooth_latents):
        params, clean, _ = smooth_latents
        recog = fit_recognition(params, LatentCoords(clean), restarts=2, seed=1)
        post = posterior_at(recog, params)
        standardized_err = np.abs(post.mean - clean) / recog.latent_scale
        assert standardized_err.max() < 1e-4

    def test_prior_reversion_far_query(self):
        xi = np.linspace(0, 1, 15)[:, None]
        targets = np.sin(3 * xi[:, 0])
        recog = self.make_fixed_recognition(xi, targets, shift=2.5, scale=4.0)
        post = posterior_at(recog, np.array([[50.0]]))
        # mean reverts to the de-standardized zero prior = shift; variance to
        # the prior scale sigma_pi^2 * scale^2
        assert post.mean[0, 0] == pytest.approx(2.5, abs=1e-6)
        assert post.variance[0, 0] == pytest.approx(16.0, rel=1e-6)

    def test_denoising_beats_raw_observations(self):
        # recognition posterior mean of the first latent is closer to the
        # clean projection than the noisy observations are
        full = generate_morlet_set(800, 200, seed=2)
        train_clean, _ = split(full, 400, seed=3)
        train_noisy = add_noise(train_clean, 0.1, seed=4)
        basis = fit_pod_fixed_k(train_noisy, 1)
        noisy_z = project(basis, train_noisy)
        clean_z = project(basis, train_clean).coords[:, 0]
        recog = fit_recognition(train_noisy.params, noisy_z, restarts=2, seed=5)
        post = posterior_at(recog, train_noisy.params)
        rmse_gpr = np.sqrt(np.mean((post.mean[:, 0] - clean_z) ** 2))
        rmse_obs = np.sqrt(np.mean((noisy_z.coords[:, 0] - clean_z) ** 2))
        assert rmse_gpr < rmse_obs

    def test_destandardization_round_trip_linear(self):
        # a linear latent is recovered equally well through the standardized
        # path and by fitting the raw targets directly
        rng = np.random.default_rng(9)
        xi = np.sort(rng.uniform(0, 1, 40))[:, None]
        raw = 250.0 * xi[:, 0] - 60.0
        recog = fit_recognition(make_params(xi), LatentCoords(raw[:, None]),
                                restarts=2, seed=2)
        queries = np.linspace(0.05, 0.95, 11)[:, None]
        post = posterior_at(recog, queries)
        truth = 250.0 * queries[:, 0] - 60.0
        assert np.abs(post.mean[:, 0] - truth).max() < 2e-3 * np.abs(truth).max()

    def test_dimension_mismatch(self, smooth_latents):
        params, _, noisy = smooth_latents
        recog = fit_recognition(params, LatentCoords(noisy[:, :1]), restarts=1, seed=0)
        with pytest.raises(ValueError):
            posterior_at(recog, np.zeros((2, 3)))

    def test_variances_nonnegative(self, smooth_latents):
        params, _, noisy = smooth_latents
        recog = fit_recognition(params, LatentCoords(noisy), restarts=2, seed=7)
        post = posterior_at(recog, np.random.default_rng(0).uniform(0, 1, (30, 1)))
        assert (post.variance >= 0).all()


class TestSampling:
    def test_zero_variance_returns_mean(self):
        post = LatentPosterior(np.array([[1.0, -2.0]]), np.zeros((1, 2)))
        draws = sample_latents(post, 10, seed=0)
        assert draws.shape == (10, 1, 2)
        assert (draws == post.mean).all()

    def test_clt_mean(self):
        post = LatentPosterior(np.array([[0.5, -1.5]]), np.array([[0.04, 0.25]]))
        n = 100_000
        draws = sample_latents(post, n, seed=1)
        se = np.sqrt(post.variance / n)
        assert (np.abs(draws.mean(axis=0) - post.mean) <= 3 * se).all()

    def test_deterministic(self):
        post = LatentPosterior(np.zeros((3, 2)), np.ones((3, 2)))
        a = sample_latents(post, 500, seed=9)
        b = sample_latents(post, 500, seed=9)
        assert np.array_equal(a, b)

    def test_rejects_zero_samples(self):
        post = LatentPosterior(np.zeros((1, 1)), np.ones((1, 1)))
        with pytest.raises(ValueError):
            sample_latents(post, 0, seed=0)
