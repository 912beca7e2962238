import numpy as np
import pytest

from cvaegprr.dataset import ParameterSet, PhysicalGrid, SnapshotSet, add_noise, generate_morlet_set, split
from cvaegprr.pod import (
    DegenerateSnapshotsError,
    fit_pod,
    fit_pod_fixed_k,
    project,
    reconstruct,
    relative_tail_energy,
    truncate,
)


def make_set(values):
    values = np.asarray(values, dtype=np.float64)
    d, m = values.shape
    grid = PhysicalGrid(np.linspace(0, 1, m)[:, None], np.array([[0.0, 1.0]]))
    params = ParameterSet(np.linspace(0, 1, d)[:, None], np.array([[0.0, 1.0]]))
    return SnapshotSet(grid, params, values)


@pytest.fixture(scope="module")
def random_set():
    rng = np.random.default_rng(42)
    return make_set(rng.normal(size=(20, 8)))


def rank_one_set():
    rng = np.random.default_rng(1)
    direction = rng.normal(size=12)
    coeffs = rng.normal(size=15)
    mean = rng.normal(size=12)
    return make_set(mean + np.outer(coeffs, direction))


class TestFit:
    def test_rank_one_truncates_to_one(self):
        b = fit_pod(rank_one_set(), eps_pod=0.5)
        assert b.k == 1
        assert relative_tail_energy(b.eigenvalues, 1) <= 1e-12

    def test_frobenius_identity(self, random_set):
        b = fit_pod(random_set, eps_pod=1e-8)
        centered = random_set.values - random_set.values.mean(axis=0)
        frob = np.sum(centered**2) / random_set.n_snapshots
        assert b.eigenvalues.sum() == pytest.approx(frob, rel=1e-12)

    def test_morlet_fixed_rank_ten(self):
        full = generate_morlet_set(400, 200, seed=3)
        train, _ = split(full, 200, seed=4)
        noisy = add_noise(train, 0.01, seed=5)
        b = fit_pod_fixed_k(noisy, 10)
        assert b.basis.shape == (201, 10)

    def test_full_rank_tail_vanishes(self, random_set):
        k = min(random_set.n_snapshots, random_set.n_points)
        b = fit_pod_fixed_k(random_set, k)
        assert relative_tail_energy(b.eigenvalues, k) <= 1e-12

    def test_smallest_qualifying_k(self, random_set):
        b_all = fit_pod(random_set, eps_pod=1e-10)
        total = b_all.eigenvalues.sum()
        # pick a tolerance sitting between E_2 and E_3: smallest k must be 3
        e2 = b_all.eigenvalues[2:].sum() / total
        e3 = b_all.eigenvalues[3:].sum() / total
        eps = np.sqrt((e2 + e3) / 2)
        assert fit_pod(random_set, eps).k == 3

    def test_k_forced_at_least_one(self, random_set):
        assert fit_pod(random_set, eps_pod=1.0).k == 1

    def test_degenerate_snapshots(self):
        s = make_set(np.full((5, 4), 3.7))
        with pytest.raises(DegenerateSnapshotsError):
            fit_pod(s, eps_pod=0.1)
        with pytest.raises(DegenerateSnapshotsError):
            fit_pod_fixed_k(s, 1)

    def test_fixed_k_out_of_range(self, random_set):
        with pytest.raises(ValueError):
            fit_pod_fixed_k(random_set, 0)
        with pytest.raises(ValueError):
            fit_pod_fixed_k(random_set, 9)

    def test_eps_out_of_range(self, random_set):
        for eps in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                fit_pod(random_set, eps)

    def test_sign_convention_and_determinism(self, random_set):
        a = fit_pod_fixed_k(random_set, 5)
        b = fit_pod_fixed_k(random_set, 5)
        assert np.array_equal(a.basis, b.basis)
        anchors = np.argmax(np.abs(a.basis), axis=0)
        assert (a.basis[anchors, np.arange(5)] > 0).all()

    def test_truncation_consistency(self, random_set):
        big = fit_pod_fixed_k(random_set, 8)
        small = fit_pod_fixed_k(random_set, 3)
        assert np.array_equal(big.basis[:, :3], small.basis)
        assert np.array_equal(truncate(big, 3).basis, small.basis)


class TestProjectReconstruct:
    def test_mean_row_projects_to_zero(self, random_set):
        b = fit_pod_fixed_k(random_set, 4)
        z = (b.mean_row[None, :] - b.mean_row) @ b.basis
        assert np.abs(z).max() == 0.0

    def test_full_rank_completeness(self, random_set):
        k = min(random_set.n_snapshots, random_set.n_points)
        b = fit_pod_fixed_k(random_set, k)
        rebuilt = reconstruct(b, project(b, random_set))
        assert np.abs(rebuilt - random_set.values).max() < 1e-8

    def test_rank_one_exact(self):
        s = rank_one_set()
        b = fit_pod_fixed_k(s, 1)
        rebuilt = reconstruct(b, project(b, s))
        assert np.abs(rebuilt - s.values).max() < 1e-10

    def test_zero_latents_give_mean_row(self, random_set):
        b = fit_pod_fixed_k(random_set, 3)
        out = reconstruct(b, np.zeros((4, 3)))
        assert np.allclose(out, b.mean_row, atol=0)

    def test_latent_covariance_is_diagonal_spectrum(self, random_set):
        # empirical covariance of training latents equals diag(lambda_1..k)
        b = fit_pod_fixed_k(random_set, 6)
        z = project(b, random_set).coords
        cov = z.T @ z / random_set.n_snapshots  # latents are exactly centered
        diag = np.diag(cov)
        off = cov - np.diag(diag)
        assert np.abs(off).max() <= 1e-8 * diag.max()
        assert diag == pytest.approx(b.eigenvalues[:6], rel=1e-8)

    def test_projection_error_identity(self, random_set):
        b = fit_pod_fixed_k(random_set, 3)
        z = project(b, random_set)
        residual = random_set.values - reconstruct(b, z)
        empirical = np.sum(residual**2) / random_set.n_snapshots
        tail = b.eigenvalues[3:].sum()
        assert empirical == pytest.approx(tail, rel=1e-8)

    def test_relative_projection_error_is_sqrt_tail(self, random_set):
        b = fit_pod_fixed_k(random_set, 3)
        z = project(b, random_set)
        residual = random_set.values - reconstruct(b, z)
        centered = random_set.values - random_set.values.mean(axis=0)
        rel = np.sqrt(np.sum(residual**2) / np.sum(centered**2))
        assert rel == pytest.approx(np.sqrt(relative_tail_energy(b.eigenvalues, 3)), abs=1e-6)

    def test_dimension_mismatches(self, random_set):
        b = fit_pod_fixed_k(random_set, 3)
        other = make_set(np.random.default_rng(0).normal(size=(4, 5)))
        with pytest.raises(ValueError):
            project(b, other)
        with pytest.raises(ValueError):
            reconstruct(b, np.zeros((2, 4)))


class TestInvariants:
    def test_orthonormality(self, random_set):
        b = fit_pod_fixed_k(random_set, 7)
        gram = b.basis.T @ b.basis
        assert np.abs(gram - np.eye(7)).max() <= 1e-10

    def test_tail_energy_monotone(self, random_set):
        b = fit_pod_fixed_k(random_set, 8)
        tails = [relative_tail_energy(b.eigenvalues, k) for k in range(1, 9)]
        assert all(a >= b_ - 1e-15 for a, b_ in zip(tails, tails[1:]))

    def test_spectrum_nonincreasing(self, random_set):
        b = fit_pod(random_set, 1e-6)
        assert (np.diff(b.eigenvalues) <= 1e-12).all()
        assert (b.eigenvalues >= 0).all()
