"""Proper orthogonal decomposition of snapshot matrices.

The basis comes from the singular value decomposition of the centered
snapshot matrix: with singular values s_i, the eigenvalues of the empirical
covariance (1/D) sum_i (U_i - mean)^T (U_i - mean) are lambda_i = s_i^2 / D.
Projection subtracts the mean row before applying the basis and
reconstruction adds it back, so training latents have zero empirical mean
and diagonal empirical covariance diag(lambda_1..lambda_k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SnapshotSet

__all__ = [
    "PodBasis",
    "LatentCoords",
    "DegenerateSnapshotsError",
    "fit_pod",
    "fit_pod_fixed_k",
    "truncate",
    "project",
    "reconstruct",
    "relative_tail_energy",
]


class DegenerateSnapshotsError(ValueError):
    """All snapshots identical: the centered matrix has zero total variance."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Truncated orthonormal basis with the full covariance spectrum.

    ``basis`` is M x k with orthonormal columns ordered by decreasing
    eigenvalue; ``eigenvalues`` holds the full length-M spectrum (zero past
    the rank of the data).
    """

    mean_row: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    k: int

    def __post_init__(self):
        object.__setattr__(self, "mean_row", _frozen(self.mean_row).reshape(-1))
        object.__setattr__(self, "basis", _frozen(self.basis))
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues).reshape(-1))
        object.__setattr__(self, "k", int(self.k))
        m, k = self.basis.shape
        if not 1 <= self.k == k:
            raise ValueError("basis column count must equal k >= 1")
        if self.mean_row.shape != (m,):
            raise ValueError("mean_row length must match basis rows")
        ev = self.eigenvalues
        if (np.diff(ev) > 1e-12).any() or (ev < -1e-12).any():
            raise ValueError("eigenvalues must be nonincreasing and nonnegative")
        gram = self.basis.T @ self.basis
        if np.abs(gram - np.eye(k)).max() > 1e-10:
            raise ValueError("basis columns are not orthonormal")

    @property
    def n_points(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True, eq=False)
class LatentCoords:
    """Projection coefficients, one length-k row per snapshot."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(np.atleast_2d(self.coords)))

    @property
    def k(self) -> int:
        return self.coords.shape[1]


def _decompose(values: np.ndarray):
    """Centered SVD; returns (mean_row, right_vectors (M, r), eigenvalues (M,))."""
    n_snap, n_pts = values.shape
    mean_row = values.mean(axis=0)
    centered = values - mean_row
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eig = np.zeros(n_pts)
    eig[: svals.size] = svals**2 / n_snap
    modes = vt.T
    # fix each column's sign so its largest-magnitude entry is positive
    anchor = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[anchor, np.arange(modes.shape[1])])
    signs[signs == 0] = 1.0
    modes = modes * signs
    if eig[0] <= 0.0:
        raise DegenerateSnapshotsError("snapshot matrix has zero variance after centering")
    return mean_row, modes, eig


def relative_tail_energy(eigenvalues: np.ndarray, k: int) -> float:
    """E_k: the fraction of total spectral mass past the first k eigenvalues."""
    ev = np.asarray(eigenvalues, dtype=np.float64)
    total = ev.sum()
    if total <= 0:
        raise DegenerateSnapshotsError("zero total variance")
    return float(max(ev[k:].sum(), 0.0) / total)


def fit_pod(s: SnapshotSet, eps_pod: float) -> PodBasis:
    """Fit the decomposition, truncating at the smallest rank k with
    E_k = (sum_{i>k} lambda_i) / (sum_i lambda_i) <= eps_pod^2 (k >= 1)."""
    if not 0.0 < eps_pod <= 1.0:
        raise ValueError("eps_pod must lie in (0, 1]")
    if s.n_snapshots < 2:
        raise ValueError("need at least two snapshots")
    mean_row, modes, eig = _decompose(s.values)
    total = eig.sum()
    tails = total - np.cumsum(eig)
    np.clip(tails, 0.0, None, out=tails)
    qualifying = np.nonzero(tails / total <= eps_pod**2)[0]
    k = int(qualifying[0]) + 1 if qualifying.size else modes.shape[1]
    k = min(max(k, 1), modes.shape[1])
    return PodBasis(mean_row, modes[:, :k], eig, k)


def fit_pod_fixed_k(s: SnapshotSet, k: int) -> PodBasis:
    """Same decomposition with the truncation rank forced to k."""
    k = int(k)
    max_rank = min(s.n_snapshots, s.n_points)
    if not 1 <= k <= max_rank:
        raise ValueError(f"k must lie in [1, {max_rank}]")
    if s.n_snapshots < 2:
        raise ValueError("need at least two snapshots")
    mean_row, modes, eig = _decompose(s.values)
    if k > modes.shape[1]:
        raise ValueError(f"k={k} exceeds available modes {modes.shape[1]}")
    return PodBasis(mean_row, modes[:, :k], eig, k)


def truncate(b: PodBasis, k: int) -> PodBasis:
    """Keep only the first k basis columns (same spectrum, same mean)."""
    if not 1 <= k <= b.k:
        raise ValueError(f"k must lie in [1, {b.k}]")
    return PodBasis(b.mean_row, b.basis[:, :k], b.eigenvalues, k)


def project(b: PodBasis, s: SnapshotSet) -> LatentCoords:
    """Latent coordinates of each snapshot: basis^T (row - mean_row)."""
    if s.n_points != b.n_points:
        raise ValueError(f"snapshots have {s.n_points} points, basis expects {b.n_points}")
    return LatentCoords((s.values - b.mean_row) @ b.basis)


def project_values(b: PodBasis, values: np.ndarray) -> np.ndarray:
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.shape[1] != b.n_points:
        raise ValueError("row length does not match basis")
    return (values - b.mean_row) @ b.basis


def reconstruct(b: PodBasis, z) -> np.ndarray:
    """Decode latents back to the grid: mean_row + basis z."""
    coords = z.coords if isinstance(z, LatentCoords) else np.atleast_2d(np.asarray(z, dtype=np.float64))
    if coords.shape[1] != b.k:
        raise ValueError(f"latents have {coords.shape[1]} columns, basis rank is {b.k}")
    return b.mean_row + coords @ b.basis.T
