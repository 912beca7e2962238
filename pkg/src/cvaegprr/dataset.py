"""Snapshot data handling.

A snapshot set couples a fixed physical grid, a list of parameter samples
and the D x M response matrix (one row per parameter sample).  This module
generates the analytic Morlet-wavelet test problem, injects Gaussian sensor
noise, splits rows into train/test halves and reads/writes the plain-text
snapshot format used to ingest external datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PhysicalGrid",
    "ParameterSet",
    "SnapshotSet",
    "SnapshotFormatError",
    "morlet_eval",
    "morlet_response",
    "generate_morlet_set",
    "add_noise",
    "split",
    "write_snapshots",
    "read_snapshots",
]

MORLET_FREQ_RANGE = (2.0, 50.0)
MORLET_CYCLE_CHOICES = (2, 3, 4, 5)


class SnapshotFormatError(ValueError):
    """Malformed snapshot file: bad header, wrong row lengths or bad values."""


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PhysicalGrid:
    """M observation points, each with m coordinates, inside a bounding box.

    ``points`` has shape (M, m); ``bounds`` has shape (m, 2) with the lower
    and upper corner of the physical region.
    """

    points: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        bnd = np.asarray(self.bounds, dtype=np.float64)
        if bnd.ndim == 1:
            bnd = bnd[None, :]
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "bounds", _frozen(bnd))
        if self.points.shape[0] < 1:
            raise ValueError("grid needs at least one point")
        m = self.points.shape[1]
        if bnd.shape != (m, 2):
            raise ValueError(f"bounds must have shape ({m}, 2), got {bnd.shape}")
        if not np.isfinite(self.points).all():
            raise ValueError("grid coordinates must be finite")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if (self.points < lo).any() or (self.points > hi).any():
            raise ValueError("grid points fall outside the declared region")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """D parameter vectors of dimension d with per-coordinate bounds.

    ``integer_mask`` flags coordinates that only take integral values
    (they are still treated as real numbers downstream).
    """

    samples: np.ndarray
    bounds: np.ndarray
    integer_mask: np.ndarray | None = None

    def __post_init__(self):
        smp = np.asarray(self.samples, dtype=np.float64)
        if smp.ndim == 1:
            smp = smp[:, None]
        object.__setattr__(self, "samples", _frozen(smp))
        bnd = np.asarray(self.bounds, dtype=np.float64)
        if bnd.ndim == 1:
            bnd = bnd[None, :]
        object.__setattr__(self, "bounds", _frozen(bnd))
        d = self.samples.shape[1]
        mask = self.integer_mask
        mask = np.zeros(d, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        object.__setattr__(self, "integer_mask", _frozen(mask, dtype=bool))
        if bnd.shape != (d, 2):
            raise ValueError(f"bounds must have shape ({d}, 2), got {bnd.shape}")
        if mask.shape != (d,):
            raise ValueError("integer_mask length must match parameter dimension")
        if not np.isfinite(self.samples).all():
            raise ValueError("parameter samples must be finite")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if (self.samples < lo).any() or (self.samples > hi).any():
            raise ValueError("parameter samples fall outside the declared bounds")
        ints = self.samples[:, self.integer_mask]
        if ints.size and not np.array_equal(ints, np.round(ints)):
            raise ValueError("integer-flagged coordinates must hold integral values")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def take(self, idx) -> "ParameterSet":
        return ParameterSet(self.samples[idx], self.bounds, self.integer_mask)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Grid, parameters and the D x M response matrix.

    ``noise_sigma`` records the standard deviation of injected observation
    noise (0 for clean data).
    """

    grid: PhysicalGrid
    params: ParameterSet
    values: np.ndarray
    noise_sigma: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[None, :]
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))
        expect = (self.params.n_samples, self.grid.n_points)
        if self.values.shape != expect:
            raise ValueError(f"values must have shape {expect}, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("snapshot values must be finite")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]


def morlet_eval(x: float, f: float, n: float) -> float:
    """Real Morlet wavelet: cosine carrier under a Gaussian window.

    The window width is slaved to the carrier frequency through the cycle
    count, h = n / (2 pi f), so the value at x = 0 is always 1.
    """
    x, f, n = float(x), float(f), float(n)
    if not (math.isfinite(x) and math.isfinite(f) and math.isfinite(n)):
        raise ValueError("morlet_eval requires finite inputs")
    if f <= 0.0:
        raise ValueError("frequency must be positive")
    if n < 1.0:
        raise ValueError("cycle count must be at least 1")
    h = n / (2.0 * math.pi * f)
    return math.cos(2.0 * math.pi * f * x) * math.exp(-(x * x) / (2.0 * h * h))


def morlet_response(params: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Vectorized Morlet responses: row i holds u(x_1..x_M; f_i, n_i)."""
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    x = np.asarray(points, dtype=np.float64).reshape(-1)
    f = params[:, 0][:, None]
    n = params[:, 1][:, None]
    if (f <= 0).any() or (n < 1).any():
        raise ValueError("invalid Morlet parameters")
    h = n / (2.0 * np.pi * f)
    return np.cos(2.0 * np.pi * f * x[None, :]) * np.exp(-(x[None, :] ** 2) / (2.0 * h * h))


def generate_morlet_set(n_snapshots: int, n_intervals: int, seed: int) -> SnapshotSet:
    """Sample the Morlet test problem on [-1, 1].

    The time axis is divided into ``n_intervals`` equal intervals, giving
    ``n_intervals + 1`` grid nodes.  Frequencies are uniform on [2, 50] and
    cycle counts uniform over {2, 3, 4, 5}.  Deterministic given the seed.
    """
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    if n_intervals < 2:
        raise ValueError("need at least two grid intervals")
    rng = np.random.default_rng(seed)
    f_lo, f_hi = MORLET_FREQ_RANGE
    freqs = rng.uniform(f_lo, f_hi, size=n_snapshots)
    cycles = rng.integers(MORLET_CYCLE_CHOICES[0], MORLET_CYCLE_CHOICES[-1] + 1,
                          size=n_snapshots).astype(np.float64)
    nodes = np.linspace(-1.0, 1.0, n_intervals + 1)
    grid = PhysicalGrid(nodes[:, None], np.array([[-1.0, 1.0]]))
    params = ParameterSet(
        np.column_stack([freqs, cycles]),
        bounds=np.array([[f_lo, f_hi],
                         [MORLET_CYCLE_CHOICES[0], MORLET_CYCLE_CHOICES[-1]]]),
        integer_mask=np.array([False, True]),
    )
    values = morlet_response(params.samples, nodes)
    return SnapshotSet(grid, params, values, noise_sigma=0.0)


def add_noise(s: SnapshotSet, sigma: float, seed: int) -> SnapshotSet:
    """Perturb every entry with independent N(0, sigma^2) sensor noise."""
    sigma = float(sigma)
    if sigma < 0:
        raise ValueError("noise level must be nonnegative")
    if sigma == 0.0:
        return SnapshotSet(s.grid, s.params, s.values, noise_sigma=0.0)
    rng = np.random.default_rng(seed)
    noisy = s.values + rng.normal(0.0, sigma, size=s.values.shape)
    return SnapshotSet(s.grid, s.params, noisy, noise_sigma=sigma)


def split(s: SnapshotSet, n_train: int, seed: int) -> tuple[SnapshotSet, SnapshotSet]:
    """Disjoint row split by shuffled indices; both halves share the grid."""
    n_train = int(n_train)
    if not 0 < n_train < s.n_snapshots:
        raise ValueError(f"n_train must be in (0, {s.n_snapshots})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(s.n_snapshots)
    idx_train = np.sort(perm[:n_train])
    idx_test = np.sort(perm[n_train:])
    train = SnapshotSet(s.grid, s.params.take(idx_train), s.values[idx_train], s.noise_sigma)
    test = SnapshotSet(s.grid, s.params.take(idx_test), s.values[idx_test], s.noise_sigma)
    return train, test


def _fmt(v: float) -> str:
    # repr of a Python float round-trips the exact double
    return repr(float(v))


def _grid_path(path: Path) -> Path:
    return path.with_name(path.name + ".grid")


def write_snapshots(s: SnapshotSet, path) -> None:
    """Write the line-oriented text snapshot format.

    Line 1 is the header ``D M d m noise_sigma``; each following line holds
    the d parameter values then the M responses of one snapshot, at full
    decimal precision.  The grid goes to a sibling file ``<name>.grid``
    with M lines of m coordinates.
    """
    path = Path(path)
    d = s.params.dim
    with open(path, "w") as fh:
        fh.write(f"{s.n_snapshots} {s.n_points} {d} {s.grid.dim} {_fmt(s.noise_sigma)}\n")
        for i in range(s.n_snapshots):
            row = np.concatenate([s.params.samples[i], s.values[i]])
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    with open(_grid_path(path), "w") as fh:
        for p in s.grid.points:
            fh.write(" ".join(_fmt(v) for v in p) + "\n")


def read_snapshots(path) -> SnapshotSet:
    """Read the text snapshot format written by :func:`write_snapshots`.

    Parameter bounds and the grid bounding box are recovered as the tight
    per-coordinate ranges; integer flags are not stored in the format and
    come back cleared.
    """
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise SnapshotFormatError(f"{path}: header must have 5 fields, got {len(header)}")
        try:
            n_snap, n_pts, d, m = (int(t) for t in header[:4])
            noise_sigma = float(header[4])
        except ValueError as exc:
            raise SnapshotFormatError(f"{path}: unreadable header: {header}") from exc
        if min(n_snap, n_pts, d, m) < 1 or noise_sigma < 0:
            raise SnapshotFormatError(f"{path}: header values out of range")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != d + n_pts:
                raise SnapshotFormatError(
                    f"{path}:{lineno}: expected {d + n_pts} fields, got {len(fields)}")
            try:
                rows.append(np.array(fields, dtype=np.float64))
            except ValueError as exc:
                raise SnapshotFormatError(f"{path}:{lineno}: unreadable number") from exc
    if len(rows) != n_snap:
        raise SnapshotFormatError(f"{path}: header promises {n_snap} snapshots, found {len(rows)}")
    table = np.vstack(rows)
    if not np.isfinite(table).all():
        raise SnapshotFormatError(f"{path}: non-finite entries")

    gpath = _grid_path(path)
    if not gpath.exists():
        raise SnapshotFormatError(f"missing grid file {gpath}")
    try:
        pts = np.loadtxt(gpath, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise SnapshotFormatError(f"{gpath}: unreadable grid file") from exc
    if pts.shape != (n_pts, m):
        raise SnapshotFormatError(f"{gpath}: expected {n_pts} x {m} grid, got {pts.shape}")
    if not np.isfinite(pts).all():
        raise SnapshotFormatError(f"{gpath}: non-finite grid coordinates")

    samples = table[:, :d]
    values = table[:, d:]
    pbounds = np.column_stack([samples.min(axis=0), samples.max(axis=0)])
    gbounds = np.column_stack([pts.min(axis=0), pts.max(axis=0)])
    grid = PhysicalGrid(pts, gbounds)
    params = ParameterSet(samples, pbounds)
    return SnapshotSet(grid, params, values, noise_sigma=noise_sigma)
