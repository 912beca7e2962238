import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvaegprr import dataset
from cvaegprr.dataset import (
    ParameterSet,
    PhysicalGrid,
    SnapshotFormatError,
    SnapshotSet,
    add_noise,
    generate_morlet_set,
    morlet_eval,
    morlet_response,
    read_snapshots,
    split,
    write_snapshots,
)

# frozen oracle: cos(2 pi f x) exp(-x^2/(2 h^2)) with h = n/(2 pi f),
# evaluated at 50-digit precision before the build
MORLET_QUARTER = -0.29121293321402086  # x=0.25, f=2, n=2
MORLET_HIGH_F = 0.0008200746635147071  # x=0.1, f=30, n=5


class TestMorletEval:
    def test_value_at_origin(self):
        assert morlet_eval(0.0, 2.0, 2) == 1.0
        assert morlet_eval(0.0, 30.0, 5) == 1.0

    def test_frozen_values(self):
        assert morlet_eval(0.25, 2.0, 2) == pytest.approx(MORLET_QUARTER, rel=1e-13)
        assert morlet_eval(0.1, 30.0, 5) == pytest.approx(MORLET_HIGH_F, rel=1e-13)

    @given(f=st.floats(2.0, 50.0), n=st.integers(2, 5))
    def test_origin_is_one(self, f, n):
        assert morlet_eval(0.0, f, n) == 1.0

    @given(x=st.floats(-1.0, 1.0), f=st.floats(2.0, 50.0), n=st.integers(2, 5))
    def test_even_in_x(self, x, f, n):
        assert morlet_eval(x, f, n) == pytest.approx(morlet_eval(-x, f, n), rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("bad", [
        (math.nan, 2.0, 2), (0.1, math.inf, 2), (0.1, 2.0, math.nan),
        (0.1, 0.0, 2), (0.1, -1.0, 2), (0.1, 2.0, 0.5),
    ])
    def test_rejects_bad_inputs(self, bad):
        with pytest.raises(ValueError):
            morlet_eval(*bad)

    def test_matches_vectorized(self):
        params = np.array([[3.0, 2.0], [11.5, 4.0]])
        pts = np.linspace(-1, 1, 7)
        table = morlet_response(params, pts)
        for i, (f, n) in enumerate(params):
            for j, x in enumerate(pts):
                assert table[i, j] == pytest.approx(morlet_eval(x, f, n), rel=1e-14)


class TestGenerate:
    def test_paper_scale_shape(self):
        s = generate_morlet_set(1000, 500, seed=11)
        assert s.values.shape == (1000, 501)
        assert s.grid.points.shape == (501, 1)
        assert s.noise_sigma == 0.0

    def test_tiny_grid_origin_column(self):
        s = generate_morlet_set(1, 2, seed=0)
        assert s.values.shape == (1, 3)
        assert s.values[0, 1] == 1.0  # x = 0 node

    def test_deterministic(self):
        a = generate_morlet_set(2, 4, seed=123)
        b = generate_morlet_set(2, 4, seed=123)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.params.samples, b.params.samples)

    def test_parameter_ranges(self):
        s = generate_morlet_set(300, 10, seed=5)
        f, n = s.params.samples[:, 0], s.params.samples[:, 1]
        assert f.min() >= 2.0 and f.max() <= 50.0
        assert set(np.unique(n)) <= {2.0, 3.0, 4.0, 5.0}
        assert s.params.integer_mask.tolist() == [False, True]

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ValueError):
            generate_morlet_set(0, 10, seed=0)
        with pytest.raises(ValueError):
            generate_morlet_set(3, 1, seed=0)


class TestAddNoise:
    def test_zero_sigma_is_identity(self):
        s = generate_morlet_set(4, 6, seed=2)
        out = add_noise(s, 0.0, seed=9)
        assert np.array_equal(out.values, s.values)
        assert out.noise_sigma == 0.0

    def test_noise_level_law_of_large_numbers(self):
        # D * M = 200 * 501 >= 1e5 entries
        s = generate_morlet_set(200, 500, seed=3)
        noisy = add_noise(s, 0.1, seed=4)
        observed = (noisy.values - s.values).std()
        assert abs(observed - 0.1) / 0.1 < 0.05
        assert noisy.noise_sigma == 0.1

    def test_paper_low_noise_level(self):
        s = generate_morlet_set(5, 6, seed=0)
        noisy = add_noise(s, 0.01, seed=1)
        assert noisy.noise_sigma == 0.01
        assert not np.array_equal(noisy.values, s.values)

    def test_deterministic(self):
        s = generate_morlet_set(5, 6, seed=0)
        a = add_noise(s, 0.3, seed=42)
        b = add_noise(s, 0.3, seed=42)
        assert np.array_equal(a.values, b.values)

    def test_negative_sigma_rejected(self):
        s = generate_morlet_set(2, 4, seed=0)
        with pytest.raises(ValueError):
            add_noise(s, -0.1, seed=0)


class TestSplit:
    def test_half_split(self):
        s = generate_morlet_set(1000, 10, seed=7)
        train, test = split(s, 500, seed=8)
        assert train.n_snapshots == 500 and test.n_snapshots == 500
        assert train.grid is s.grid and test.grid is s.grid

    def test_two_rows(self):
        s = generate_morlet_set(2, 4, seed=7)
        train, test = split(s, 1, seed=8)
        assert train.n_snapshots == 1 and test.n_snapshots == 1

    def test_partition_property(self):
        s = generate_morlet_set(31, 6, seed=7)
        train, test = split(s, 13, seed=8)
        combined = np.vstack([train.params.samples, test.params.samples])
        original = np.sort(s.params.samples.view("f8,f8").ravel())
        recovered = np.sort(combined.view("f8,f8").ravel())
        assert np.array_equal(original, recovered)

    @pytest.mark.parametrize("n_train", [0, 31, 40])
    def test_bad_n_train(self, n_train):
        s = generate_morlet_set(31, 6, seed=7)
        with pytest.raises(ValueError):
            split(s, n_train, seed=0)


class TestFileRoundTrip:
    def test_round_trip_exact(self, tmp_path):
        s = add_noise(generate_morlet_set(7, 9, seed=1), 0.05, seed=2)
        path = tmp_path / "snap.txt"
        write_snapshots(s, path)
        back = read_snapshots(path)
        assert np.array_equal(back.values, s.values)
        assert np.array_equal(back.params.samples, s.params.samples)
        assert np.array_equal(back.grid.points, s.grid.points)
        assert back.noise_sigma == s.noise_sigma

    def test_rewrite_is_byte_identical(self, tmp_path):
        s = add_noise(generate_morlet_set(4, 5, seed=1), 0.2, seed=2)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        write_snapshots(s, p1)
        write_snapshots(read_snapshots(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_row_mismatch(self, tmp_path):
        s = generate_morlet_set(3, 4, seed=1)
        path = tmp_path / "snap.txt"
        write_snapshots(s, path)
        lines = path.read_text().splitlines()
        lines[0] = "3 6 2 1 0.0"  # header claims M=6, rows carry 5 values
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SnapshotFormatError):
            read_snapshots(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "snap.txt"
        path.write_text("3 x 2 1 0.0\n")
        with pytest.raises(SnapshotFormatError):
            read_snapshots(path)
        path.write_text("3 4 2\n")
        with pytest.raises(SnapshotFormatError):
            read_snapshots(path)

    def test_non_finite_entries(self, tmp_path):
        s = generate_morlet_set(2, 3, seed=1)
        path = tmp_path / "snap.txt"
        write_snapshots(s, path)
        text = path.read_text().replace(repr(float(s.values[0, 0])), "nan", 1)
        path.write_text(text)
        with pytest.raises(SnapshotFormatError):
            read_snapshots(path)

    def test_missing_grid_file(self, tmp_path):
        s = generate_morlet_set(2, 3, seed=1)
        path = tmp_path / "snap.txt"
        write_snapshots(s, path)
        (tmp_path / "snap.txt.grid").unlink()
        with pytest.raises(SnapshotFormatError):
            read_snapshots(path)

    def test_missing_rows(self, tmp_path):
        s = generate_morlet_set(3, 3, seed=1)
        path = tmp_path / "snap.txt"
        write_snapshots(s, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(SnapshotFormatError):
            read_snapshots(path)

    def test_external_cavity_layout(self, tmp_path):
        # ingesting a 2D-field dataset: 200 cases on a 51 x 51 node mesh
        rng = np.random.default_rng(9)
        nodes = np.stack(np.meshgrid(np.linspace(0, 1, 51), np.linspace(0, 1, 51)),
                         axis=-1).reshape(-1, 2)
        grid = PhysicalGrid(nodes, np.array([[0.0, 1.0], [0.0, 1.0]]))
        params = ParameterSet(rng.uniform(1.0, 2.0, size=(200, 3)),
                              np.array([[1.0, 2.0]] * 3))
        s = SnapshotSet(grid, params, rng.normal(size=(200, 2601)), noise_sigma=0.1)
        path = tmp_path / "cavity.txt"
        write_snapshots(s, path)
        back = read_snapshots(path)
        assert back.n_points == 2601
        assert back.n_snapshots == 200
        assert back.grid.dim == 2 and back.params.dim == 3
        assert np.array_equal(back.values, s.values)


class TestTypeInvariants:
    def test_grid_point_outside_box(self):
        with pytest.raises(ValueError):
            PhysicalGrid(np.array([[0.0], [2.0]]), np.array([[-1.0, 1.0]]))

    def test_param_outside_bounds(self):
        with pytest.raises(ValueError):
            ParameterSet(np.array([[3.0]]), np.array([[0.0, 2.0]]))

    def test_integer_flag_violation(self):
        with pytest.raises(ValueError):
            ParameterSet(np.array([[2.5]]), np.array([[0.0, 5.0]]), integer_mask=[True])

    def test_values_shape_must_match(self):
        grid = PhysicalGrid(np.zeros((3, 1)), np.array([[-1.0, 1.0]]))
        params = ParameterSet(np.zeros((2, 1)), np.array([[-1.0, 1.0]]))
        with pytest.raises(ValueError):
            SnapshotSet(grid, params, np.zeros((2, 4)))

    def test_values_must_be_finite(self):
        grid = PhysicalGrid(np.zeros((2, 1)), np.array([[-1.0, 1.0]]))
        params = ParameterSet(np.zeros((2, 1)), np.array([[-1.0, 1.0]]))
        vals = np.zeros((2, 2))
        vals[0, 0] = np.inf
        with pytest.raises(ValueError):
            SnapshotSet(grid, params, vals)

    def test_values_are_immutable(self):
        s = generate_morlet_set(2, 3, seed=0)
        with pytest.raises(ValueError):
            s.values[0, 0] = 7.0
