"""Grid metric, learning rule, training loop, and checkpoint format."""

import math
import struct

import numpy as np
import pytest

import somcodes as sc
from somcodes import som
from somcodes.errors import FormatError, InvalidArgumentError


def _zero_grid(m=2, n=2, dim=2):
    return sc.SomGrid(m=m, n=n, dim=dim, weights=np.zeros((m * n, dim), dtype=np.float32))


class TestGridDistance:
    def test_wraparound_corner(self):
        grid = sc.init_grid(10, 10, 3)
        assert sc.grid_distance((0, 0), (9, 9), grid) == pytest.approx(math.sqrt(2.0))

    def test_planar_corner(self):
        grid = sc.init_grid(10, 10, 3, topology="planar")
        assert sc.grid_distance((0, 0), (9, 9), grid) == pytest.approx(9 * math.sqrt(2.0))

    def test_identity_and_symmetry(self):
        grid = sc.init_grid(5, 7, 2)
        assert sc.grid_distance((2, 3), (2, 3), grid) == 0.0
        d_ab = sc.grid_distance((0, 1), (4, 6), grid)
        d_ba = sc.grid_distance((4, 6), (0, 1), grid)
        assert d_ab == d_ba

    def test_half_extent_is_maximal_per_axis(self):
        grid = sc.init_grid(8, 8, 2)
        # on an 8-ring no two cells are more than 4 apart
        for col in range(8):
            assert sc.grid_distance((0, 0), (0, col), grid) <= 4.0


class TestUpdateStep:
    def test_hand_worked_two_by_two(self):
        grid = _zero_grid()
        cfg = sc.TrainConfig(sigma0=1.0, alpha0=0.5, tau=1)
        sc.update_step(grid, np.array([1.0, 0.0]), 0, cfg)
        expected = np.array(
            [
                [0.5, 0.0],  # BMU: theta = 1 exactly
                [0.30326533, 0.0],  # D = 1
                [0.30326533, 0.0],  # D = 1
                [0.18393972, 0.0],  # D = sqrt(2)
            ]
        )
        np.testing.assert_allclose(grid.weights, expected, atol=1e-7)

    def test_bmu_coefficient_is_exactly_one(self):
        # theta(D=0) = exp(0) = 1, so the BMU lands exactly on alpha0 * x
        grid = _zero_grid()
        cfg = sc.TrainConfig(sigma0=1.0, alpha0=0.5, tau=1)
        sc.update_step(grid, np.array([1.0, 0.0]), 0, cfg)
        assert grid.weights[0, 0] == np.float32(0.5)

    def test_negative_step_index_rejected(self):
        grid = _zero_grid()
        cfg = sc.TrainConfig(tau=1)
        with pytest.raises(InvalidArgumentError):
            sc.update_step(grid, np.array([1.0, 0.0]), -1, cfg)

    def test_dim_mismatch_rejected(self):
        grid = _zero_grid()
        cfg = sc.TrainConfig(tau=1)
        with pytest.raises(InvalidArgumentError):
            sc.update_step(grid, np.array([1.0, 0.0, 0.0]), 0, cfg)


class TestTrainConfig:
    def test_decay_schedules(self):
        cfg = sc.TrainConfig(sigma0=4.0, alpha0=0.2, tau=100)
        assert cfg.sigma(0) == 4.0
        assert cfg.alpha(0) == 0.2
        assert cfg.sigma(100) == pytest.approx(4.0 * math.exp(-1.0))
        assert cfg.alpha(200) == pytest.approx(0.2 * math.exp(-2.0))

    def test_split_time_constants(self):
        cfg = sc.TrainConfig(sigma0=1.0, alpha0=1.0, tau=10, tau_sigma=5, tau_alpha=20)
        assert cfg.sigma(5) == pytest.approx(math.exp(-1.0))
        assert cfg.alpha(20) == pytest.approx(math.exp(-1.0))

    def test_resolve_tau_default_is_full_schedule(self):
        cfg = som.resolve_tau(sc.TrainConfig(epochs=5), n_samples=128)
        assert cfg.tau == 5 * 128

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            sc.TrainConfig(sigma0=0.0).validate()
        with pytest.raises(InvalidArgumentError):
            sc.TrainConfig(epochs=0).validate()
        with pytest.raises(InvalidArgumentError):
            sc.TrainConfig(decay="linear").validate()
        with pytest.raises(InvalidArgumentError):
            sc.TrainConfig(tau=0).validate()


class TestBmu:
    def test_tie_breaks_to_lowest_row_major_index(self):
        grid = _zero_grid(3, 3, 2)
        bmu = sc.find_bmu(grid, np.array([1.0, 1.0]))
        assert (bmu.row, bmu.col) == (0, 0)

    def test_quantization_error_is_euclidean(self):
        grid = _zero_grid(2, 2, 2)
        bmu = sc.find_bmu(grid, np.array([3.0, 4.0]))
        assert bmu.quantization_error == pytest.approx(5.0)

    def test_assign_bmus_indices_and_shapes(self):
        grid = sc.init_grid(4, 4, 3, seed=0)
        vectors = np.random.default_rng(1).random((10, 3)).astype(np.float32)
        assigns = sc.assign_bmus(grid, vectors)
        assert [a.sample_index for a in assigns] == list(range(10))
        assert all(0 <= a.row < 4 and 0 <= a.col < 4 for a in assigns)

    def test_assign_bmus_rejects_wrong_dim(self):
        grid = sc.init_grid(4, 4, 3)
        with pytest.raises(InvalidArgumentError):
            sc.assign_bmus(grid, np.zeros((5, 2)))


class TestMovingAverage:
    def test_hand_worked(self):
        trace = sc.LossTrace(np.array([1.0, 2.0, 3.0, 4.0]), window=2)
        np.testing.assert_allclose(
            sc.moving_average(trace), [1.0, 5.0 / 3.0, 7.0 / 3.0], rtol=1e-12
        )

    def test_first_element_is_one(self):
        trace = sc.LossTrace(np.random.default_rng(0).random(50) + 0.1, window=7)
        assert sc.moving_average(trace)[0] == 1.0

    def test_window_longer_than_trace_is_empty(self):
        trace = sc.LossTrace(np.ones(3), window=10)
        assert sc.moving_average(trace).size == 0

    def test_bad_window_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sc.moving_average(sc.LossTrace(np.ones(3), window=0))


class TestTrain:
    def test_deterministic(self):
        data = np.random.default_rng(0).random((64, 4)).astype(np.float32)
        runs = []
        for _ in range(2):
            grid = sc.init_grid(6, 6, 4, seed=9)
            grid, _ = sc.train(grid, data, sc.TrainConfig(epochs=2, seed=9))
            runs.append(grid.weights.copy())
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_max_updates_caps_trace(self):
        data = np.random.default_rng(0).random((64, 4)).astype(np.float32)
        grid = sc.init_grid(4, 4, 4, seed=0)
        _, trace = sc.train(grid, data, sc.TrainConfig(epochs=2, max_updates=10))
        assert len(trace.errors) == 10

    def test_error_recorded_before_update(self):
        data = np.array([[1.0, 0.0]], dtype=np.float32)
        grid = sc.init_grid(3, 3, 2, seed=4)
        before = sc.find_bmu(grid, data[0]).quantization_error
        _, trace = sc.train(grid, data, sc.TrainConfig(epochs=1))
        assert trace.errors[0] == pytest.approx(before)

    def test_quantization_error_shrinks(self):
        data = np.random.default_rng(2).random((256, 4)).astype(np.float32)
        grid = sc.init_grid(8, 8, 4, seed=2)
        _, trace = sc.train(
            grid, data, sc.TrainConfig(sigma0=2.0, alpha0=0.3, epochs=4, seed=2)
        )
        assert trace.errors[-128:].mean() < trace.errors[:128].mean()

    def test_accepts_hlr_duck_type(self, hlr_sets):
        hs = hlr_sets["L2"]
        grid = sc.init_grid(4, 4, hs.dim, seed=0)
        sc.train(grid, hs, sc.TrainConfig(epochs=1, max_updates=32))

    def test_rejects_empty_or_mismatched_data(self):
        grid = sc.init_grid(3, 3, 2)
        with pytest.raises(InvalidArgumentError):
            sc.train(grid, np.empty((0, 2)), sc.TrainConfig())
        with pytest.raises(InvalidArgumentError):
            sc.train(grid, np.ones((4, 5)), sc.TrainConfig())


class TestCheckpointFormat:
    def test_round_trip(self, tmp_path):
        grid = sc.init_grid(5, 3, 7, seed=11, topology="planar")
        path = tmp_path / "grid.som"
        sc.save_som(grid, path)
        loaded = sc.load_som(path)
        assert (loaded.m, loaded.n, loaded.dim) == (5, 3, 7)
        assert loaded.topology == "planar"
        np.testing.assert_array_equal(loaded.weights, grid.weights)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "grid.som"
        sc.save_som(sc.init_grid(2, 2, 2), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            sc.load_som(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "grid.som"
        sc.save_som(sc.init_grid(2, 2, 2), path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version"):
            sc.load_som(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "grid.som"
        sc.save_som(sc.init_grid(2, 2, 2), path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError):
            sc.load_som(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "grid.som"
        sc.save_som(sc.init_grid(2, 2, 2), path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            sc.load_som(path)

    def test_unknown_topology_code(self, tmp_path):
        path = tmp_path / "grid.som"
        sc.save_som(sc.init_grid(2, 2, 2), path)
        raw = bytearray(path.read_bytes())
        raw[20] = 7  # topology byte follows magic + 4 u32 fields
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="topology"):
            sc.load_som(path)


class TestInitGrid:
    def test_rows_unit_normalized(self):
        grid = sc.init_grid(6, 6, 16, seed=3)
        norms = np.linalg.norm(grid.weights.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_deterministic(self):
        a = sc.init_grid(4, 4, 8, seed=5)
        b = sc.init_grid(4, 4, 8, seed=5)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_invalid_args(self):
        with pytest.raises(InvalidArgumentError):
            sc.init_grid(0, 4, 8)
        with pytest.raises(InvalidArgumentError):
            sc.init_grid(4, 4, 8, topology="hex")
