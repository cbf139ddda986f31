import math

import numpy as np
import pytest

from Autodiff import Tensor
from Common import ConfigurationError, ContractError, FormatError, NoiseConfig
from Simulator import (
    MAGIC,
    PendulumParams,
    PendulumState,
    TrueStateArray,
    add_control_noise,
    add_measurement_noise,
    angular_acceleration,
    energy,
    generate_dataset,
    load_dataset,
    render,
    step_dynamics,
    wrap_angle,
)


@pytest.fixture
def params():
    return PendulumParams(
        mass=1.0,
        length=1.0,
        gravity=10.0,
        dt=0.05,
        torque_limit=2.0,
        max_speed=8.0,
        dynamics_std=0.0,
    )


@pytest.fixture
def quiet():
    return NoiseConfig(measurement_variance=0.0, control_variance=0.0, dynamics_variance=0.0)


def _generate(path, params, noise, count=10, seed=7, episode_length=4, **kwargs):
    return generate_dataset(
        path, count, episode_length, params, noise, 16, 16, 1, seed, **kwargs
    )


class TestDynamics:
    def test_equilibrium_is_fixed(self, params):
        rng = np.random.default_rng(0)
        state = step_dynamics(PendulumState(0.0, 0.0), 0.0, params, rng)
        assert state == PendulumState(0.0, 0.0)

    def test_horizontal_acceleration(self, params):
        state = PendulumState(math.pi / 2, 0.0)
        assert angular_acceleration(state, 0.0, params) == pytest.approx(-10.0)

    def test_semi_implicit_update(self, params):
        rng = np.random.default_rng(0)
        state = step_dynamics(PendulumState(math.pi / 2, 0.0), 0.0, params, rng)
        assert state.velocity == pytest.approx(-0.5)
        assert state.angle == pytest.approx(math.pi / 2 - 0.025)

    def test_torque_is_clamped(self, params):
        start = PendulumState(0.3, -0.2)
        clamped = step_dynamics(start, 100.0, params, np.random.default_rng(0))
        limit = step_dynamics(start, 2.0, params, np.random.default_rng(0))
        assert clamped == limit

    def test_velocity_is_clamped(self, params):
        state = step_dynamics(PendulumState(0.0, 7.99), -2.0, params, np.random.default_rng(0))
        assert state.velocity == 8.0

    def test_deterministic_without_disturbance(self, params):
        def run():
            rng = np.random.default_rng(3)
            state = PendulumState(1.0, 0.5)
            for torque in np.linspace(-2, 2, 50):
                state = step_dynamics(state, float(torque), params, rng)
            return state

        assert run() == run()

    def test_disturbance_uses_generator(self, params):
        from dataclasses import replace

        noisy = replace(params, dynamics_std=5.0)
        a = step_dynamics(PendulumState(0.0, 0.0), 0.0, noisy, np.random.default_rng(1))
        b = step_dynamics(PendulumState(0.0, 0.0), 0.0, noisy, np.random.default_rng(2))
        assert a != b

    def test_invalid_params(self):
        with pytest.raises(ConfigurationError):
            PendulumParams(
                mass=0.0,
                length=1.0,
                gravity=10.0,
                dt=0.05,
                torque_limit=2.0,
                max_speed=8.0,
                dynamics_std=0.0,
            )

    def test_energy_is_nearly_conserved(self, params):
        rng = np.random.default_rng(0)
        state = PendulumState(1.0, 0.0)
        energies = []
        for _ in range(1000):
            state = step_dynamics(state, 0.0, params, rng)
            energies.append(energy(state, params))

        # Semi-implicit Euler oscillates around a conserved value; compare windowed means
        windows = np.asarray(energies).reshape(10, 100).mean(axis=1)
        drift = np.abs(np.diff(windows)) / windows[:-1]
        assert np.all(drift < 0.02)

    def test_angle_stays_wrapped(self, params):
        rng = np.random.default_rng(5)
        state = PendulumState(3.0, 8.0)
        for torque in rng.uniform(-2, 2, size=2000):
            state = step_dynamics(state, float(torque), params, rng)
            assert -math.pi < state.angle <= math.pi


class TestWrapAngle:
    def test_boundaries(self):
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(0.0) == 0.0

    def test_array_range_and_equivalence(self):
        angles = np.random.default_rng(0).uniform(-50, 50, size=1000)
        wrapped = wrap_angle(angles)
        assert np.all(wrapped > -math.pi) and np.all(wrapped <= math.pi)
        np.testing.assert_allclose(np.sin(wrapped), np.sin(angles), atol=1e-9)
        np.testing.assert_allclose(np.cos(wrapped), np.cos(angles), atol=1e-9)


class TestRender:
    def test_upright_rod(self):
        image = render(PendulumState(0.0, 0.0), 32, 32)
        assert image.shape == (32, 32)
        assert image[16 - 3, 16] == pytest.approx(1.0)
        assert image[16 + 3, 16] == 0.0
        assert image[0, 0] == 0.0

    def test_values_in_unit_interval(self):
        for angle in np.linspace(-math.pi, math.pi, 13):
            image = render(PendulumState(float(angle), 0.0), 24, 40)
            assert image.min() >= 0.0 and image.max() <= 1.0

    def test_mirror_symmetry(self):
        for angle in (0.3, 1.2, 2.9, -0.7):
            image = render(PendulumState(angle, 0.0), 32, 32)
            mirrored = render(PendulumState(-angle, 0.0), 32, 32)
            np.testing.assert_allclose(image[:, ::-1], mirrored, atol=1e-6)

    def test_deterministic(self):
        state = PendulumState(0.77, 0.0)
        np.testing.assert_array_equal(render(state, 32, 32), render(state, 32, 32))

    def test_too_small(self):
        with pytest.raises(ConfigurationError):
            render(PendulumState(0.0, 0.0), 8, 32)


class TestNoise:
    def test_zero_variance_is_identity(self):
        frames = np.random.default_rng(0).random((4, 2, 16, 16)).astype(np.float32)
        noisy = add_measurement_noise(frames, 0.0, np.random.default_rng(1))
        np.testing.assert_array_equal(noisy, frames)
        assert add_control_noise(1.25, 0.0, np.random.default_rng(1)) == 1.25

    def test_measurement_statistics(self):
        frames = np.zeros((100, 2, 32, 32), dtype=np.float32)
        noisy = add_measurement_noise(frames, 0.25, np.random.default_rng(2))
        difference = (noisy - frames).astype(np.float64)
        assert 0.24 <= difference.var() <= 0.26
        assert -0.01 <= difference.mean() <= 0.01

    def test_measurement_noise_is_not_clamped(self):
        frames = np.ones((10, 2, 16, 16), dtype=np.float32)
        noisy = add_measurement_noise(frames, 0.5, np.random.default_rng(3))
        assert noisy.max() > 1.0 and noisy.min() < 0.0

    def test_control_statistics(self):
        torques = add_control_noise(np.zeros(100_000), 0.49, np.random.default_rng(4))
        assert 0.69 <= torques.std() <= 0.71

    def test_noisy_torque_is_clamped_by_dynamics(self, params):
        noisy = add_control_noise(1.9, 1.5, np.random.default_rng(9))
        start = PendulumState(0.4, 0.0)
        expected = min(max(noisy, -2.0), 2.0)
        a = step_dynamics(start, noisy, params, np.random.default_rng(0))
        b = step_dynamics(start, expected, params, np.random.default_rng(0))
        assert a == b

    def test_negative_variance(self):
        with pytest.raises(ConfigurationError):
            add_control_noise(0.0, -1.0, np.random.default_rng(0))


class TestDataset:
    def test_exact_count_and_layout(self, tmp_path, params, quiet):
        dataset = _generate(tmp_path / "d.bin", params, quiet)
        assert len(dataset) == 10
        assert dataset.frames.shape == (10, 2, 16, 16)
        assert dataset.frames.dtype == np.float32
        assert dataset.frames.min() >= 0.0 and dataset.frames.max() <= 1.0
        assert np.all(np.abs(dataset.controls) <= 2.0)

    def test_consecutive_transitions_share_frames(self, tmp_path, params, quiet):
        dataset = _generate(tmp_path / "d.bin", params, quiet)
        for index in (0, 1, 2, 4, 5, 6, 8):
            np.testing.assert_array_equal(dataset[index].next_frames, dataset[index + 1].frames)
            assert dataset[index].next_state == dataset[index + 1].state

        assert dataset.episode_slice(5) == slice(4, 8)
        assert dataset.episode_slice(9) == slice(8, 10)

    def test_byte_identical_runs(self, tmp_path, params, quiet):
        _generate(tmp_path / "a.bin", params, quiet)
        _generate(tmp_path / "b.bin", params, quiet)
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_seed_changes_data(self, tmp_path, params, quiet):
        _generate(tmp_path / "a.bin", params, quiet, seed=7)
        _generate(tmp_path / "b.bin", params, quiet, seed=8)
        assert (tmp_path / "a.bin").read_bytes() != (tmp_path / "b.bin").read_bytes()

    def test_parallel_generation_matches_inline(self, tmp_path, params, quiet):
        _generate(tmp_path / "a.bin", params, quiet, workers=1)
        _generate(tmp_path / "b.bin", params, quiet, workers=2)
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_round_trip(self, tmp_path, params, quiet):
        path = tmp_path / "d.bin"
        original = _generate(path, params, quiet)
        loaded = load_dataset(path)

        assert loaded.header == original.header
        for name in original.records.dtype.names:
            np.testing.assert_array_equal(loaded.records[name], original.records[name])

    def test_true_states_cannot_enter_a_model(self, tmp_path, params, quiet):
        dataset = _generate(None, params, quiet)
        assert isinstance(dataset.states, TrueStateArray)
        with pytest.raises(ContractError):
            Tensor(dataset.states)
        with pytest.raises(ContractError):
            Tensor(dataset.next_states[:3])
        Tensor(dataset.frames)

    def test_truncated_file(self, tmp_path, params, quiet):
        path = tmp_path / "d.bin"
        _generate(path, params, quiet)
        data = path.read_bytes()[:-10]
        path.write_bytes(data)

        with pytest.raises(FormatError) as info:
            load_dataset(path)
        assert info.value.offset == len(data)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "d.bin"
        path.write_bytes(MAGIC + b"\x01\x00\x10")
        with pytest.raises(FormatError):
            load_dataset(path)

    def test_wrong_magic(self, tmp_path, params, quiet):
        path = tmp_path / "d.bin"
        _generate(path, params, quiet)
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])

        with pytest.raises(FormatError, match="LDKL") as info:
            load_dataset(path)
        assert info.value.offset == 0

    def test_wrong_version(self, tmp_path, params, quiet):
        path = tmp_path / "d.bin"
        _generate(path, params, quiet)
        data = path.read_bytes()
        path.write_bytes(data[:4] + (2).to_bytes(2, "little") + data[6:])

        with pytest.raises(FormatError) as info:
            load_dataset(path)
        assert info.value.offset == 4

    def test_trailing_bytes(self, tmp_path, params, quiet):
        path = tmp_path / "d.bin"
        _generate(path, params, quiet)
        size = path.stat().st_size
        path.write_bytes(path.read_bytes() + b"\x00")

        with pytest.raises(FormatError) as info:
            load_dataset(path)
        assert info.value.offset == size

    def test_rejects_empty_request(self, params, quiet):
        with pytest.raises(ConfigurationError):
            _generate(None, params, quiet, count=0)
