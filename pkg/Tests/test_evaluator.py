import math
from dataclasses import replace

import numpy as np
import pytest

from Common import Averaging, DataError, DimensionError, ModelFamily, NoiseConfig, read_rows
from Evaluator import (
    PSNR_CAP,
    Commands,
    CorrelationRow,
    EvalRow,
    LatentRow,
    SweepRow,
    TrajectoryRow,
    argument,
    command,
    corrupt,
    denoising_gain,
    encode_means,
    encode_pgm,
    ensure_meta,
    evaluate,
    image_grid,
    latent_correlation,
    psnr,
    run,
    summarise,
    trajectory,
    uq_sweep,
)
from Simulator import PendulumParams, generate_dataset
from Training import EpochRow, train

TINY_OVERRIDES = """\
# reduced model for command-line tests
model.latent_dim = 2
model.inducing_points = 4
model.filters = 4
model.encoder_hidden = 8
model.forward_hidden = 8
train.batch_size = 8
train.epochs = 1
eval.batch_size = 16
eval.samples = 2
eval.grid_rows = 3
"""


class TestImageMetrics:
    def test_perfect_estimate_hits_the_cap(self):
        clean = np.random.default_rng(0).random((3, 2, 4, 4))
        assert psnr(clean, clean) == PSNR_CAP

    def test_constant_error(self):
        clean = np.zeros((2, 2, 4, 4))
        assert psnr(clean + 0.1, clean) == pytest.approx(20.0)

    def test_denoising_gain(self):
        clean = np.zeros((2, 2, 4, 4))
        gain = denoising_gain(clean + 0.01, clean + 0.1, clean)
        assert gain == pytest.approx(20.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((2, 4, 4)), np.zeros((3, 4, 4)))


class TestLatentCorrelation:
    @staticmethod
    def _states(count, seed=0):
        rng = np.random.default_rng(seed)
        return np.stack([rng.uniform(-np.pi, np.pi, count), rng.normal(size=count)], axis=1)

    def test_exact_sine(self):
        states = self._states(100)
        means = np.stack([np.sin(states[:, 0]), np.cos(states[:, 0])], axis=1)
        result = latent_correlation(means, states)

        assert result.best("sin_angle") == pytest.approx(1.0)
        assert result.best("cos_angle") == pytest.approx(1.0)
        assert result.best_dimension("cos_angle") == 1

    def test_constant_dimension_is_flagged(self):
        states = self._states(50)
        means = np.stack([np.full(50, 0.3), states[:, 1]], axis=1)
        result = latent_correlation(means, states)

        assert result.degenerate.tolist() == [True, False]
        assert np.all(result.values[0] == 0.0)
        assert result.column("velocity")[1] == pytest.approx(1.0)

    def test_noise_is_uncorrelated(self):
        states = self._states(1000)
        means = np.random.default_rng(1).normal(size=(1000, 1))
        assert np.all(np.abs(latent_correlation(means, states).values) < 0.1)

    def test_needs_enough_samples(self):
        with pytest.raises(DataError):
            latent_correlation(np.zeros((29, 2)), self._states(29))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            latent_correlation(np.zeros((40, 2)), self._states(30))


class TestImages:
    def test_pgm_bytes(self):
        data = encode_pgm(np.array([[0.0, 1.0], [0.5, 2.0]]))
        assert data == b"P5\n2 2\n255\n" + bytes([0, 255, 128, 255])

    def test_grid_layout(self):
        columns = [np.zeros((3, 4, 5)), np.full((3, 4, 5), 0.5)]
        grid = image_grid(columns)

        assert grid.shape == (3 * 4 + 2, 2 * 5 + 1)
        assert np.all(grid[:, 5] == 1.0)
        assert np.all(grid[4, :] == 1.0)
        assert grid[0, 6] == 0.5

    def test_grid_rejects_ragged_columns(self):
        with pytest.raises(DimensionError):
            image_grid([np.zeros((3, 4, 5)), np.zeros((2, 4, 5))])


class TestDecorators:
    def test_arguments_keep_written_order(self):
        @command("demo", help="Demo command.")
        @argument("--first", type=int)
        @argument("--second", setting="train.seed")
        def demo(self, args):
            pass

        meta = ensure_meta(demo)
        assert meta["command"] == {"name": "demo", "help": "Demo command."}
        assert [spec["flags"] for spec in meta["arguments"]] == [("--first",), ("--second",)]
        assert meta["arguments"][1]["setting"] == "train.seed"


@pytest.fixture
def sixteen_model(make_model):
    def make(family=ModelFamily.SVDKL, seed=0):
        return make_model(family, seed, height=16, width=16).eval()

    return make


class TestEvaluation:
    def test_clean_inputs_are_untouched(self, small_dataset, quiet_noise):
        frames, controls, next_frames = corrupt(small_dataset, quiet_noise, 0)

        assert np.array_equal(frames, small_dataset.frames)
        assert np.array_equal(controls, small_dataset.controls)
        assert np.array_equal(next_frames, small_dataset.next_frames)

    def test_shapes_and_determinism(self, small_dataset, sixteen_model):
        noise = NoiseConfig(
            measurement_variance=0.1, control_variance=0.1, dynamics_variance=0.0
        )
        options = {"samples": 3, "average": Averaging.Image, "batch_size": 5, "seed": 4}

        first = evaluate(sixteen_model(), small_dataset, noise, **options)
        second = evaluate(sixteen_model(), small_dataset, noise, **options)

        assert first.reconstruction.shape == small_dataset.frames.shape
        assert first.prediction.shape == small_dataset.next_frames.shape
        assert first.encoder_mean.shape == (len(small_dataset), 2)
        assert np.all(first.encoder_std > 0) and np.all(first.forward_std > 0)
        assert np.array_equal(first.reconstruction, second.reconstruction)
        assert np.array_equal(first.prediction, second.prediction)

    def test_single_sample_averaging_modes_agree(
        self, small_dataset, sixteen_model, quiet_noise
    ):
        model = sixteen_model()
        results = [
            evaluate(
                model, small_dataset, quiet_noise, samples=1, average=mode, batch_size=8, seed=0
            )
            for mode in Averaging
        ]
        np.testing.assert_allclose(results[0].reconstruction, results[1].reconstruction)

    def test_batching_does_not_change_results(self, small_dataset, sixteen_model, quiet_noise):
        model = sixteen_model(ModelFamily.VAE)
        options = {"samples": 2, "average": Averaging.Latent, "seed": 1}
        whole, pieces = (
            evaluate(model, small_dataset, quiet_noise, batch_size=size, **options)
            for size in (24, 7)
        )
        np.testing.assert_allclose(
            whole.encoder_mean, pieces.encoder_mean, rtol=1e-9, atol=1e-12
        )

    def test_sweep_has_one_row_per_level(self, small_dataset, sixteen_model, quiet_noise):
        levels = [quiet_noise, replace(quiet_noise, measurement_variance=0.5)]
        rows = uq_sweep(sixteen_model(), small_dataset, levels, batch_size=8, seed=0)

        assert [row.measurement_variance for row in rows] == [0.0, 0.5]
        assert all(row.encoder_std > 0 and row.forward_std > 0 for row in rows)

    def test_trajectory_stays_in_its_episode(self, small_dataset, sixteen_model, quiet_noise):
        rows = trajectory(
            sixteen_model(), small_dataset, quiet_noise, start=2, steps=10, component=1, seed=0
        )

        assert [row.index for row in rows] == [2, 3, 4, 5]
        assert rows[0].rollout_mean == pytest.approx(rows[0].forward_mean, rel=1e-9)
        assert rows[0].rollout_std == pytest.approx(rows[0].forward_std, rel=1e-9)
        assert all(-1.0 <= row.rod_height <= 1.0 for row in rows)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    overrides = root / "tiny.txt"
    overrides.write_text(TINY_OVERRIDES, encoding="utf-8")

    def invoke(*argv):
        return run([*argv, "--config", str(overrides)])

    common = ["--count", "40", "--episode-len", "20", "--h", "16", "--w", "16"]
    assert invoke(
        "generate-data", *common, "--seed", "1", "--out", str(root / "train.ldkl")
    ) == 0
    assert invoke(
        "generate-data", *common, "--seed", "2", "--out", str(root / "test.ldkl")
    ) == 0

    for family in ModelFamily:
        code = invoke(
            "train", "--data", str(root / "train.ldkl"), "--model", family, "--out", str(
                root / family
            )
        )
        assert code == 0

    return root, invoke


class TestCommandLine:
    def test_generation_is_reproducible(self, workspace):
        root, invoke = workspace
        args = ["--count", "40", "--episode-len", "20", "--h", "16", "--w", "16", "--seed", "1"]
        assert invoke("generate-data", *args, "--out", str(root / "again.ldkl")) == 0
        assert (root / "again.ldkl").read_bytes() == (root / "train.ldkl").read_bytes()

    def test_usage_errors(self, workspace, tmp_path):
        _, invoke = workspace
        assert invoke("generate-data", "--count", "0", "--out", str(tmp_path / "x.ldkl")) == 2
        assert invoke("train", "--model", "svdkl") == 2
        assert run(["no-such-command"]) == 2

    def test_unwritable_outputs_are_data_errors(self, workspace, tmp_path):
        root, invoke = workspace
        blocker = tmp_path / "blocker"
        blocker.write_bytes(b"")
        args = ["--count", "4", "--episode-len", "4", "--h", "16", "--w", "16"]

        assert invoke("generate-data", *args, "--out", str(blocker / "x.ldkl")) == 3
        train_args = ["--data", str(root / "train.ldkl"), "--model", "vae"]
        assert invoke("train", *train_args, "--out", str(blocker / "run")) == 3

    def test_single_transition_dataset(self, workspace, tmp_path):
        _, invoke = workspace
        data = tmp_path / "one.ldkl"
        args = ["--count", "1", "--episode-len", "4", "--h", "16", "--w", "16"]

        assert invoke("generate-data", *args, "--out", str(data)) == 0
        assert invoke("train", "--data", str(data), "--out", str(tmp_path / "run")) == 3

    def test_unknown_config_key(self, tmp_path):
        overrides = tmp_path / "bad.txt"
        overrides.write_text("train.momentum = 0.5\n", encoding="utf-8")
        assert run(
            ["generate-data", "--out", str(tmp_path / "x"), "--config", str(overrides)]
        ) == 2

    def test_help_echoes_defaults(self, capsys):
        assert run(["eval", "--help"]) == 0
        text = capsys.readouterr().out
        assert "--samples" in text and "(default: 10)" in text

    def test_training_outputs(self, workspace):
        root, _ = workspace
        for family in ModelFamily:
            rows = read_rows(root / family / "metrics.csv", EpochRow)
            assert [row.epoch for row in rows] == [1]
            assert (root / family / "model.ldkc").exists()

    def test_eval_outputs(self, workspace):
        root, invoke = workspace
        out = root / "report"
        code = invoke(
            "eval",
            "--ckpt", str(root / "svdkl" / "model.ldkc"),
            "--data", str(root / "test.ldkl"),
            "--sigma-x", "0.5",
            "--out-dir", str(out),
            "--dump-latents",
        )
        assert code == 0

        (row,) = read_rows(out / "report.csv", EvalRow)
        assert row.model is ModelFamily.SVDKL
        assert row.measurement_variance == 0.5
        assert len(read_rows(out / "correlations.csv", CorrelationRow)) == 2
        assert len(read_rows(out / "latents.csv", LatentRow)) == 40 * 2

        grid = (out / "grid.pgm").read_bytes()
        assert grid.startswith(b"P5\n67 50\n255\n")
        assert len(grid) == len(b"P5\n67 50\n255\n") + 67 * 50

    def test_eval_is_byte_reproducible(self, workspace):
        root, invoke = workspace
        outputs = []
        for name in ("first", "second"):
            out = root / name
            code = invoke(
                "eval",
                "--ckpt", str(root / "vae" / "model.ldkc"),
                "--data", str(root / "test.ldkl"),
                "--model", "vae",
                "--sigma-x", "0.2",
                "--out-dir", str(out),
            )
            assert code == 0
            outputs.append([(out / f).read_bytes() for f in ("report.csv", "grid.pgm")])

        assert outputs[0] == outputs[1]

    def test_eval_rejects_mismatches(self, workspace):
        root, invoke = workspace
        common = ["--data", str(root / "test.ldkl"), "--out-dir", str(root / "unused")]
        vae = str(root / "vae" / "model.ldkc")
        assert invoke("eval", "--ckpt", vae, "--model", "svdkl", *common) == 3
        assert invoke(
            "eval", "--ckpt", vae, "--model", "vae", "--sigma-dyn", "50", *common
        ) == 3
        assert invoke("eval", "--ckpt", str(root / "missing.ldkc"), *common) == 3

    def test_single_level_sweep(self, workspace):
        root, invoke = workspace
        out = root / "sweep.csv"
        code = invoke(
            "uq-sweep",
            "--ckpt", str(root / "svdkl" / "model.ldkc"),
            "--data", str(root / "test.ldkl"),
            "--sigma-x", "0.5",
            "--out", str(out),
        )
        assert code == 0
        (row,) = read_rows(out, SweepRow)
        assert row.encoder_std > 0

    def test_compare(self, workspace):
        root, invoke = workspace
        out = root / "compare.csv"
        code = invoke(
            "compare",
            "--svdkl", str(root / "svdkl" / "model.ldkc"),
            "--vae", str(root / "vae" / "model.ldkc"),
            "--data", str(root / "test.ldkl"),
            "--out", str(out),
        )
        assert code == 0
        rows = read_rows(out, EvalRow)
        assert [(row.model, row.measurement_variance) for row in rows] == [
            ("svdkl", 0.0),
            ("vae", 0.0),
            ("svdkl", 0.5),
            ("vae", 0.5),
        ]

    def test_trajectory_defaults_to_cos_component(self, workspace):
        root, invoke = workspace
        out = root / "trajectory.csv"
        code = invoke(
            "trajectory",
            "--ckpt", str(root / "svdkl" / "model.ldkc"),
            "--data", str(root / "test.ldkl"),
            "--start", "25",
            "--out", str(out),
        )
        assert code == 0
        rows = read_rows(out, TrajectoryRow)
        assert [row.index for row in rows] == list(range(25, 40))


def test_commands_follow_dataset_geometry(small_dataset):
    from Common import config

    cfg = Commands(config).model_config(small_dataset, ModelFamily.VAE)
    assert (cfg.height, cfg.width, cfg.channels) == (16, 16, 1)
    assert cfg.family is ModelFamily.VAE


DESK_TRAIN_SIZE, DESK_TEST_SIZE = 2000, 400


def _desk_run(root, dynamics_variance):
    """Trains the desk-scale SVDKL model; returns it with a held-out test set."""
    from Common import config

    params = PendulumParams(
        mass=1.0,
        length=1.0,
        gravity=10.0,
        dt=0.05,
        torque_limit=2.0,
        max_speed=8.0,
        dynamics_std=math.sqrt(dynamics_variance),
    )
    noise = NoiseConfig(
        measurement_variance=0.0,
        control_variance=0.0,
        dynamics_variance=dynamics_variance,
    )
    train_set = generate_dataset(None, DESK_TRAIN_SIZE, 100, params, noise, 16, 16, 1, 0)
    test_set = generate_dataset(None, DESK_TEST_SIZE, 100, params, noise, 16, 16, 1, 1)

    model_cfg = replace(
        config.model,
        family=ModelFamily.SVDKL,
        height=16,
        width=16,
        channels=1,
        latent_dim=8,
        inducing_points=8,
        filters=32,
        encoder_hidden=256,
        forward_hidden=512,
    )
    train_cfg = replace(config.train, batch_size=64, epochs=20, seed=0)
    clean = replace(noise, dynamics_variance=0.0)

    result = train(train_set, model_cfg, train_cfg, clean, params.torque_limit, root)
    return result.model, test_set


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    return _desk_run(tmp_path_factory.mktemp("desk"), 0.0)


@pytest.fixture(scope="module")
def noisy_dynamics_run(tmp_path_factory):
    return _desk_run(tmp_path_factory.mktemp("desk-dynamics"), 50.0)


def _levels(*variances):
    return [
        NoiseConfig(measurement_variance=v, control_variance=0.0, dynamics_variance=0.0)
        for v in variances
    ]


@pytest.mark.slow
class TestDeskScale:
    options = {"samples": 10, "average": Averaging.Latent, "batch_size": 100, "seed": 0}

    def test_reconstruction_denoises(self, desk_run):
        model, test_set = desk_run
        (noise,) = _levels(0.5)

        evaluation = evaluate(model, test_set, noise, **self.options)
        gain = denoising_gain(evaluation.reconstruction, evaluation.noisy, test_set.frames)
        assert gain > 0.0

    def test_latents_track_the_angle(self, desk_run):
        model, test_set = desk_run
        means = encode_means(model.eval(), test_set.frames, 100)

        correlation = latent_correlation(means, test_set.states)
        assert correlation.best("sin_angle") >= 0.7
        assert correlation.best("cos_angle") >= 0.7

    def test_prediction_beats_persistence(self, desk_run):
        model, test_set = desk_run
        (noise,) = _levels(0.0)

        evaluation = evaluate(model, test_set, noise, **self.options)
        correlation = latent_correlation(evaluation.encoder_mean, test_set.states)
        row = summarise(model, test_set, evaluation, correlation)
        assert row.next_mse < row.persistence_mse

    def test_encoder_std_grows_with_measurement_noise(self, desk_run):
        model, test_set = desk_run

        quiet, noisy = uq_sweep(model, test_set, _levels(0.0, 0.5), batch_size=100, seed=0)
        assert noisy.encoder_std > quiet.encoder_std

    def test_forward_std_grows_with_dynamics_noise(self, desk_run, noisy_dynamics_run):
        stds = [
            uq_sweep(model, test_set, _levels(0.0), batch_size=100, seed=0)[0].forward_std
            for model, test_set in (desk_run, noisy_dynamics_run)
        ]
        assert stds[1] > stds[0]
