from __future__ import annotations

from argparse import ArgumentDefaultsHelpFormatter
from dataclasses import replace
from inspect import getmembers, isfunction
from logging import DEBUG, INFO
from operator import attrgetter
from pathlib import Path
from typing import TYPE_CHECKING

from Common import (
    Averaging,
    ConfigMismatchError,
    ModelFamily,
    NoiseConfig,
    log,
    write_rows,
)
from Models import load_checkpoint
from Simulator import PendulumParams, generate_dataset, load_dataset
from Training import train

from .analysis import latent_correlation
from .decorators import argument, command, ensure_meta
from .evaluation import (
    correlation_rows,
    default_component,
    evaluate,
    evaluation_grid,
    latent_rows,
    summarise,
    trajectory,
    uq_sweep,
)
from .images import write_pgm
from .report import (
    CORRELATION_FILE,
    GRID_FILE,
    LATENT_FILE,
    REPORT_FILE,
    CorrelationRow,
    EvalRow,
    LatentRow,
    SweepRow,
    TrajectoryRow,
)

if TYPE_CHECKING:
    from argparse import ArgumentParser, Namespace

    from Common import GlobalConfig, LoggingContext, ModelConfig
    from Models import LatentModel
    from Simulator import Dataset

__all__ = ("DEFAULT_COUNT", "DEFAULT_SWEEP", "Commands")

DEFAULT_COUNT = 2000
DEFAULT_SWEEP = (0.0, 0.5)


class Commands:
    """Every CLI command, bound to the merged configuration it runs under."""

    def __init__(self, cfg: GlobalConfig, /, *, log_ctx: LoggingContext | None = None):
        self.config = cfg
        self.log_ctx = log_ctx

    def register_commands(self, subparsers, /, *, parents: list[ArgumentParser]) -> None:
        for func_name, func in getmembers(type(self), predicate=isfunction):
            meta = ensure_meta(func)
            try:
                name, summary = meta["command"]["name"], meta["command"]["help"]
            except KeyError:
                continue

            parser = subparsers.add_parser(
                name,
                help=summary,
                description=summary,
                parents=parents,
                formatter_class=ArgumentDefaultsHelpFormatter,
            )
            for spec in meta.get("arguments", ()):
                options = dict(spec["options"])
                if spec["setting"] is not None:
                    options["default"] = attrgetter(spec["setting"])(self.config)
                parser.add_argument(*spec["flags"], **options)

            parser.set_defaults(handler=func.__get__(self))
            log(f"Registered command: {name} -> {type(self).__name__}.{func_name}()", DEBUG)

    def model_config(self, dataset: Dataset, family: ModelFamily, /) -> ModelConfig:
        # Image geometry always follows the dataset being trained or evaluated on
        header = dataset.header
        return replace(
            self.config.model,
            family=ModelFamily(family),
            height=header.height,
            width=header.width,
            channels=header.channels,
        )

    def load_model(self, path: Path, dataset: Dataset, family: ModelFamily, /) -> LatentModel:
        cfg = self.model_config(dataset, family)
        return load_checkpoint(path, cfg, self.control_scale(dataset))

    @staticmethod
    def control_scale(dataset: Dataset, /) -> float:
        # Controls enter the forward model divided by the torque limit
        limit = dataset.header.params.torque_limit
        return limit if limit > 0 else 1.0

    @staticmethod
    def noise(
        dataset: Dataset,
        measurement_variance: float,
        control_variance: float,
        /,
        dynamics_variance: float | None = None,
    ) -> NoiseConfig:
        """Load-time noise; σ_dyn² is fixed by the dataset's simulation."""
        recorded = dataset.header.noise.dynamics_variance
        if dynamics_variance is not None and dynamics_variance != recorded:
            raise ConfigMismatchError(
                "dataset",
                [f"dynamics variance {recorded} was simulated, {dynamics_variance} requested"],
            )

        return NoiseConfig(
            measurement_variance=measurement_variance,
            control_variance=control_variance,
            dynamics_variance=recorded,
        )

    @command("generate-data", help="Simulate clean pendulum transitions into a dataset file.")
    @argument("--count", type=int, default=DEFAULT_COUNT, help="Number of transitions.")
    @argument(
        "--episode-len",
        type=int,
        setting="simulator.episode_length",
        help="Transitions per simulated episode.",
    )
    @argument("--h", type=int, setting="simulator.height", help="Image height in pixels.")
    @argument("--w", type=int, setting="simulator.width", help="Image width in pixels.")
    @argument("--seed", type=int, default=0, help="Simulation seed.")
    @argument(
        "--sigma-dyn",
        type=float,
        setting="noise.dynamics_variance",
        help="Variance of the angular acceleration disturbance.",
    )
    @argument(
        "--workers",
        type=int,
        setting="simulator.workers",
        help="Parallel simulation processes.",
    )
    @argument("--out", type=Path, required=True, help="Dataset file to write.")
    def generate_data(self, args: Namespace, /) -> None:
        noise = NoiseConfig(
            measurement_variance=0.0, control_variance=0.0, dynamics_variance=args.sigma_dyn
        )
        params = PendulumParams.from_config(self.config.simulator, noise)

        generate_dataset(
            args.out,
            args.count,
            args.episode_len,
            params,
            noise,
            args.h,
            args.w,
            self.config.simulator.channels,
            args.seed,
            workers=args.workers,
            log_ctx=self.log_ctx,
        )

    @command("train", help="Train an SVDKL or VAE latent model on a dataset.")
    @argument("--data", type=Path, required=True, help="Training dataset file.")
    @argument(
        "--model",
        type=ModelFamily,
        choices=tuple(ModelFamily),
        setting="model.family",
        help="Model family.",
    )
    @argument("--out", type=Path, default=Path("Runs"), help="Directory for metrics and model.")
    @argument("--seed", type=int, setting="train.seed", help="Training seed.")
    @argument("--epochs", type=int, setting="train.epochs", help="Number of epochs.")
    @argument(
        "--sigma-x",
        type=float,
        setting="noise.measurement_variance",
        help="Measurement noise variance applied to training batches.",
    )
    @argument(
        "--sigma-u",
        type=float,
        setting="noise.control_variance",
        help="Control noise variance applied to training batches.",
    )
    def train_model(self, args: Namespace, /) -> None:
        dataset = load_dataset(args.data)
        train_cfg = replace(self.config.train, seed=args.seed, epochs=args.epochs)
        noise = self.noise(dataset, args.sigma_x, args.sigma_u)

        result = train(
            dataset,
            self.model_config(dataset, args.model),
            train_cfg,
            noise,
            self.control_scale(dataset),
            args.out,
        )
        log(f"Model written to {result.checkpoint}, metrics to {result.metrics}.", INFO)

    @command("eval", help="Evaluate a checkpoint on a held-out dataset.")
    @argument("--ckpt", type=Path, required=True, help="Model checkpoint.")
    @argument("--data", type=Path, required=True, help="Held-out dataset file.")
    @argument(
        "--model",
        type=ModelFamily,
        choices=tuple(ModelFamily),
        setting="model.family",
        help="Model family of the checkpoint.",
    )
    @argument(
        "--sigma-x",
        type=float,
        setting="noise.measurement_variance",
        help="Measurement noise variance.",
    )
    @argument(
        "--sigma-u",
        type=float,
        setting="noise.control_variance",
        help="Control noise variance.",
    )
    @argument(
        "--sigma-dyn",
        type=float,
        default=None,
        help="Expected dynamics noise variance; the dataset's own value when omitted.",
    )
    @argument(
        "--avg",
        type=Averaging,
        choices=tuple(Averaging),
        setting="eval.average",
        help="Average samples in latent space or over decoded images.",
    )
    @argument("--samples", type=int, setting="eval.samples", help="Samples per data point.")
    @argument("--seed", type=int, setting="eval.seed", help="Evaluation seed.")
    @argument("--out-dir", type=Path, default=Path("Report"), help="Output directory.")
    @argument(
        "--dump-latents", action="store_true", help="Also write latent means and stds as CSV."
    )
    def evaluate_model(self, args: Namespace, /) -> None:
        dataset = load_dataset(args.data)
        model = self.load_model(args.ckpt, dataset, args.model)
        noise = self.noise(dataset, args.sigma_x, args.sigma_u, args.sigma_dyn)

        evaluation = evaluate(
            model,
            dataset,
            noise,
            samples=args.samples,
            average=args.avg,
            batch_size=self.config.eval.batch_size,
            seed=args.seed,
        )
        correlation = latent_correlation(evaluation.encoder_mean, dataset.states)
        row = summarise(model, dataset, evaluation, correlation)

        out = args.out_dir
        write_rows(out / REPORT_FILE, EvalRow, [row])
        write_rows(out / CORRELATION_FILE, CorrelationRow, correlation_rows(correlation))
        grid = evaluation_grid(dataset, evaluation, self.config.eval.grid_rows)
        write_pgm(out / GRID_FILE, grid)
        if args.dump_latents:
            write_rows(out / LATENT_FILE, LatentRow, latent_rows(dataset, evaluation))

        log(
            f"{model.family} at σ_x² = {noise.measurement_variance}: "
            f"denoising gain {row.denoising_gain:.3f} dB, "
            f"|corr| sin {row.corr_sin_angle:.3f} cos {row.corr_cos_angle:.3f}.",
            INFO,
        )

    @command("uq-sweep", help="Mean predictive standard deviation across noise levels.")
    @argument("--ckpt", type=Path, required=True, help="Model checkpoint.")
    @argument("--data", type=Path, required=True, help="Held-out dataset file.")
    @argument(
        "--model",
        type=ModelFamily,
        choices=tuple(ModelFamily),
        setting="model.family",
        help="Model family of the checkpoint.",
    )
    @argument(
        "--sigma-x",
        type=float,
        nargs="+",
        default=list(DEFAULT_SWEEP),
        help="Measurement noise variances to sweep.",
    )
    @argument(
        "--sigma-u",
        type=float,
        nargs="+",
        default=[0.0],
        help="Control noise variances to sweep.",
    )
    @argument("--seed", type=int, setting="eval.seed", help="Evaluation seed.")
    @argument("--out", type=Path, default=Path("uq_sweep.csv"), help="CSV file to write.")
    def sweep_uncertainty(self, args: Namespace, /) -> None:
        dataset = load_dataset(args.data)
        model = self.load_model(args.ckpt, dataset, args.model)
        levels = [
            self.noise(dataset, measurement, control)
            for measurement in args.sigma_x
            for control in args.sigma_u
        ]

        rows = uq_sweep(
            model, dataset, levels, batch_size=self.config.eval.batch_size, seed=args.seed
        )
        write_rows(args.out, SweepRow, rows)
        log(f"Wrote {len(rows)} sweep rows to {args.out}.", INFO)

    @command("compare", help="Side-by-side report for an SVDKL and a VAE checkpoint.")
    @argument("--svdkl", type=Path, required=True, help="SVDKL checkpoint.")
    @argument("--vae", type=Path, required=True, help="VAE checkpoint.")
    @argument("--data", type=Path, required=True, help="Held-out dataset file.")
    @argument(
        "--sigma-x",
        type=float,
        nargs="+",
        default=list(DEFAULT_SWEEP),
        help="Measurement noise variances to compare at.",
    )
    @argument(
        "--sigma-u",
        type=float,
        setting="noise.control_variance",
        help="Control noise variance.",
    )
    @argument(
        "--avg",
        type=Averaging,
        choices=tuple(Averaging),
        setting="eval.average",
        help="Average samples in latent space or over decoded images.",
    )
    @argument("--samples", type=int, setting="eval.samples", help="Samples per data point.")
    @argument("--seed", type=int, setting="eval.seed", help="Evaluation seed.")
    @argument("--out", type=Path, default=Path("compare.csv"), help="CSV file to write.")
    def compare_models(self, args: Namespace, /) -> None:
        dataset = load_dataset(args.data)
        models = [
            self.load_model(args.svdkl, dataset, ModelFamily.SVDKL),
            self.load_model(args.vae, dataset, ModelFamily.VAE),
        ]

        rows = []
        for measurement in args.sigma_x:
            noise = self.noise(dataset, measurement, args.sigma_u)
            for model in models:
                evaluation = evaluate(
                    model,
                    dataset,
                    noise,
                    samples=args.samples,
                    average=args.avg,
                    batch_size=self.config.eval.batch_size,
                    seed=args.seed,
                )
                correlation = latent_correlation(evaluation.encoder_mean, dataset.states)
                rows.append(summarise(model, dataset, evaluation, correlation))

            svdkl, vae = rows[-2:]
            log(
                f"σ_x² = {measurement}: denoising gain svdkl {svdkl.denoising_gain:.3f} dB, "
                f"vae {vae.denoising_gain:.3f} dB.",
                INFO,
            )

        write_rows(args.out, EvalRow, rows)

    @command("trajectory", help="Latent uncertainty bands along one episode.")
    @argument("--ckpt", type=Path, required=True, help="Model checkpoint.")
    @argument("--data", type=Path, required=True, help="Dataset file.")
    @argument(
        "--model",
        type=ModelFamily,
        choices=tuple(ModelFamily),
        setting="model.family",
        help="Model family of the checkpoint.",
    )
    @argument("--start", type=int, default=0, help="First transition of the trajectory.")
    @argument("--steps", type=int, default=50, help="Maximum number of steps.")
    @argument(
        "--component",
        type=int,
        default=None,
        help="Latent component; the one most correlated with cos φ when omitted.",
    )
    @argument(
        "--sigma-x",
        type=float,
        setting="noise.measurement_variance",
        help="Measurement noise variance.",
    )
    @argument(
        "--sigma-u",
        type=float,
        setting="noise.control_variance",
        help="Control noise variance.",
    )
    @argument("--seed", type=int, setting="eval.seed", help="Evaluation seed.")
    @argument("--out", type=Path, default=Path("trajectory.csv"), help="CSV file to write.")
    def export_trajectory(self, args: Namespace, /) -> None:
        dataset = load_dataset(args.data)
        model = self.load_model(args.ckpt, dataset, args.model)
        noise = self.noise(dataset, args.sigma_x, args.sigma_u)

        component = args.component
        if component is None:
            batch_size = self.config.eval.batch_size
            component = default_component(model, dataset, batch_size=batch_size)

        rows = trajectory(
            model,
            dataset,
            noise,
            start=args.start,
            steps=args.steps,
            component=component,
            seed=args.seed,
        )
        write_rows(args.out, TrajectoryRow, rows)
        log(f"Wrote {len(rows)} trajectory steps of component {component} to {args.out}.", INFO)
