"""Command-line entry point: ``radcam <command> [options]``."""

import argparse
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from src.cascade.cascade import CascadeModel, infer_batch, train_cascade
from src.cascade.run_io import load_run, save_run
from src.cascade.stages import STUBS
from src.config.env import get_settings
from src.config.logging import logger, setup_logging_from_config
from src.config.run_config import RunConfig
from src.dataset.generator import generate_dataset
from src.dataset.sample import redecalibrate
from src.dataset.storage import lint_dataset, load_split, read_manifest
from src.evaluation.metrics import ErrorTable, EvalRecord
from src.evaluation.protocols import (
    eval_generalization,
    eval_random,
    eval_static,
    eval_temporal,
    static_decalibrations,
    temporal_decalibration,
)
from src.evaluation.report import (
    emit_report,
    overlay_images,
    write_static_histograms,
)
from src.exceptions import (
    ArtifactVersionMismatch,
    ConfigInvalid,
    IoFailure,
    RadcamError,
)
from src.geometry.quaternion import UnitQuaternion
from src.geometry.text_format import (
    format_extrinsic,
    parse_block,
    parse_extrinsic,
)
from src.geometry.transforms import Decalibration
from src.simulation.frames import Frame, simulate_frame, write_frames
from src.simulation.rig import build_rig
from src.utils.image_io import write_ppm

# Frame keys of ``simulate`` use a split index the dataset never uses.
SIMULATION_SPLIT = 3
PROTOCOLS = ("random", "static", "temporal", "generalization")


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, help="Run config YAML")
    parent.add_argument("--seed", type=int, help="Master seed")
    parent.add_argument("--out", type=Path, help="Output directory")
    parent.add_argument("--threads", type=int, help="Worker threads")
    return parent


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser with all subcommands."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="radcam",
        description="Radar-camera rotational auto-calibration.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser(
        "simulate", parents=[common], help="Render frames with detections"
    )
    simulate.add_argument("--n-frames", type=int, default=10)

    commands.add_parser(
        "gen-dataset", parents=[common], help="Generate train/val/test"
    )

    train = commands.add_parser(
        "train", parents=[common], help="Train the coarse and fine stages"
    )
    train.add_argument("--dataset", type=Path, required=True)
    train.add_argument("--max-epochs", type=int)

    evaluate = commands.add_parser(
        "evaluate", parents=[common], help="Run an evaluation protocol"
    )
    evaluate.add_argument("--run", type=Path, help="Trained run directory")
    evaluate.add_argument("--dataset", type=Path, required=True)
    evaluate.add_argument("--protocol", choices=PROTOCOLS, default="random")
    evaluate.add_argument(
        "--stub",
        choices=sorted(STUBS),
        help="Use a stub for both stages instead of a trained run",
    )
    evaluate.add_argument(
        "--window", type=int, action="append", help="Temporal window size"
    )
    evaluate.add_argument("--n-decals", type=int)
    evaluate.add_argument("--fine-iterations", type=int)
    evaluate.add_argument(
        "--secondary-dataset",
        type=Path,
        help="Dataset of the second rig (generalization protocol)",
    )

    calibrate = commands.add_parser(
        "calibrate", parents=[common], help="Recover the extrinsic of a frame"
    )
    calibrate.add_argument("--run", type=Path, required=True)
    calibrate.add_argument("--dataset", type=Path, required=True)
    calibrate.add_argument("--split", default="test")
    calibrate.add_argument("--index", type=int, default=0)
    calibrate.add_argument(
        "--h-init",
        type=Path,
        help="Text file with 'H_init = <16 values>' replacing the stored one",
    )
    calibrate.add_argument("--fine-iterations", type=int)

    lint = commands.add_parser(
        "lint-dataset", help="Check every sample of a dataset"
    )
    lint.add_argument("dataset", type=Path)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Load the run config and apply command-line overrides.

    Raises
    ------
        ConfigInvalid: If the file or an override is invalid
    """
    path = args.config or get_settings().config_file
    data = RunConfig.load_from_yaml(path).model_dump(mode="json")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["output_dir"] = str(args.out)
    if getattr(args, "max_epochs", None) is not None:
        data["train"]["max_epochs"] = args.max_epochs
    if getattr(args, "n_decals", None) is not None:
        data["evaluation"]["n_decals"] = args.n_decals
    if getattr(args, "window", None):
        data["evaluation"]["windows"] = args.window
    if getattr(args, "fine_iterations", None) is not None:
        data["evaluation"]["fine_iterations"] = args.fine_iterations
    data["train"]["seed"] = data["seed"]
    return RunConfig.from_dict(data)


def _threads(args: argparse.Namespace) -> int:
    threads = (
        get_settings().threads if args.threads is None else args.threads
    )
    if threads < 1:
        raise ConfigInvalid(f"--threads must be >= 1, got {threads}")
    return threads


def cmd_simulate(
    config: RunConfig, n_frames: int, out: Path, threads: int = 1
) -> int:
    """Write ``n_frames`` rendered frames with detections and the rig."""
    if n_frames < 0:
        raise ConfigInvalid(f"n_frames must be >= 0, got {n_frames}")
    config.dump_yaml(out / "config.yaml")
    rig = build_rig(config.rig_spec())

    def simulate(index: int) -> Frame:
        return simulate_frame(
            f"{index:06d}",
            config.scene,
            config.radar,
            rig,
            config.seed,
            (SIMULATION_SPLIT, index),
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        count = write_frames(pool.map(simulate, range(n_frames)), rig, out)
    print(f"{count} frames written to {out}")
    return count


def cmd_gen_dataset(config: RunConfig, out: Path, threads: int = 1) -> None:
    """Generate the dataset directory."""
    config.dump_yaml(out / "config.yaml")
    manifest = generate_dataset(
        out,
        config.scene,
        config.radar,
        build_rig(config.rig_spec()),
        config.decalibration,
        config.dataset,
        config.seed,
        threads,
    )
    print(
        f"Dataset for rig '{manifest.rig_id}' written to {out}: "
        f"{manifest.counts.train} train, {manifest.counts.val} val, "
        f"{manifest.counts.test} test"
    )


def cmd_train(config: RunConfig, dataset: Path, out: Path) -> CascadeModel:
    """Train both stages on a dataset and save the run directory."""
    config.dump_yaml(out / "config.yaml")
    manifest = read_manifest(dataset)
    if tuple(manifest.image_size) != tuple(config.model.image_size):
        raise ArtifactVersionMismatch(
            f"dataset image size {manifest.image_size} does not match "
            f"model.image_size {config.model.image_size}"
        )
    cascade = train_cascade(
        load_split(dataset, "train"),
        load_split(dataset, "val"),
        manifest.build_rig().intrinsics,
        config.model,
        config.loss,
        config.train,
    )
    save_run(out, cascade, manifest.rig_id)
    return cascade


def _cascade(run: Path | None, stub: str | None) -> CascadeModel:
    if stub is not None:
        return CascadeModel(STUBS[stub](), STUBS[stub]())
    if run is None:
        raise ConfigInvalid("evaluate needs --run or --stub")
    cascade, _ = load_run(run)
    return cascade


def cmd_evaluate(
    config: RunConfig,
    cascade: CascadeModel,
    dataset: Path,
    protocol: str,
    out: Path,
    secondary: Path | None = None,
    threads: int = 1,
) -> ErrorTable:
    """Run one protocol on the test split and write its report.

    Returns
    -------
        The error table of the (primary) evaluation
    """
    config.dump_yaml(out / "config.yaml")
    manifest = read_manifest(dataset)
    intrinsics = manifest.build_rig().intrinsics
    samples = load_split(dataset, "test")
    settings = config.evaluation
    histogram = {
        "limit": settings.histogram_range,
        "width": settings.histogram_bin,
    }

    if protocol == "random":
        result = eval_random(
            cascade, samples, intrinsics, settings.fine_iterations, threads
        )
        overlays = overlay_images(
            samples,
            result.results,
            intrinsics,
            manifest.image_stats.build(),
            settings.overlay_count,
        )
        emit_report(
            out, result.records, result.table, overlays, **histogram
        )
        return result.table

    if protocol == "static":
        static = eval_static(
            cascade,
            samples,
            intrinsics,
            static_decalibrations(
                config.decalibration, settings.n_decals, config.seed
            ),
            manifest.min_correspondences,
            settings.fine_iterations,
            threads,
        )
        table = ErrorTable.from_records(static.records)
        extra = {"static": static.to_frame()}
        emit_report(out, static.records, table, extra=extra, **histogram)
        write_static_histograms(out, static, **histogram)
        return table

    if protocol == "temporal":
        temporal = eval_temporal(
            cascade,
            samples,
            intrinsics,
            temporal_decalibration(config.decalibration, config.seed),
            settings.windows,
            manifest.min_correspondences,
            settings.fine_iterations,
            threads,
        )
        table = ErrorTable.from_records(temporal.records)
        extra = {"temporal": temporal.to_frame()}
        emit_report(out, temporal.records, table, extra=extra, **histogram)
        return table

    if secondary is None:
        raise ConfigInvalid("generalization needs --secondary-dataset")
    second = read_manifest(secondary)
    outcome = eval_generalization(
        cascade,
        samples,
        intrinsics,
        load_split(secondary, "test"),
        second.build_rig().intrinsics,
        settings.fine_iterations,
        threads,
    )
    emit_report(
        out / "primary",
        outcome.primary.records,
        outcome.primary.table,
        **histogram,
    )
    emit_report(
        out / "secondary",
        outcome.secondary.records,
        outcome.secondary.table,
        extra={"degradation": outcome.degradation().reset_index()},
        **histogram,
    )
    return outcome.primary.table


def _quaternion_text(name: str, q: UnitQuaternion) -> str:
    return f"{name} = " + " ".join(repr(float(v)) for v in q.as_array())


def cmd_calibrate(
    cascade: CascadeModel,
    dataset: Path,
    split: str,
    index: int,
    out: Path,
    h_init_file: Path | None = None,
    fine_iterations: int = 1,
) -> EvalRecord:
    """Recover the extrinsic of one stored frame and draw its overlay.

    Prints ``H_est`` in the geometry text format and both stage
    quaternions.
    """
    manifest = read_manifest(dataset)
    intrinsics = manifest.build_rig().intrinsics
    samples = load_split(dataset, split)
    if not 0 <= index < len(samples):
        raise ConfigInvalid(
            f"index {index} outside the {len(samples)} {split} samples"
        )
    sample = samples[index]
    if h_init_file is not None:
        try:
            text = h_init_file.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read {h_init_file}: {exc}") from exc
        entries = parse_block(text)
        if "H_init" not in entries:
            raise ConfigInvalid(f"{h_init_file} has no 'H_init' entry")
        offset = parse_extrinsic(entries["H_init"], "H_init") @ (
            sample.h_gt.inverse()
        )
        d = Decalibration(UnitQuaternion.from_matrix(offset.R), offset.t)
        sample = redecalibrate(sample, intrinsics, d, min_correspondences=0)
    result = infer_batch(cascade, [sample], intrinsics, fine_iterations)[0]
    record = EvalRecord.measure(
        sample.frame_id,
        sample.h_gt,
        sample.h_init,
        result.h_coarse,
        result.h_est,
    )

    print(format_extrinsic("H_est", result.h_est))
    print(_quaternion_text("q_coarse", result.q_coarse))
    print(_quaternion_text("q_fine", result.q_fine))
    logger.info(
        f"Total error {record.initial.total:.3f} -> {record.coarse.total:.3f}"
        f" -> {record.fine.total:.3f} deg"
    )

    images = overlay_images(
        [sample], [result], intrinsics, manifest.image_stats.build(), 1
    )
    out.mkdir(parents=True, exist_ok=True)
    stem = sample.frame_id.replace("/", "_")
    write_ppm(out / f"{stem}_overlay.ppm", images[f"{stem}_fine"])
    return record


def cmd_lint_dataset(dataset: Path) -> list[str]:
    """Report every violated dataset invariant."""
    problems = lint_dataset(dataset)
    for problem in problems:
        logger.error(problem)
    if problems:
        print(f"{len(problems)} problems found in {dataset}")
    else:
        print(f"{dataset} is valid")
    return problems


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch the command and return the exit code."""
    args = build_parser().parse_args(argv)
    try:
        if args.command == "lint-dataset":
            return 1 if cmd_lint_dataset(args.dataset) else 0

        config = load_config(args)
        out = config.output_dir if args.out is None else args.out
        if args.command == "simulate":
            cmd_simulate(config, args.n_frames, out, _threads(args))
        elif args.command == "gen-dataset":
            cmd_gen_dataset(config, out, _threads(args))
        elif args.command == "train":
            cmd_train(config, args.dataset, out)
        elif args.command == "evaluate":
            cmd_evaluate(
                config,
                _cascade(args.run, args.stub),
                args.dataset,
                args.protocol,
                out,
                args.secondary_dataset,
                _threads(args),
            )
        elif args.command == "calibrate":
            cascade, _ = load_run(args.run)
            cmd_calibrate(
                cascade,
                args.dataset,
                args.split,
                args.index,
                out,
                args.h_init,
                config.evaluation.fine_iterations,
            )
    except RadcamError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except Exception as exc:
        logger.exception(f"Unexpected failure: {exc}")
        raise
    return 0


def main() -> None:
    """Run the application."""
    setup_logging_from_config()
    sys.exit(run())


if __name__ == "__main__":
    main()
