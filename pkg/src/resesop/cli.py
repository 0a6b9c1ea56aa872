"""
Command line front end: ``resesop simulate|reconstruct|analyze-redundancy|evaluate|export``.

Exit codes: 0 on success, 2 for invalid input or configuration, 3 when a numerical
procedure fails.
"""
from __future__ import annotations

import logging
import os
import sys
from argparse import ArgumentParser, Namespace
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import fs
import numpy as np
from fs.base import FS
from relic.core.cli import CliPlugin, _SubParsersAction
from relic.core.errors import MismatchError
from relic.sga.core.cli import _get_dir_type_validator, _get_file_type_validator

from resesop import __version__
from resesop.config import RunConfig, load_config
from resesop.definitions import Engine, ImageGrid, MeasurementVector
from resesop.errors import InputError, NumericalError, SolverDivergenceError
from resesop.metrics import evaluate
from resesop.pipeline import (
    Experiment,
    analyze_redundancy,
    build_experiment,
    noise_level,
    reconstruct,
    simulate,
)
from resesop.serialization import (
    dump_motion,
    read_array,
    read_inexactness,
    write_array,
    write_history,
    write_inexactness,
    write_metrics,
    write_pgm,
    write_profile,
    write_redundancy,
)
from resesop.solver import compute_inexactness
from resesop.operators import split

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _read_array(path: str) -> np.ndarray:
    with open(path, "rb") as handle:
        return read_array(handle)


def _as_image(values: np.ndarray) -> ImageGrid:
    return ImageGrid(values if values.ndim == 2 else values.reshape(1, -1))


class ResesopCommand(CliPlugin):
    """A relic CLI plugin whose parser also records the command to dispatch to."""

    def __init__(self, command_group: Optional[_SubParsersAction] = None):
        super().__init__(command_group)
        self.parser.set_defaults(handler=self.command)


def _add_config_argument(parser: ArgumentParser, required: bool) -> None:
    parser.add_argument(
        "--config",
        required=required,
        default=None,
        type=_get_file_type_validator(exists=True),
        help="Run configuration .json file",
    )


def _load_config(path: str, seed: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    config = load_config(path).with_overrides(seed, out)
    if out is None and not os.path.isabs(config.output):
        base = os.path.dirname(os.path.abspath(path))
        config = config.with_overrides(output=os.path.join(base, config.output))
    return config


class _ConfiguredCommand(ResesopCommand):
    NAME = ""
    HELP = ""

    def _create_parser(self, command_group: Optional[_SubParsersAction] = None) -> ArgumentParser:
        parser: ArgumentParser
        if command_group is None:
            parser = ArgumentParser(self.NAME)
        else:
            parser = command_group.add_parser(self.NAME, help=self.HELP)
        _add_config_argument(parser, required=True)
        parser.add_argument("--seed", type=int, default=None, help="Overrides the config seed")
        parser.add_argument(
            "--out",
            type=_get_dir_type_validator(exists=False),
            default=None,
            help="Output directory (overrides the config output)",
        )
        self._add_arguments(parser)
        return parser

    def _add_arguments(self, parser: ArgumentParser) -> None:
        pass

    def _load(self, ns: Namespace) -> RunConfig:
        return _load_config(ns.config, ns.seed, ns.out)


class SimulateCli(_ConfiguredCommand):
    NAME = "simulate"
    HELP = "Simulate dynamic data and per-bin inexactness levels"

    def command(self, ns: Namespace) -> Optional[int]:
        config = self._load(ns)
        print(f"Simulating `{config.experiment.value}` into `{config.output}`")
        experiment = build_experiment(config)
        simulation = simulate(experiment)
        with fs.open_fs(config.output, create=True) as out:
            print("\tWriting `reference.rsop`")
            with out.openbin("reference.rsop", "w") as handle:
                write_array(handle, simulation.reference.values)
            print("\tWriting `data.rsop`")
            with out.openbin("data.rsop", "w") as handle:
                write_array(handle, simulation.data.values)
            print("\tWriting `motion.json`")
            with out.open("motion.json", "w", encoding="utf-8", newline="\n") as text:
                dump_motion(text, simulation.motion_document)
            print("\tWriting `inexactness.csv`")
            with out.open("inexactness.csv", "w", encoding="utf-8", newline="") as text:
                write_inexactness(text, simulation.e, simulation.data_norms)
        print("\tDone!")
        return None


def _load_data(experiment: Experiment, data_fs: Optional[FS]) -> MeasurementVector:
    custom = experiment.config.custom_dense
    if data_fs is not None and data_fs.exists("data.rsop"):
        with data_fs.openbin("data.rsop", "r") as handle:
            values = read_array(handle)
    elif custom is not None and custom.data is not None:
        values = _read_array(custom.data)
    else:
        raise InputError("no `data.rsop` found; run `resesop simulate` first or pass --data")
    return MeasurementVector(values, experiment.partition)


def _load_inexactness(
    experiment: Experiment, data_fs: Optional[FS], data: MeasurementVector
) -> np.ndarray:
    if data_fs is not None and data_fs.exists("inexactness.csv"):
        with data_fs.open("inexactness.csv", "r", encoding="utf-8", newline="") as text:
            e = read_inexactness(text)
        if e.size != experiment.partition.count:
            raise InputError(
                f"inexactness.csv has {e.size} row(s), the partition {experiment.partition.count}"
            )
        return e
    if experiment.reference is not None:
        return compute_inexactness(
            experiment.reference, split(experiment.operator, experiment.partition), data
        )
    return np.zeros(experiment.partition.count)


class ReconstructCli(_ConfiguredCommand):
    NAME = "reconstruct"
    HELP = "Reconstruct from simulated or supplied data"

    def _add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "--data",
            type=_get_dir_type_validator(exists=True),
            default=None,
            help="Directory holding data.rsop and inexactness.csv (default: the output directory)",
        )

    def command(self, ns: Namespace) -> Optional[int]:
        config = self._load(ns)
        data_dir = ns.data or config.output
        print(f"Reconstructing `{config.experiment.value}` from `{data_dir}`")
        experiment = build_experiment(config)
        data_fs = fs.open_fs(data_dir) if os.path.isdir(data_dir) else None
        try:
            data = _load_data(experiment, data_fs)
            e = _load_inexactness(experiment, data_fs, data)
        finally:
            if data_fs is not None:
                data_fs.close()
        delta = noise_level(experiment)
        with fs.open_fs(config.output, create=True) as out:
            try:
                recon = reconstruct(experiment, data, e, delta)
            except SolverDivergenceError as err:
                print("\tWriting partial `history.csv`")
                with out.open("history.csv", "w", encoding="utf-8", newline="") as text:
                    write_history(text, err.history)
                raise
            result = recon.result
            print(f"\tStopped after {result.state.k} step(s); converged: {result.converged}")
            if config.solver.engine == Engine.SIMULTANEOUS and result.history:
                fallbacks = sum(record.fallback for record in result.history)
                print(f"\tNewton fallbacks: {fallbacks}/{len(result.history)}")
            print("\tWriting `recon.rsop`")
            values = result.image.values if result.image is not None else result.iterate
            with out.openbin("recon.rsop", "w") as handle:
                write_array(handle, values)
            print("\tWriting `history.csv`")
            with out.open("history.csv", "w", encoding="utf-8", newline="") as text:
                write_history(text, result.history)
            print("\tWriting `profile.csv`")
            with out.open("profile.csv", "w", encoding="utf-8", newline="") as text:
                write_profile(text, recon.e, recon.final_norms)
        print(f"\tConsistency loss: {recon.loss:.6g}")
        print("\tDone!")
        return None


class AnalyzeRedundancyCli(_ConfiguredCommand):
    NAME = "analyze-redundancy"
    HELP = "Per-block redundancy norms of the materialized system matrix"

    def command(self, ns: Namespace) -> Optional[int]:
        config = self._load(ns)
        print(f"Analyzing redundancy of `{config.experiment.value}`")
        experiment = build_experiment(config)
        report = analyze_redundancy(experiment)
        with fs.open_fs(config.output, create=True) as out:
            print("\tWriting `redundancy.csv`")
            with out.open("redundancy.csv", "w", encoding="utf-8", newline="") as text:
                write_redundancy(text, report)
            print("\tWriting `report.txt`")
            with out.open("report.txt", "w", encoding="utf-8", newline="\n") as text:
                text.write(report.to_text())
        for block in report.blocks:
            print(f"\tBlock {block.index}: ratio {block.ratio:.4f} ({block.severity.value})")
        print("\tDone!")
        return None


class EvaluateCli(ResesopCommand):
    def _create_parser(self, command_group: Optional[_SubParsersAction] = None) -> ArgumentParser:
        parser: ArgumentParser
        if command_group is None:
            parser = ArgumentParser("evaluate")
        else:
            parser = command_group.add_parser("evaluate", help="Image quality of a reconstruction")
        parser.add_argument(
            "recon",
            nargs="?",
            type=_get_file_type_validator(exists=True),
            help="Reconstruction .rsop file (default: recon.rsop in the config output)",
        )
        parser.add_argument(
            "reference",
            nargs="?",
            type=_get_file_type_validator(exists=True),
            help="Reference .rsop file (default: reference.rsop in the config output)",
        )
        _add_config_argument(parser, required=False)
        parser.add_argument(
            "--out",
            type=_get_dir_type_validator(exists=False),
            default=None,
            help="Output directory for metrics.csv (default: next to the reconstruction)",
        )
        parser.add_argument("--data-range", type=float, default=None, help="Overrides the reference range")
        return parser

    def _paths(self, ns: Namespace) -> Tuple[str, str, str]:
        recon: Optional[str] = ns.recon
        reference: Optional[str] = ns.reference
        out_dir: Optional[str] = ns.out
        if ns.config is not None:
            output = _load_config(ns.config).output
            recon = recon or os.path.join(output, "recon.rsop")
            reference = reference or os.path.join(output, "reference.rsop")
            out_dir = out_dir or output
        if recon is None or reference is None:
            raise InputError("evaluate needs a reconstruction and a reference, or --config")
        for path in (recon, reference):
            if not os.path.isfile(path):
                raise InputError(f"`{path}` does not exist; run `resesop reconstruct` first")
        return recon, reference, out_dir or os.path.dirname(os.path.abspath(recon))

    def command(self, ns: Namespace) -> Optional[int]:
        recon, reference, out_dir = self._paths(ns)
        print(f"Evaluating `{recon}` against `{reference}`")
        record = evaluate(_as_image(_read_array(reference)), _as_image(_read_array(recon)), ns.data_range)
        with fs.open_fs(out_dir, create=True) as out:
            print("\tWriting `metrics.csv`")
            with out.open("metrics.csv", "w", encoding="utf-8", newline="") as text:
                write_metrics(text, record)
        print(f"\tSSIM {record.ssim:.4f}  PSNR {record.psnr:.2f} dB  MSE {record.mse:.6g}")
        print("\tDone!")
        return None


class ExportCli(ResesopCommand):
    def _create_parser(self, command_group: Optional[_SubParsersAction] = None) -> ArgumentParser:
        parser: ArgumentParser
        if command_group is None:
            parser = ArgumentParser("export")
        else:
            parser = command_group.add_parser("export", help="Export an image as 16-bit PGM")
        parser.add_argument(
            "image",
            nargs="?",
            type=_get_file_type_validator(exists=True),
            help="Image .rsop file (default: recon.rsop in the config output)",
        )
        parser.add_argument(
            "output",
            nargs="?",
            type=_get_file_type_validator(exists=False),
            help="Output .pgm file (default: recon.pgm next to the image)",
        )
        _add_config_argument(parser, required=False)
        parser.add_argument("--gamma", type=float, default=1.0, help="Gamma applied after normalization")
        return parser

    def command(self, ns: Namespace) -> Optional[int]:
        image_path: Optional[str] = ns.image
        if image_path is None and ns.config is not None:
            image_path = os.path.join(_load_config(ns.config).output, "recon.rsop")
        if image_path is None:
            raise InputError("export needs an image, or --config")
        if not os.path.isfile(image_path):
            raise InputError(f"`{image_path}` does not exist; run `resesop reconstruct` first")
        output = ns.output or os.path.splitext(image_path)[0] + ".pgm"
        print(f"Exporting `{image_path}` to `{output}`")
        image = _as_image(_read_array(image_path))
        out_dir, name = os.path.split(os.path.abspath(output))
        with fs.open_fs(out_dir, create=True) as out:
            with out.openbin(name, "w") as handle:
                write_pgm(handle, image.values, ns.gamma)
        print("\tDone!")
        return None


class ResesopCli(ResesopCommand):
    PLUGINS = (SimulateCli, ReconstructCli, AnalyzeRedundancyCli, EvaluateCli, ExportCli)

    def __init__(self, command_group: Optional[_SubParsersAction] = None) -> None:
        self.plugins: Dict[str, CliPlugin] = {}
        super().__init__(command_group)

    def _create_parser(self, command_group: Optional[_SubParsersAction] = None) -> ArgumentParser:
        description = "Subspace optimization for inexact inverse problems"
        parser: ArgumentParser
        if command_group is None:
            parser = ArgumentParser("resesop", description=description)
        else:
            parser = command_group.add_parser("resesop", description=description)
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        parser.add_argument("-v", "--verbose", action="store_true", help="Log library progress")
        group = parser.add_subparsers(dest="subcommand")
        for plugin in self.PLUGINS:
            instance = plugin(group)
            self.plugins[instance.parser.prog.split()[-1]] = instance
        return parser

    def command(self, ns: Namespace) -> Optional[int]:
        self.parser.print_help()
        return None

    def run_with(self, *args: Any) -> int:
        """Parses ``args`` and dispatches; input errors exit 2 and numerical failures 3."""
        try:
            ns = self.parser.parse_args([str(arg) for arg in args])
        except SystemExit as e:  # argparse exits on -h and on usage errors
            return e.code if isinstance(e.code, int) else EXIT_INPUT
        if getattr(ns, "verbose", False):
            logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
        handler: Callable[[Namespace], Optional[int]] = getattr(ns, "handler", self.command)
        try:
            result = handler(ns)
        except (InputError, MismatchError) as e:
            print(f"Error: {e}", file=sys.stderr)
            return EXIT_INPUT
        except NumericalError as e:
            print(f"Numerical failure: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        return EXIT_OK if result is None else result

    def run(self) -> None:
        sys.exit(self.run_with(*sys.argv[1:]))


cli_root = ResesopCli()


def main(argv: Optional[Sequence[str]] = None) -> None:
    if argv is None:
        cli_root.run()
    else:
        sys.exit(cli_root.run_with(*argv))


__all__ = [
    "EXIT_OK",
    "EXIT_INPUT",
    "EXIT_NUMERICAL",
    "ResesopCommand",
    "SimulateCli",
    "ReconstructCli",
    "AnalyzeRedundancyCli",
    "EvaluateCli",
    "ExportCli",
    "ResesopCli",
    "cli_root",
    "main",
]
