"""
Command line entry point::

    ms-tnpi run --config ising.cfg [--output DIR] [--oracle path-sum] [--scan L=2,3,4,5]
    ms-tnpi oracle --config p1.cfg --kind exact-diag
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional

from . import __version__
from .config import SimulationConfig
from .constants import APP_NAME, OracleKind
from .context import Context, create_context
from .engine import run_simulation
from .errors import one_line
from .exceptions import ConfigError, MsTnpiError
from .oracles import oracle_trajectory
from .output import (
    MANIFEST_FILE_NAME,
    RunManifest,
    save_manifest,
    write_bond_csv,
    write_trajectory_csv,
)

logger = logging.getLogger(__name__)

#: Parameters a scan may vary, with the configuration field and value type of each
SCAN_PARAMETERS = {
    "dt": ("dt", float),
    "L": ("memory_length", int),
    "chi": ("cutoff", float),
}


def parse_scan(value: str) -> tuple[str, list[Any]]:
    """``L=2,3,4`` -> ``("L", [2, 3, 4])``"""
    name, separator, raw_values = value.partition("=")
    name = name.strip()
    if not separator or name not in SCAN_PARAMETERS:
        raise ConfigError(
            f"--scan expects one of {sorted(SCAN_PARAMETERS)} followed by '=v1,v2,...', "
            f"got '{value}'"
        )
    _, convert = SCAN_PARAMETERS[name]
    try:
        values = [convert(part) for part in raw_values.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--scan {name} has a value that is not a {convert.__name__}")
    if not values:
        raise ConfigError(f"--scan {name} needs at least one value")
    return name, values


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", dest="config_file", type=Path, required=True, help="configuration file"
    )
    parser.add_argument(
        "--output",
        dest="output_dir",
        type=Path,
        default=Path("output"),
        help="directory for CSV files and the manifest (default: ./output)",
    )
    overrides = parser.add_argument_group("overrides of configuration values")
    overrides.add_argument("--dt", type=float, help="time step")
    overrides.add_argument("-N", "--nsteps", type=int, help="number of time steps")
    overrides.add_argument("-L", "--memory-length", type=int, help="memory length in steps")
    overrides.add_argument("--cutoff", type=float, help="SVD truncation cutoff")
    overrides.add_argument("--max-dim", type=int, help="largest bond dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description="Dynamics of spin chains with local harmonic baths",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="more log output (repeatable)"
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")

    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="propagate the reduced density of a chain")
    _add_config_options(run)
    run.add_argument(
        "--oracle",
        choices=[kind.value for kind in OracleKind],
        default=OracleKind.NONE.value,
        help="also write the trajectory of a reference solver",
    )
    run.add_argument("--scan", help="repeat the run for several values, e.g. L=2,3,4,5")
    run.set_defaults(handler=run_command)

    oracle = commands.add_parser("oracle", help="trajectory of a reference solver only")
    _add_config_options(oracle)
    oracle.add_argument(
        "--kind",
        choices=[kind.value for kind in OracleKind if kind is not OracleKind.NONE],
        required=True,
    )
    oracle.set_defaults(handler=oracle_command)

    return parser


def configure_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    else:
        level = max(logging.DEBUG, logging.WARNING - 10 * verbose)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _oracle_file(directory: Path, kind: OracleKind, suffix: str = "") -> Path:
    return directory / f"oracle-{kind.value}{suffix}.csv"


def _run_point(
    config: SimulationConfig, directory: Path, oracle: OracleKind, suffix: str = ""
) -> list[Path]:
    trajectory = run_simulation(config)
    outputs = [
        write_trajectory_csv(directory / f"trajectory{suffix}.csv", trajectory),
        write_bond_csv(directory / f"bonds{suffix}.csv", trajectory),
    ]
    if oracle is not OracleKind.NONE:
        reference = oracle_trajectory(config, oracle)
        outputs.append(write_trajectory_csv(_oracle_file(directory, oracle, suffix), reference))
    return outputs


def run_command(args: argparse.Namespace, context: Context) -> int:
    config = context.simulation_config()
    oracle = OracleKind(args.oracle)
    directory = args.output_dir
    started = time.perf_counter()

    if not args.scan:
        outputs = _run_point(config, directory, oracle)
    else:
        name, values = parse_scan(args.scan)
        field, _ = SCAN_PARAMETERS[name]
        points = [(value, config.with_overrides(**{field: value})) for value in values]
        workers = min(context.system.threads, len(points))
        logger.info(f"Scanning {name} over {values} with {workers} worker thread(s)")

        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_run_point, point, directory, oracle, f"_{name}-{value}")
                for value, point in points
            ]
            outputs = [path for future in futures for path in future.result()]

    manifest = RunManifest.create(
        config,
        context.system,
        wall_time=time.perf_counter() - started,
        outputs=outputs,
        oracle=oracle.value,
        scan=args.scan,
    )
    save_manifest(manifest, directory / MANIFEST_FILE_NAME)
    return 0


def oracle_command(args: argparse.Namespace, context: Context) -> int:
    config = context.simulation_config()
    kind = OracleKind(args.kind)
    started = time.perf_counter()

    path = write_trajectory_csv(
        _oracle_file(args.output_dir, kind), oracle_trajectory(config, kind)
    )
    manifest = RunManifest.create(
        config,
        context.system,
        wall_time=time.perf_counter() - started,
        outputs=[path],
        oracle=kind.value,
    )
    save_manifest(manifest, args.output_dir / MANIFEST_FILE_NAME)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        if not args.config_file.is_file():
            raise ConfigError(f"Configuration file {args.config_file} does not exist")
        context = create_context(args, config_files=(args.config_file,))
        return args.handler(args, context)
    except MsTnpiError as exc:
        print(f"{APP_NAME}: error: {one_line(str(exc))}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
