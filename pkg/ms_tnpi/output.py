"""
Result files of a run: the trajectory CSV, the bond-dimension CSV and the YAML manifest
written next to them.
"""
from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ValidationError

from .config import SimulationConfig
from .engine import Trajectory
from .errors import format_validation_error
from .exceptions import ConfigError
from .sources import yaml_parser
from .system import SystemConfiguration

logger = logging.getLogger(__name__)

TRAJECTORY_HEADER = ("step", "time", "site", "observable", "value_re", "value_im")

BOND_HEADER = ("step", "time", "max_bond", "avg_bond")

MANIFEST_FILE_NAME = "manifest.yaml"


def trajectory_rows(trajectory: Trajectory) -> list[tuple[Any, ...]]:
    """
    One row per step and observable. The initial point is not written, so a run of N
    steps yields N rows per observable.
    """
    rows = []
    for observation in trajectory.observations:
        if observation.step == 0:
            continue
        for key, value in observation.values.items():
            name, _, site = key.partition("@")
            rows.append(
                (
                    observation.step,
                    repr(observation.time),
                    site,
                    name,
                    repr(value.real),
                    repr(value.imag),
                )
            )
    return rows


def bond_rows(trajectory: Trajectory) -> list[tuple[Any, ...]]:
    return [
        (o.step, repr(o.time), o.max_bond, repr(float(o.avg_bond)))
        for o in trajectory.observations
        if o.step > 0 and o.max_bond is not None and o.avg_bond is not None
    ]


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as file_handle:
        writer = csv.writer(file_handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def write_trajectory_csv(path: Path, trajectory: Trajectory) -> Path:
    return _write_csv(path, TRAJECTORY_HEADER, trajectory_rows(trajectory))


def write_bond_csv(path: Path, trajectory: Trajectory) -> Path:
    return _write_csv(path, BOND_HEADER, bond_rows(trajectory))


def read_trajectory_csv(path: Path) -> dict[tuple[int, str, str], complex]:
    """Values of a trajectory CSV keyed by (step, observable, site)"""
    values = {}
    with Path(path).open(newline="") as file_handle:
        for row in csv.DictReader(file_handle):
            key = (int(row["step"]), row["observable"], row["site"])
            values[key] = complex(float(row["value_re"]), float(row["value_im"]))
    return values


class RunManifest(BaseModel):
    """Provenance of one invocation; lists every file it produced"""

    config: dict[str, Any]
    version: str
    python_version: str
    hostname: str
    platform: str
    wall_time: float
    dt: float
    memory_length: int
    cutoff: float
    outputs: list[str] = []
    oracle: Optional[str] = None
    scan: Optional[str] = None

    @classmethod
    def create(
        cls,
        config: SimulationConfig,
        system: SystemConfiguration,
        wall_time: float,
        outputs: Sequence[Path] = (),
        oracle: Optional[str] = None,
        scan: Optional[str] = None,
    ) -> RunManifest:
        return cls(
            config=config.snapshot(),
            version=system.version,
            python_version=system.python_version,
            hostname=system.hostname,
            platform=system.platform,
            wall_time=wall_time,
            dt=config.dt,
            memory_length=config.memory_length,
            cutoff=config.cutoff,
            outputs=[str(path) for path in outputs],
            oracle=oracle,
            scan=scan,
        )


def save_manifest(manifest: RunManifest, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as file_handle:
        yaml_parser().dump(manifest.dict(), file_handle)
    logger.info(f"Wrote manifest {path}")
    return path


def load_manifest(path: Path) -> RunManifest:
    """
    :raises ConfigError: when the file is not a manifest
    """
    with Path(path).open("rb") as file_handle:
        data = yaml_parser().load(file_handle)
    try:
        return RunManifest.parse_obj(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc, Path(path)), exc)
