"""Run directory persistence: MANIFEST index, resolved config and artifact hashes."""

import json
import os
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import yaml

from ..models.experiment_config import ExperimentConfig
from ..models.run_record import STAGES, RunRecord
from .hashing import combine_hashes, file_checksum
from .logging_config import get_logger

MANIFEST_NAME = "MANIFEST"
RESOLVED_CONFIG_NAME = "config.resolved.yaml"


def default_run_dir(config: ExperimentConfig) -> Path:
    """`<runs_root>/<profile>-<config hash[:12]>`."""
    return Path(config.runs_root) / f"{config.profile}-{config.config_hash[:12]}"


def new_run_id(config_hash: str, now: Optional[datetime] = None) -> str:
    """`<UTC timestamp>-<config hash[:12]>`."""
    now = now or datetime.now(timezone.utc)
    return f"{now.strftime('%Y%m%dT%H%M%SZ')}-{config_hash[:12]}"


def atomic_write_text(path: Path, text: str) -> None:
    """Write to a temporary sibling, then replace the target."""
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_name(path.name + '.tmp')
    with open(temp_file, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    os.replace(temp_file, path)


def artifact_hash(paths: Iterable[Union[str, Path]]) -> str:
    """Order-independent digest over files (directories are walked)."""
    files: List[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(f for f in p.rglob('*') if f.is_file() and not f.name.endswith('.tmp'))
        elif p.is_file():
            files.append(p)
    files = sorted(set(files))
    return combine_hashes(f"{f.name}:{file_checksum(f)}" for f in files)


class RunStore:
    """
    Owns one run directory.

    Layout::

        <run>/MANIFEST              JSON index (RunRecord)
        <run>/config.resolved.yaml  resolved configuration
        <run>/logs/run.log          JSON lines log
        <run>/<stage>/              one directory per stage
    """

    def __init__(self, run_dir: Union[str, Path]):
        self.run_dir = Path(run_dir)
        self.logger = get_logger(__name__)
        self._lock = threading.Lock()

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / MANIFEST_NAME

    @property
    def config_path(self) -> Path:
        return self.run_dir / RESOLVED_CONFIG_NAME

    @property
    def log_path(self) -> Path:
        return self.run_dir / "logs" / "run.log"

    def stage_dir(self, stage: str, create: bool = False) -> Path:
        if stage not in STAGES:
            raise ValueError(f"unknown stage '{stage}'")
        path = self.run_dir / stage
        if create:
            path.mkdir(parents=True, exist_ok=True)
        return path

    def exists(self) -> bool:
        return self.manifest_path.is_file()

    def load(self) -> Optional[RunRecord]:
        """Load the run record, or None for a fresh directory."""
        if not self.exists():
            return None
        with open(self.manifest_path, 'r', encoding='utf-8') as f:
            return RunRecord.from_dict(json.load(f))

    def open(self, config: ExperimentConfig) -> RunRecord:
        """
        Load or create the run record and register a new run id.

        The resolved config is (re)written; stage records are kept so that
        the runner can decide about reuse.
        """
        self.run_dir.mkdir(parents=True, exist_ok=True)
        record = self.load()
        run_id = new_run_id(config.config_hash)
        if record is None:
            record = RunRecord(run_id=run_id, run_dir=str(self.run_dir), config_hash=config.config_hash)
            self.logger.info(f"Created run directory {self.run_dir}")
        else:
            record.run_id = run_id
            record.config_hash = config.config_hash
        record.history.append(run_id)
        record.log_path = str(self.log_path.relative_to(self.run_dir))
        self.write_resolved_config(config)
        self.save(record)
        return record

    def save(self, record: RunRecord) -> None:
        with self._lock:
            atomic_write_text(self.manifest_path, json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n")

    def write_resolved_config(self, config: ExperimentConfig) -> Path:
        data: Dict[str, Any] = config.to_dict()
        atomic_write_text(self.config_path, yaml.safe_dump(data, sort_keys=True, default_flow_style=False))
        return self.config_path

    def read_resolved_config(self) -> Optional[ExperimentConfig]:
        if not self.config_path.is_file():
            return None
        with open(self.config_path, 'r', encoding='utf-8') as f:
            return ExperimentConfig.from_dict(yaml.safe_load(f) or {})

    def relative(self, path: Union[str, Path]) -> str:
        """Path relative to the run directory, with forward slashes."""
        return Path(path).resolve().relative_to(self.run_dir.resolve()).as_posix()
