"""Run bookkeeping: per-stage status and the run record."""

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

STAGES = ('dataset', 'train', 'extract', 'localize', 'evaluate', 'plot')


class StageStatus(Enum):
    """Lifecycle of a pipeline stage inside a run."""
    PENDING = "pending"
    COMPLETED = "completed"
    REUSED = "reused"
    FAILED = "failed"


@dataclass
class StageRecord:
    """Outcome and artifacts of one stage."""

    name: str
    status: StageStatus = StageStatus.PENDING
    stage_hash: Optional[str] = None
    artifact_paths: List[str] = field(default_factory=list)
    artifact_hash: Optional[str] = None
    wall_time: float = 0.0
    finished_at: Optional[datetime] = None
    error: Optional[str] = None

    def __post_init__(self):
        if self.name not in STAGES:
            raise ValueError(f"unknown stage '{self.name}'")

    @property
    def is_done(self) -> bool:
        return self.status in (StageStatus.COMPLETED, StageStatus.REUSED)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'status': self.status.value,
            'stage_hash': self.stage_hash,
            'artifact_paths': list(self.artifact_paths),
            'artifact_hash': self.artifact_hash,
            'wall_time': self.wall_time,
            'finished_at': self.finished_at.isoformat() if self.finished_at else None,
            'error': self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StageRecord":
        return cls(
            name=data['name'],
            status=StageStatus(data.get('status', 'pending')),
            stage_hash=data.get('stage_hash'),
            artifact_paths=list(data.get('artifact_paths', [])),
            artifact_hash=data.get('artifact_hash'),
            wall_time=float(data.get('wall_time', 0.0)),
            finished_at=datetime.fromisoformat(data['finished_at']) if data.get('finished_at') else None,
            error=data.get('error'),
        )


@dataclass
class RunRecord:
    """State of a run directory, as stored in its MANIFEST file."""

    run_id: str
    run_dir: str
    config_hash: str
    stages: Dict[str, StageRecord] = field(default_factory=dict)
    log_path: Optional[str] = None
    history: List[str] = field(default_factory=list)

    def __post_init__(self):
        for name in STAGES:
            self.stages.setdefault(name, StageRecord(name=name))

    def stage(self, name: str) -> StageRecord:
        if name not in self.stages:
            raise ValueError(f"unknown stage '{name}'")
        return self.stages[name]

    @property
    def completed_stages(self) -> List[str]:
        return [name for name in STAGES if self.stages[name].is_done]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'run_id': self.run_id,
            'run_dir': self.run_dir,
            'config_hash': self.config_hash,
            'log_path': self.log_path,
            'history': list(self.history),
            'stages': {name: self.stages[name].to_dict() for name in STAGES},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        return cls(
            run_id=data['run_id'],
            run_dir=data['run_dir'],
            config_hash=data['config_hash'],
            stages={name: StageRecord.from_dict(s) for name, s in data.get('stages', {}).items()},
            log_path=data.get('log_path'),
            history=list(data.get('history', [])),
        )
