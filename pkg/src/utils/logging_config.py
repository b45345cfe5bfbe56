"""Logging setup: colored console, rotating file and JSON-lines run logs."""

import json
import logging
import logging.handlers
import sys
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Set

try:
    import colorlog
    COLORLOG_AVAILABLE = True
except ImportError:
    COLORLOG_AVAILABLE = False

DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
TEXT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
CALLER_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
LOG_COLORS = {
    'DEBUG': 'cyan',
    'INFO': 'green',
    'WARNING': 'yellow',
    'ERROR': 'red',
    'CRITICAL': 'red,bg_white',
}

# Chatty at DEBUG (font scans, PNG chunks); held at WARNING
QUIET_LIBRARIES = ('matplotlib', 'PIL')

# LogRecord attributes that are not user-supplied `extra` fields
_RESERVED_RECORD_KEYS: Set[str] = set(vars(logging.LogRecord('', 0, '', 0, '', None, None))) | {
    'message', 'asctime', 'taskName',
}


class LogLevel(Enum):
    """Supported log levels."""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"

    @property
    def numeric(self) -> int:
        return getattr(logging, self.value)


class JsonFormatter(logging.Formatter):
    """
    One JSON object per line.

    `extra` fields of a record (stage, seed, stage_hash, ...) become top-level
    keys; `static_fields` are stamped on every line, e.g. the run id.
    """

    def __init__(self, include_caller_info: bool = False, static_fields: Optional[Dict[str, Any]] = None):
        super().__init__()
        self.include_caller_info = include_caller_info
        self.static_fields = dict(static_fields or {})

    def format(self, record: logging.LogRecord) -> str:
        data: Dict[str, Any] = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
        }
        data.update(self.static_fields)
        if self.include_caller_info:
            data['caller'] = f"{record.filename}:{record.lineno}"
        if record.exc_info:
            data['exception'] = self.formatException(record.exc_info)
        data.update((k, v) for k, v in record.__dict__.items() if k not in _RESERVED_RECORD_KEYS)
        return json.dumps(data, ensure_ascii=False, default=str)


class LoggingConfig:
    """
    Handlers of one process.

    The root logger gets the console and (optionally) a rotating file
    handler; runs attach and detach their own JSON log with
    `add_file_handler`.
    """

    def __init__(
        self,
        log_level: LogLevel = LogLevel.INFO,
        log_dir: Optional[Path] = None,
        log_filename: str = "comprint_lab.log",
        max_file_size_mb: int = 10,
        backup_count: int = 5,
        console_logging: bool = True,
        file_logging: bool = True,
        colored_console: bool = True,
        include_caller_info: bool = False,
        json_format: bool = False
    ):
        """
        Args:
            log_level: Minimum level of every handler
            log_dir: Directory of the rotating log (default ./logs)
            log_filename: Name of the rotating log
            max_file_size_mb: Size at which the log rotates
            backup_count: Rotated files to keep
            console_logging: Log to stderr
            file_logging: Log to the rotating file
            colored_console: Colored stderr output (needs colorlog)
            include_caller_info: Add file:line to every line
            json_format: JSON lines in the rotating file
        """
        self.log_level = log_level
        self.log_dir = Path(log_dir) if log_dir else Path.cwd() / "logs"
        self.log_filename = log_filename
        self.max_file_size_bytes = max_file_size_mb * 1024 * 1024
        self.backup_count = backup_count
        self.console_logging = console_logging
        self.file_logging = file_logging
        self.colored_console = colored_console and COLORLOG_AVAILABLE
        self.include_caller_info = include_caller_info
        self.json_format = json_format

    @property
    def log_file_path(self) -> Optional[Path]:
        return self.log_dir / self.log_filename if self.file_logging else None

    def setup_logging(self, logger_name: Optional[str] = None) -> logging.Logger:
        """Replace the handlers of `logger_name` (root for None) with this configuration's."""
        logger = logging.getLogger(logger_name)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.setLevel(self.log_level.numeric)

        if self.console_logging:
            console = logging.StreamHandler(sys.stderr)
            console.setFormatter(self._console_formatter())
            self._attach(logger, console)
        if self.file_logging:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            rotating = logging.handlers.RotatingFileHandler(
                self.log_dir / self.log_filename, maxBytes=self.max_file_size_bytes,
                backupCount=self.backup_count, encoding='utf-8',
            )
            rotating.setFormatter(self._file_formatter(self.json_format))
            self._attach(logger, rotating)

        for name in QUIET_LIBRARIES:
            logging.getLogger(name).setLevel(max(logging.WARNING, self.log_level.numeric))
        return logger

    def add_file_handler(
        self,
        logger_name: Optional[str],
        log_file: Path,
        json_format: bool = True,
        run_id: Optional[str] = None
    ) -> logging.Handler:
        """
        Attach a plain (non-rotating) file handler, e.g. `<run>/logs/run.log`.

        Returns:
            The handler, for `remove_handler` when the run ends
        """
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(log_file, encoding='utf-8')
        if json_format:
            handler.setFormatter(JsonFormatter(self.include_caller_info,
                                               {'run_id': run_id} if run_id else None))
        else:
            handler.setFormatter(self._file_formatter(False))
        self._attach(logging.getLogger(logger_name), handler)
        return handler

    def remove_handler(self, logger_name: Optional[str], handler: logging.Handler) -> None:
        logging.getLogger(logger_name).removeHandler(handler)

    def _attach(self, logger: logging.Logger, handler: logging.Handler) -> None:
        handler.setLevel(self.log_level.numeric)
        logger.addHandler(handler)

    def _console_formatter(self) -> logging.Formatter:
        fmt = CALLER_FORMAT if self.include_caller_info else TEXT_FORMAT
        if self.colored_console:
            return colorlog.ColoredFormatter(f"%(log_color)s{fmt}%(reset)s", datefmt=DATE_FORMAT,
                                             log_colors=LOG_COLORS)
        return logging.Formatter(fmt, datefmt=DATE_FORMAT)

    def _file_formatter(self, json_format: bool) -> logging.Formatter:
        if json_format:
            return JsonFormatter(include_caller_info=self.include_caller_info)
        fmt = CALLER_FORMAT if self.include_caller_info else TEXT_FORMAT
        return logging.Formatter(fmt, datefmt=DATE_FORMAT)


def setup_application_logging(
    log_level: LogLevel = LogLevel.INFO,
    log_dir: Optional[Path] = None,
    console_logging: bool = True,
    file_logging: bool = False,
    colored_console: bool = True,
    json_format: bool = False
) -> LoggingConfig:
    """
    Configure the root logger for a CLI invocation.

    Package loggers (`src.forge`, `src.network`, ...) carry no handlers of
    their own and propagate to the root.
    """
    config = LoggingConfig(
        log_level=log_level,
        log_dir=log_dir,
        console_logging=console_logging,
        file_logging=file_logging,
        colored_console=colored_console,
        json_format=json_format,
    )
    config.setup_logging()
    return config


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
