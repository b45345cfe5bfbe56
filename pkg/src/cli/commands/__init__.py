"""CLI command implementations."""

from .base_command import BaseCommand, CommandContext
from .dataset_command import DatasetCommand
from .train_command import TrainCommand
from .extract_command import ExtractCommand
from .localize_command import LocalizeCommand
from .evaluate_command import EvaluateCommand
from .plot_command import PlotCommand
from .run_command import RunCommand
from .report_command import ReportCommand

__all__ = [
    'BaseCommand',
    'CommandContext',
    'DatasetCommand',
    'TrainCommand',
    'ExtractCommand',
    'LocalizeCommand',
    'EvaluateCommand',
    'PlotCommand',
    'RunCommand',
    'ReportCommand'
]
