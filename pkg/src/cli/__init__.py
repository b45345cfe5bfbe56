"""Command Line Interface package for comprint-lab."""

from .cli_main import main, ComprintCLI
from .commands import *

__all__ = [
    'main',
    'ComprintCLI'
]
