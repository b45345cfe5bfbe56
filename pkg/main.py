#!/usr/bin/env python3
"""
comprint-lab - Main Entry Point

Compression-fingerprint forgery localization and its training-data
ablation experiments. All arguments are passed to the CLI:

    python main.py run --corpus ~/photos
    python main.py --help
"""

import sys
from pathlib import Path

# Make the `src` package importable when run from a checkout
sys.path.insert(0, str(Path(__file__).parent))


def main() -> int:
    """Dispatch to the command line interface."""
    from src.cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
