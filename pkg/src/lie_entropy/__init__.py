"""Invariance entropy of discrete-time linear control systems on Lie groups.

This package computes spectral data and the Bowen bound of linear systems on a
small catalogue of Lie groups, estimates outer invariance entropy from minimal
(n, epsilon)-spanning control sets, evaluates the measure-theoretic lower bound on
the quotient by the stable subgroup, and runs reproducible experiments from
scenario files through a command-line interface and an MCP stdio server.
"""

import logging
import sys
from typing import List, Optional

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger("lie-entropy")

# Package version - must match the version in pyproject.toml
__version__ = "0.1.0"

from . import config, groups, presets, spectral, system  # noqa: E402
from .cli import main as cli_main  # noqa: E402


def main(argv: Optional[List[str]] = None) -> None:
    """Main entry point for the package."""
    try:
        code = cli_main(argv)
    except Exception as e:
        logger.error(f"Error in main: {e}", exc_info=True)
        raise
    sys.exit(code)


# Expose important items at package level
__all__ = ["main", "config", "groups", "presets", "spectral", "system", "__version__"]
