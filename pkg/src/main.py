"""
star-rz Entry Point

Console entry point of the benchmark harness; see ``src.cli.bench`` for the
command line.
"""

import sys
from typing import Optional, Sequence

from src.cli.bench import run


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the benchmark command line and return its exit code."""
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
