"""Allow `python -m gibbsinf` as an alias for the `gibbsinf` console script."""

import sys

from .harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
