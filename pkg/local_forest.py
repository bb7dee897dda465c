"""
Locally optimized random forest command line
Usage:
    python local_forest.py <subcommand> [options]
    python local_forest.py --help
"""
import sys
from pathlib import Path

# Add the repository root to the path for package imports
script_dir = Path(__file__).parent
if str(script_dir) not in sys.path:
    sys.path.insert(0, str(script_dir))

from app.cli import main


if __name__ == "__main__":
    sys.exit(main())
