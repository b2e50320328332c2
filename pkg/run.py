"""
Pipeline Runner

This script is the entry point for running the pipeline.
Use: python run.py <subcommand> [options]   (python run.py --help)
"""

import sys
from pathlib import Path

# Add project root to Python path to enable 'turntaking' module imports
project_root = Path(__file__).parent.absolute()
sys.path.insert(0, str(project_root))

from turntaking.cli.handler import main


if __name__ == "__main__":
    sys.exit(main())
