# main.py
"""
Main entry point for the ROI exploration simulator.
"""

import sys

from ui.cli import main


if __name__ == "__main__":
    sys.exit(main())
