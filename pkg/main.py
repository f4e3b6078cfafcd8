#!/usr/bin/env python3
"""
Few-Shot Street-Scene Translation

Entry point for the command-line pipeline:
- Dataset curation and detection-driven class expansion
- Generator / discriminator training and fine-tuning
- Whole-image and instance-aware translation
- LPIPS / Inception Score evaluation

Run ``python main.py --help`` for the list of commands.
"""

import sys
import os

# Add the src directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from src.cli import main as cli_main


def main():
    """Main entry point for the application."""
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
