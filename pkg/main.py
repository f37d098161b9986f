#!/usr/bin/env python3
"""
Entry point for the rules-first classifiers command line.

This script runs the experiment harness; see `python main.py --help`.
"""

import sys

from cli import main


if __name__ == '__main__':
    sys.exit(main())
