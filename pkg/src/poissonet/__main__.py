"""
poissonet - Main entry point for the command-line tool.
"""

import sys

from .cli import main as run


def main():
    """Main entry point for poissonet."""
    sys.exit(run())


if __name__ == "__main__":
    main()
