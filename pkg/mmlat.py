"""
mmlat launcher: puts the repository root on sys.path and hands off to core.cli.

    python mmlat.py lyrrc --config configs/experiment.json --set system.M=32
"""

import os
import sys

ROOT_DIR = os.path.dirname(os.path.abspath(__file__))
if ROOT_DIR not in sys.path:
    sys.path.insert(0, ROOT_DIR)

from core.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
