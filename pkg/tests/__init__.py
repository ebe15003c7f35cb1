"""Tests of the household marathon packages"""

import sys
from pathlib import Path

# Project root on the path so that ``src`` imports resolve without installing
sys.path.insert(0, str(Path(__file__).parent.parent))
