import sys
from pathlib import Path

# make tests importable from each other (oracles, stub server path helpers)
sys.path.insert(0, str(Path(__file__).parent))
