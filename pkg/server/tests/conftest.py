import sys
from pathlib import Path

# lets tests import helper modules (import-path model target) from this dir
sys.path.insert(0, str(Path(__file__).parent))
