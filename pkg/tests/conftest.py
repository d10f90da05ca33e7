import sys
from pathlib import Path

# Make the shared builders importable regardless of invocation directory.
sys.path.insert(0, str(Path(__file__).parent))
