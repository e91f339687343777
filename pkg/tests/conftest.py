import sys
from pathlib import Path

# make reference_impl importable from any test module
sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent.parent / "fixtures"
