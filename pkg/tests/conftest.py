import sys
from pathlib import Path

# make acceptance_lib importable when pytest runs from the repo root
sys.path.insert(0, str(Path(__file__).resolve().parent))


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full benchmark reproduction (slow; results cached)")
