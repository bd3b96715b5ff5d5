"""Generate test cases from ontology-based safety requirements and run them on simulated traces."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_dir() -> Path:
    """Directory of the bundled water-process-system example project."""
    return Path(str(resources.files("reqtest") / "data" / "wps"))
