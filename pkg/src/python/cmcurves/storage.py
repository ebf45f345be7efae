"""
Artifact storage for reports and tables.
"""

import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

Table = Union[pd.DataFrame, List[Dict[str, Any]]]


def to_jsonable(value: Any) -> Any:
    """Convert complex numbers to [re, im] and numpy values to Python ones, recursively."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"


class ArtifactStore(ABC):
    """Base class for artifact stores."""

    @abstractmethod
    def write_json(self, name: str, payload: Any) -> str:
        """Write a JSON document and return its location."""

    @abstractmethod
    def write_table(self, name: str, table: Table) -> str:
        """Write a CSV table and return its location."""

    @abstractmethod
    def read_json(self, name: str) -> Any:
        """Read back a JSON document."""


class FileStorage(ArtifactStore):
    """Local directory store; every artifact stays inside ``output_dir``."""

    def __init__(self, output_dir: Union[str, Path]):
        self.base_path = Path(output_dir).resolve()
        self.base_path.mkdir(parents=True, exist_ok=True)

    def _resolve(self, name: str) -> Path:
        path = (self.base_path / name).resolve()
        if self.base_path != path and self.base_path not in path.parents:
            raise ValueError(f"Artifact path {name!r} escapes {self.base_path}")
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_json(self, name: str, payload: Any) -> str:
        path = self._resolve(name)
        path.write_text(dumps(payload))
        logger.info(f"Wrote {path}")
        return str(path)

    def write_table(self, name: str, table: Table) -> str:
        path = self._resolve(name)
        frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame(table)
        frame.to_csv(path, index=False, float_format="%.17g")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return str(path)

    def read_json(self, name: str) -> Any:
        path = self._resolve(name)
        if not path.exists():
            return None
        return json.loads(path.read_text())


class MemoryStorage(ArtifactStore):
    """In-memory store (for tests and dry runs)."""

    def __init__(self, output_dir: Union[str, Path] = "."):
        self.base_path = Path(output_dir)
        self.documents: Dict[str, str] = {}

    def write_json(self, name: str, payload: Any) -> str:
        self.documents[name] = dumps(payload)
        return name

    def write_table(self, name: str, table: Table) -> str:
        frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame(table)
        self.documents[name] = frame.to_csv(index=False, float_format="%.17g")
        return name

    def read_json(self, name: str) -> Any:
        text = self.documents.get(name)
        return None if text is None else json.loads(text)


def get_storage_backend(backend: str, output_dir: Union[str, Path]) -> ArtifactStore:
    """Factory function to get an artifact store."""
    backends = {
        "file": FileStorage,
        "memory": MemoryStorage,
    }
    backend_class = backends.get(backend.lower())
    if not backend_class:
        raise ValueError(f"Unknown storage backend: {backend}")
    return backend_class(output_dir)
