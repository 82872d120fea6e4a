"""JSON diagnostics report."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, obj) -> None:
    """Write ``obj`` as sorted JSON through a temporary file and a rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True))
    tmp.replace(path)


@dataclass
class DiagnosticsReport:
    metrics: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain({"meta": self.meta, "metrics": self.metrics, "arrays": self.arrays, "files": self.files})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def read(cls, path) -> "DiagnosticsReport":
        d = json.loads(Path(path).read_text())
        return cls(d.get("metrics", {}), d.get("arrays", {}), d.get("files", []), d.get("meta", {}))
