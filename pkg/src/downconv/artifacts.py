"""Artifact writing and run manifests."""

from __future__ import annotations

import json
import platform
import threading
from pathlib import Path
from typing import Dict, List

import numpy as np
import scipy

from . import __version__

_LOCK = threading.Lock()


def fmt(value) -> str:
    return f"{value:.12g}"


class ArtifactWriter:
    """Serializes file writes from the main process and tracks what was written."""

    def __init__(self, out_dir: Path, config_hash: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.written: List[str] = []

    @property
    def header(self) -> List[str]:
        return [f"config_hash={self.config_hash}"]

    def text(self, name: str, content: str) -> Path:
        path = self.out_dir / name
        with _LOCK:
            path.write_text(content)
        self.written.append(name)
        return path

    def json(self, name: str, payload: Dict) -> Path:
        payload = {"config_hash": self.config_hash, **payload}
        return self.text(name, json.dumps(payload, indent=1, sort_keys=True, default=_jsonable) + "\n")

    def manifest(self, subcommand: str, wall_time: float, extra: Dict) -> Path:
        data = {
            "subcommand": subcommand,
            "config_hash": self.config_hash,
            "versions": {
                "downconv": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "wall_time_s": round(wall_time, 3),
            "artifacts": list(self.written),
            **extra,
        }
        path = self.out_dir / f"manifest_{subcommand}.json"
        with _LOCK:
            path.write_text(json.dumps(data, indent=1, sort_keys=True, default=_jsonable) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
