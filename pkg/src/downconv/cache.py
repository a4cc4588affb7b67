"""On-disk pickle cache for pipeline stage results."""

from __future__ import annotations

import hashlib
import json
import os
import pickle
import warnings
from collections import Counter
from pathlib import Path
from typing import Any, Callable, Optional


CACHE_ENV = "DOWNCONV_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "downconv"


def stage_key(stage: str, payload: Any) -> str:
    text = json.dumps({"stage": stage, "payload": payload}, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()


class StageCache:
    """Keyed store of stage outputs; ``enabled=False`` turns every lookup into a miss."""

    def __init__(self, root: Optional[Path] = None, enabled: bool = True):
        self.root = Path(root) if root is not None else default_cache_dir()
        self.enabled = enabled
        self.hits: Counter = Counter()
        self.misses: Counter = Counter()

    def _path(self, stage: str, key: str) -> Path:
        return self.root / stage / f"{key}.pkl"

    def get_or_compute(self, stage: str, payload: Any, compute: Callable[[], Any]) -> Any:
        key = stage_key(stage, payload)
        path = self._path(stage, key)
        if self.enabled and path.exists():
            try:
                with open(path, "rb") as fh:
                    value = pickle.load(fh)
                self.hits[stage] += 1
                return value
            except Exception as exc:
                warnings.warn(f"corrupt cache entry {path} ({exc}); recomputing", RuntimeWarning, stacklevel=2)
        self.misses[stage] += 1
        value = compute()
        if self.enabled:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(f".tmp{os.getpid()}")
            with open(tmp, "wb") as fh:
                pickle.dump(value, fh, protocol=pickle.HIGHEST_PROTOCOL)
            os.replace(tmp, path)
        return value

    def stats(self) -> dict:
        return {"hits": dict(self.hits), "misses": dict(self.misses)}
