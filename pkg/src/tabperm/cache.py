"""Content-addressed on-disk cache for embedding vectors.

Entries live at ``<dir>/<hash[:2]>/<hash>.json`` with
``hash = sha256(provider_id + "\\n" + text)``. Writes go to a temp file in the
same directory and are renamed into place, so readers never see torn files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def request_hash(provider_id: str, text: str) -> str:
    return hashlib.sha256(f"{provider_id}\n{text}".encode("utf-8")).hexdigest()


class EmbeddingCache:
    def __init__(self, directory):
        self.directory = Path(directory)
        self._memory: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def path_for(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, provider_id: str, text: str) -> np.ndarray | None:
        key = request_hash(provider_id, text)
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        path = self.path_for(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as exc:
            logger.warning("ignoring unreadable cache entry %s: %s", path, exc)
            return None
        if entry.get("request_hash") != key or entry.get("provider_id") != provider_id:
            logger.warning("cache entry %s does not match its key; ignoring", path)
            return None
        vec = np.asarray(entry["vector"], dtype=float)
        with self._lock:
            self._memory[key] = vec
        return vec

    def put(self, provider_id: str, text: str, vector) -> Path:
        key = request_hash(provider_id, text)
        vec = np.asarray(vector, dtype=float)
        entry = {
            "request_hash": key,
            "provider_id": provider_id,
            "text": text,
            "vector": vec.tolist(),
            "d": int(vec.size),
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        path = self.path_for(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        with self._lock:
            self._memory[key] = vec
        return path
