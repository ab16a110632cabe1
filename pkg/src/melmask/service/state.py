"""In-memory stores behind the service: loaded models and live streams."""
from __future__ import annotations

import hashlib
import threading
import uuid

from ..container import loads
from ..engine import Enhancer, SeModel


def model_id_for(data: bytes) -> str:
    """Deterministic id: identical containers collapse to one entry."""
    return hashlib.sha256(data).hexdigest()[:16]


class ModelStore:
    """Thread-safe registry of loaded models. Models are immutable, so
    concurrent reads need no further locking."""

    def __init__(self):
        self._lock = threading.Lock()
        self._models: dict[str, tuple[SeModel, bytes]] = {}

    def add_bytes(self, data: bytes) -> tuple[str, SeModel]:
        mid = model_id_for(data)
        with self._lock:
            if mid not in self._models:
                self._models[mid] = (loads(data), data)
            return mid, self._models[mid][0]

    def add_model(self, model: SeModel) -> tuple[str, SeModel]:
        from ..container import dumps
        data = dumps(model)
        return self.add_bytes(data)[0], model

    def get(self, mid: str) -> SeModel:
        with self._lock:
            if mid not in self._models:
                raise KeyError(mid)
            return self._models[mid][0]

    def raw(self, mid: str) -> bytes:
        with self._lock:
            if mid not in self._models:
                raise KeyError(mid)
            return self._models[mid][1]

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._models)

    def remove(self, mid: str) -> None:
        with self._lock:
            if mid not in self._models:
                raise KeyError(mid)
            del self._models[mid]


class Session:
    """One live audio stream; a lock serializes chunk processing because
    enhancer state is single-stream by contract."""

    def __init__(self, model_id: str, model: SeModel):
        self.model_id = model_id
        self.enhancer = Enhancer(model)
        self.lock = threading.Lock()


class SessionStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def create(self, model_id: str, model: SeModel) -> str:
        sid = uuid.uuid4().hex[:16]
        with self._lock:
            self._sessions[sid] = Session(model_id, model)
        return sid

    def get(self, sid: str) -> Session:
        with self._lock:
            if sid not in self._sessions:
                raise KeyError(sid)
            return self._sessions[sid]

    def remove(self, sid: str) -> None:
        with self._lock:
            if sid not in self._sessions:
                raise KeyError(sid)
            del self._sessions[sid]
