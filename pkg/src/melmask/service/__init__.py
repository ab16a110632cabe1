"""FastAPI application factory for the enhancement/compression service."""
from __future__ import annotations

from fastapi import FastAPI

from .routes import router
from .state import ModelStore, SessionStore


def create_app() -> FastAPI:
    from .. import __version__

    app = FastAPI(title="melmask service", version=__version__)
    app.state.models = ModelStore()
    app.state.sessions = SessionStore()
    app.include_router(router)
    return app
