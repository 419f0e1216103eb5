"""HTTP service layer: run `uvicorn tanto_eval.service.app:app`."""

from .app import app, create_app

__all__ = ["app", "create_app"]
