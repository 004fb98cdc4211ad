"""Human-oracle review workflow: label persistence plus the HTTP API."""

from .store import ReviewStore
from .service import create_app

__all__ = ["ReviewStore", "create_app"]
