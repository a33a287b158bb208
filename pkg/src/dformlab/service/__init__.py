"""HTTP service wrapping the experiment drivers."""

from .app import create_app
from .schemas import HealthResponse, RunRecord, RunRequest, RunSummary

__all__ = ["HealthResponse", "RunRecord", "RunRequest", "RunSummary", "create_app"]
