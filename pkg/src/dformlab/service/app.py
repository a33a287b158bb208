"""HTTP service exposing the experiment drivers.

Runs execute synchronously in the request; artifacts land in a per-run
directory under the app's workspace and are served back by file name.
Config problems reject the request with 422; numerical failures still
produce a run record, marked failed, so its diagnostics stay reachable.
"""

from __future__ import annotations

import itertools
import shutil
import tempfile
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse

from .. import __version__
from ..config import save_config
from ..errors import ConfigError, NumericalBlowupError
from ..experiments import run_experiment
from .schemas import HealthResponse, RunRecord, RunRequest, RunSummary


def _run_directory_files(out: Path) -> list[str]:
    return sorted(p.name for p in out.iterdir() if p.is_file())


def create_app(workspace: str | Path | None = None) -> FastAPI:
    """Build the service; `workspace` holds one subdirectory per run."""
    root = Path(workspace) if workspace is not None else Path(
        tempfile.mkdtemp(prefix="dformlab-runs-")
    )
    root.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="dformlab", version=__version__)
    records: dict[str, RunRecord] = {}
    counter = itertools.count(1)
    lock = threading.Lock()

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/runs", response_model=RunRecord, status_code=201)
    def create_run(request: RunRequest) -> RunRecord:
        with lock:
            run_id = f"run-{next(counter):04d}"
        out = root / run_id
        out.mkdir(parents=True, exist_ok=True)
        save_config(request.config, out / "config.toml")
        kind = request.config.experiment.kind
        try:
            summary = run_experiment(request.config, out)
            record = RunRecord(
                id=run_id,
                name=request.name,
                kind=kind,
                status="completed",
                summary=summary,
                files=_run_directory_files(out),
            )
        except ConfigError as exc:
            shutil.rmtree(out, ignore_errors=True)
            raise HTTPException(
                status_code=422,
                detail={"failure": "config", "message": str(exc)},
            ) from exc
        except NumericalBlowupError as exc:
            record = RunRecord(
                id=run_id,
                name=request.name,
                kind=kind,
                status="failed",
                failure="numerical",
                detail=str(exc),
                files=_run_directory_files(out),
            )
        with lock:
            records[run_id] = record
        return record

    @app.get("/runs", response_model=list[RunSummary])
    def list_runs() -> list[RunSummary]:
        with lock:
            return [record.listing() for record in records.values()]

    @app.get("/runs/{run_id}", response_model=RunRecord)
    def get_run(run_id: str) -> RunRecord:
        with lock:
            record = records.get(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")
        return record

    @app.get("/runs/{run_id}/files/{name}")
    def get_run_file(run_id: str, name: str) -> FileResponse:
        with lock:
            record = records.get(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")
        if name not in record.files:
            raise HTTPException(
                status_code=404, detail=f"run {run_id!r} has no file {name!r}"
            )
        return FileResponse(root / run_id / name)

    return app
