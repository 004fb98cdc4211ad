"""HTTP/JSON API over the review store.

Serves the queue, candidate metadata, trace manifests, PNG frames, the live
report, and accepts oracle labels.  Every JSON payload carries a
schema_version.  Optionally serves a built UI directory at the root path;
the API is mounted under /api so the two never collide.
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..errors import NotFound, ValidationError
from ..types import OracleLabel
from .store import ReviewStore

API_SCHEMA_VERSION = 1


class LabelPayload(BaseModel):
    candidate_id: str
    reviewer: str
    ground_truth_preserved: bool
    natural: bool
    assigned_label: Optional[int] = None
    timestamp: Optional[datetime] = None


def create_app(campaign_dir: Path, *, all_steps: bool = False,
               ui_dir: Optional[Path] = None) -> FastAPI:
    """Build the review app for one campaign directory."""
    store = ReviewStore(campaign_dir, all_steps=all_steps)
    app = FastAPI(title="oracle review service")
    app.state.store = store
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(NotFound)
    async def not_found_handler(request, exc):
        return JSONResponse(status_code=404, content={
            "schema_version": API_SCHEMA_VERSION, "error": str(exc)})

    @app.exception_handler(ValidationError)
    async def validation_handler(request, exc):
        return JSONResponse(status_code=400, content={
            "schema_version": API_SCHEMA_VERSION, "error": str(exc)})

    @app.get("/api/queue")
    def get_queue(status: Optional[str] = Query(default=None),
                  class_name: Optional[str] = Query(default=None)):
        items = store.get_queue(status=status, class_name=class_name)
        return {
            "schema_version": API_SCHEMA_VERSION,
            "total": store.queue_size(),
            "items": items,
        }

    @app.get("/api/candidates/{candidate_id}")
    def get_candidate(candidate_id: str):
        view = store.get_candidate(candidate_id)
        view["schema_version"] = API_SCHEMA_VERSION
        return view

    @app.post("/api/labels")
    def post_label(payload: LabelPayload):
        timestamp = payload.timestamp or datetime.now(timezone.utc)
        if timestamp.tzinfo is None:
            raise ValidationError("timestamp must carry a timezone offset")
        label = OracleLabel(
            candidate_id=payload.candidate_id,
            reviewer=payload.reviewer,
            ground_truth_preserved=payload.ground_truth_preserved,
            natural=payload.natural,
            assigned_label=payload.assigned_label,
            timestamp=timestamp,
        )
        deltas = store.submit_label(label)
        deltas["schema_version"] = API_SCHEMA_VERSION
        return deltas

    @app.get("/api/report")
    def get_report():
        return store.compute_report().to_dict()

    @app.get("/api/runs/{run_id}/trace")
    def get_trace(run_id: str):
        return store.trace_manifest(run_id)

    @app.get("/api/runs/{run_id}/frames/{step}")
    def get_frame(run_id: str, step: int):
        return Response(content=store.frame_png(run_id, step),
                        media_type="image/png")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=Path(ui_dir), html=True), name="ui")

    return app
