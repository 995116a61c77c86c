"""HTTP surface of the review workflow, consumed by the annotation UI.

Thin JSON layer over ReviewService: payloads mirror the record types, and
image bytes are served from the blob store by content id. State lives in
the record store; the API holds nothing in memory worth losing.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from pydantic import BaseModel

from .costing import CostLedger
from .domains import Domain
from .errors import (
    AlreadyInReview,
    BatchNotInRound,
    ConfigError,
    EmptySelection,
    InstructGenError,
    InvalidCorrection,
    RoundIncomplete,
    StaleLease,
    UnknownRecord,
)
from .review import ReviewService, ReviewTask
from .store import RecordStore

_STATUS = {
    UnknownRecord: 404,
    EmptySelection: 400,
    ConfigError: 400,
    AlreadyInReview: 409,
    BatchNotInRound: 409,
    StaleLease: 409,
    RoundIncomplete: 409,
    InvalidCorrection: 422,
}


def _http_error(exc: InstructGenError) -> HTTPException:
    status = next((code for t, code in _STATUS.items() if isinstance(exc, t)), 500)
    return HTTPException(status_code=status, detail=str(exc))


class OpenBatchRequest(BaseModel):
    domain: str
    record_ids: list[str]
    min_rounds: int = 3
    rng_seed: int = 0


class VerdictRequest(BaseModel):
    batch_id: str
    reviewer_id: str
    verdict: str
    correction: dict[str, Any] | None = None


def create_app(store: RecordStore | str | Path, ledger: CostLedger | None = None) -> FastAPI:
    if not isinstance(store, RecordStore):
        store = RecordStore(store)
    if ledger is None:
        ledger = CostLedger(store.root / "ledger.json")
    service = ReviewService(store, ledger)

    app = FastAPI(title="instructgen review service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.service = service

    def guard(fn):
        try:
            return fn()
        except InstructGenError as exc:
            raise _http_error(exc) from exc

    @app.get("/health")
    def health() -> dict:
        return {"ok": True}

    @app.get("/batches")
    def list_batches() -> list[dict]:
        return [_batch_payload(v) for v in service.batches()]

    @app.post("/batches")
    def open_batch(req: OpenBatchRequest) -> dict:
        view = guard(
            lambda: service.open_batch(
                Domain.parse(req.domain), req.record_ids, req.min_rounds, req.rng_seed
            )
        )
        return _batch_payload(view)

    @app.get("/batches/{batch_id}")
    def get_batch(batch_id: str) -> dict:
        return _batch_payload(guard(lambda: service.batch(batch_id)))

    @app.get("/batches/{batch_id}/next-task")
    def next_task(batch_id: str, reviewer_id: str = Query(...)) -> dict:
        result = guard(lambda: service.next_task(batch_id, reviewer_id))
        if isinstance(result, ReviewTask):
            return {"kind": "task", **dataclasses.asdict(result)}
        return {"kind": "round_status", **dataclasses.asdict(result)}

    @app.post("/tasks/{task_id}/verdict")
    def submit_verdict(task_id: str, req: VerdictRequest) -> dict:
        return guard(
            lambda: service.submit_verdict(
                req.batch_id, task_id, req.reviewer_id, req.verdict, req.correction
            )
        )

    @app.post("/batches/{batch_id}/advance")
    def advance(batch_id: str) -> dict:
        return _batch_payload(guard(lambda: service.advance_round(batch_id)))

    @app.get("/records")
    def list_records(review_state: str | None = None, domain: str | None = None) -> list[dict]:
        records = store.instructions()
        if review_state:
            records = [r for r in records if r.review_state.value == review_state]
        if domain:
            wanted = Domain.parse(domain)
            records = [r for r in records if r.domain is wanted]
        return [r.to_dict() for r in sorted(records, key=lambda r: r.id)]

    @app.get("/blobs/{content_id}")
    def blob(content_id: str) -> Response:
        data = guard(lambda: store.open_blob(content_id))
        media = "image/png" if data.startswith(b"\x89PNG") else "application/octet-stream"
        return Response(content=data, media_type=media)

    return app


def _batch_payload(view) -> dict:
    d = dataclasses.asdict(view)
    d["domain"] = view.domain.value
    return d


def serve(store_dir: str, host: str = "127.0.0.1", port: int = 8400) -> None:
    import uvicorn

    uvicorn.run(create_app(store_dir), host=host, port=port, log_level="warning")
