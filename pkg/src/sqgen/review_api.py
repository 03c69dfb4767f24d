"""HTTP surface for the review workflow."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .review import (
    DuplicateMarkError,
    EmptyRunError,
    ReviewItem,
    ReviewStore,
    UnknownItemError,
    UnknownRunError,
    UnknownSessionError,
)


class CreateSessionRequest(BaseModel):
    run_id: str
    reviewer_id: str
    seed: int = 0


class MarkRequest(BaseModel):
    item_id: str
    verdict: str = Field(pattern="^(accept|reject)$")
    note: str | None = None


def _item_payload(store: ReviewStore, session_id: str, item: ReviewItem) -> dict:
    stats = store.session_stats(session_id)
    return {
        "item_id": item.item_id,
        "pair_id": item.pair_id,
        "candidate": item.text,
        "source_question": item.source_question,
        "answer": item.answer,
        "position": store.item_position(session_id, item.item_id),
        "total": stats["total"],
    }


def create_app(store: ReviewStore) -> FastAPI:
    app = FastAPI(title="sqgen review service")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest) -> dict:
        try:
            session = store.create_session(req.run_id, req.reviewer_id, req.seed)
        except UnknownRunError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except EmptyRunError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "session_id": session.session_id,
            "run_id": session.run_id,
            "reviewer_id": session.reviewer_id,
            "seed": session.seed,
            "total": len(session.queue),
            "created_at": session.created_at,
        }

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str) -> dict:
        try:
            item = store.next_item(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if item is None:
            return {"done": True, "stats": store.session_stats(session_id)}
        return _item_payload(store, session_id, item)

    @app.post("/sessions/{session_id}/marks")
    def submit_mark(session_id: str, req: MarkRequest) -> dict:
        try:
            return store.submit_mark(session_id, req.item_id, req.verdict, req.note)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except DuplicateMarkError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/sessions/{session_id}/stats")
    def session_stats(session_id: str) -> dict:
        try:
            return store.session_stats(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    return app
