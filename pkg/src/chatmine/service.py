"""HTTP API backing the annotation UI, plus static hosting for its bundle.

REST-shaped JSON over the store:

* ``GET  /api/health``                        — liveness probe
* ``GET  /api/matches``                       — match summaries, filter + paging
* ``GET  /api/matches/{id}/messages``         — a match's chat in clock order
* ``GET  /api/messages/{id}``                 — one message
* ``PUT  /api/messages/{id}/labels``          — save an annotation patch
* ``POST /api/messages/{id}/clear-unknowns``  — resolve every unknown to false

Label bodies mirror the tri-state as JSON ``true`` / ``false`` / ``null``;
a PUT replaces the message's manual labels wholesale (omitted attributes
mean unknown).  Saves are last-write-wins unless the patch carries
``expected_version``, in which case a stale save gets 409 with the
current message echoed back.  Rescoring happens synchronously inside the
save, so responses always carry fresh scores.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .labels import ATTRIBUTES, InvalidLabels, LabelSet
from .store import ChatStore, Conflict, MessageRow, NotFound

__all__ = ["DEFAULT_BIND_ADDR", "create_app", "parse_bind_addr", "serve_forever"]

DEFAULT_BIND_ADDR = "127.0.0.1:8080"


class LabelPatch(BaseModel):
    labels: dict[str, bool | None] = Field(default_factory=dict)
    annotator_id: str = ""
    expected_version: int | None = None


def _label_set(raw: dict[str, bool | None]) -> LabelSet:
    unknown = sorted(set(raw) - set(ATTRIBUTES))
    if unknown:
        raise HTTPException(
            status_code=400, detail=f"unknown label attribute(s): {', '.join(unknown)}"
        )
    try:
        return LabelSet(**{attr: raw.get(attr) for attr in ATTRIBUTES})
    except InvalidLabels as exc:
        raise HTTPException(status_code=400, detail=str(exc))


def message_json(row: MessageRow, author_name: str = "") -> dict:
    return {
        "message_id": row.message_id,
        "match_id": row.match_id,
        "player_guid": row.player_guid,
        "author_account_id": row.author_account_id,
        "author_name": author_name,
        "clock": row.clock,
        "text": row.text,
        "auto_labels": row.auto_labels.as_dict(),
        "manual_labels": row.manual_labels.as_dict(),
        "cs": row.cs,
        "pcs": row.pcs,
        "version": row.version,
    }


def create_app(store: ChatStore, ui_dir: str | os.PathLike | None = None) -> FastAPI:
    app = FastAPI(title="chat annotation service", docs_url=None, redoc_url=None)

    def author_names(rows) -> dict[int, str]:
        names: dict[int, str] = {}
        for row in rows:
            if row.author_account_id not in names:
                try:
                    player = store.get_player(row.author_account_id)
                    names[row.author_account_id] = player.display_name
                except NotFound:
                    names[row.author_account_id] = ""
        return names

    def fetch_message(message_id: str) -> MessageRow:
        try:
            return store.get_message(message_id)
        except NotFound:
            raise HTTPException(status_code=404, detail=f"no such message: {message_id}")

    def single_message_json(row: MessageRow) -> dict:
        return message_json(row, author_names([row])[row.author_account_id])

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "messages": store.message_count()}

    @app.get("/api/matches")
    def list_matches(
        only_unclassified: bool = False,
        page: int = Query(1, ge=1),
        page_size: int = Query(50, ge=1, le=500),
    ) -> dict:
        summaries, total = store.list_matches(
            only_unclassified=only_unclassified, page=page, page_size=page_size
        )
        return {
            "matches": [
                {
                    "match_id": s.match_id,
                    "source_id": s.source_id,
                    "message_count": s.message_count,
                    "unclassified_messages": s.unclassified_messages,
                    "classified": s.classified,
                }
                for s in summaries
            ],
            "page": page,
            "page_size": page_size,
            "total": total,
        }

    @app.get("/api/matches/{match_id}/messages")
    def match_messages(match_id: str) -> dict:
        try:
            rows = store.get_match_messages(match_id)
        except NotFound:
            raise HTTPException(status_code=404, detail=f"no such match: {match_id}")
        names = author_names(rows)
        return {
            "match_id": match_id,
            "messages": [message_json(row, names[row.author_account_id]) for row in rows],
        }

    @app.get("/api/messages/{message_id}")
    def get_message(message_id: str) -> dict:
        return {"message": single_message_json(fetch_message(message_id))}

    @app.put("/api/messages/{message_id}/labels")
    def put_labels(message_id: str, patch: LabelPatch) -> JSONResponse:
        labels = _label_set(patch.labels)
        fetch_message(message_id)
        try:
            updated = store.set_manual_labels(
                message_id,
                labels,
                annotator_id=patch.annotator_id,
                expected_version=patch.expected_version,
            )
        except Conflict as exc:
            return JSONResponse(
                status_code=409,
                content={
                    "detail": str(exc),
                    "current": single_message_json(exc.current),
                },
            )
        except InvalidLabels as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return JSONResponse(content={"message": single_message_json(updated)})

    @app.post("/api/messages/{message_id}/clear-unknowns")
    def clear_unknowns(message_id: str) -> dict:
        fetch_message(message_id)
        return {"message": single_message_json(store.clear_unknowns(message_id))}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=os.fspath(ui_dir), html=True), name="ui")
    return app


def parse_bind_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must look like host:port, got {value!r}")
    return host, int(port)


def serve_forever(
    store: ChatStore,
    bind_addr: str = DEFAULT_BIND_ADDR,
    ui_dir: str | os.PathLike | None = None,
) -> None:
    import uvicorn

    host, port = parse_bind_addr(bind_addr)
    uvicorn.run(create_app(store, ui_dir=ui_dir), host=host, port=port, log_level="info")
