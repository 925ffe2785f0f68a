"""HTTP+JSON layer over SessionService, versioned under /v1.

Endpoints run as sync handlers in the framework's threadpool; per-session
locking inside the service keeps concurrent mutations serialized. Error
responses use a uniform {code, message} body.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .. import __version__
from .core import ServiceError, SessionService


class CreateSessionRequest(BaseModel):
    kind: str
    config: dict = {}


class AnswerRequest(BaseModel):
    trial_index: int
    answer: str


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="jndq session service", version=__version__)

    @app.exception_handler(ServiceError)
    def _service_error(_request: Request, exc: ServiceError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.http_status,
            content={"code": exc.code, "message": exc.message},
        )

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/v1/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> dict:
        return service.create_session(request.kind, request.config)

    @app.get("/v1/sessions/{session_id}/trial")
    def get_trial(session_id: str) -> dict:
        return service.get_next_trial(session_id)

    @app.post("/v1/sessions/{session_id}/answers")
    def post_answer(session_id: str, request: AnswerRequest) -> dict:
        return service.post_answer(session_id, request.trial_index, request.answer)

    @app.get("/v1/sessions/{session_id}/result")
    def get_result(session_id: str) -> dict:
        return service.get_result(session_id)

    @app.get("/v1/sessions/{session_id}/audit")
    def get_audit(session_id: str) -> dict:
        return service.audit(session_id)

    @app.get("/v1/stimuli/{token}")
    def get_stimulus(token: str) -> FileResponse:
        path = service.open_stimulus(token)
        return FileResponse(path, media_type="audio/wav")

    return app
