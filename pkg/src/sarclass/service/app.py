"""HTTP front end over trained models and the keyword matcher."""

from __future__ import annotations

import json
import logging
from types import MappingProxyType

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from ..baselines import default_matcher
from ..classifiers import TrainedModel, load_model
from ..corpus import Task
from ..errors import DataError
from ..pipeline import classify_message, model_id
from .schemas import MAX_MESSAGE_BYTES, ClassifyRequest, ClassifyResponse, ErrorBody, Health

log = logging.getLogger(__name__)

# raw bodies far beyond the message cap are refused before parsing
_MAX_BODY_BYTES = 4 * MAX_MESSAGE_BYTES + 4096


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse({"detail": detail}, status_code=status)


def _check_task(m: TrainedModel, task: Task) -> None:
    if m.task is not None and m.task is not task:
        raise DataError(f"model was trained for {m.task.value}, not {task.value}")
    if m.vectorizer is None:
        raise DataError("model carries no vectorizer and cannot classify text")


def create_app(binary_model: TrainedModel,
               multiclass_model: TrainedModel | None = None) -> FastAPI:
    """Models are validated here and never mutated afterwards."""
    _check_task(binary_model, Task.BINARY)
    loaded = {"binary": binary_model}
    if multiclass_model is not None:
        _check_task(multiclass_model, Task.MULTICLASS)
        loaded["multiclass"] = multiclass_model
    models = MappingProxyType(loaded)
    for m in models.values():
        model_id(m)  # warm the checksum cache
    matcher = default_matcher()

    app = FastAPI(title="sarclass", version="1")

    @app.get("/health", response_model=Health)
    def health() -> Health:
        return Health(models=list(models))

    @app.post("/v1/classify", response_model=ClassifyResponse,
              responses={400: {"model": ErrorBody}, 409: {"model": ErrorBody},
                         413: {"model": ErrorBody}, 415: {"model": ErrorBody}},
              openapi_extra={"requestBody": {"required": True, "content": {
                  "application/json": {"schema": ClassifyRequest.model_json_schema()}}}})
    async def classify(request: Request):
        ctype = request.headers.get("content-type", "")
        if ctype.split(";")[0].strip().lower() != "application/json":
            return _error(415, "content-type must be application/json")
        body = await request.body()
        if len(body) > _MAX_BODY_BYTES:
            return _error(413, f"message exceeds {MAX_MESSAGE_BYTES} bytes")
        try:
            payload = json.loads(body)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            return _error(400, f"malformed JSON: {e}")
        try:
            req = ClassifyRequest.model_validate(payload)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first.get("loc", ()))
            return _error(400, f"{where}: {first['msg']}" if where else first["msg"])
        if len(req.message.encode("utf-8")) > MAX_MESSAGE_BYTES:
            return _error(413, f"message exceeds {MAX_MESSAGE_BYTES} bytes")
        model = models.get(req.task)
        if model is None:
            return _error(409, f"no {req.task} model is loaded; available: {', '.join(models)}")
        result = await run_in_threadpool(classify_message, model, req.message, matcher)
        return ClassifyResponse(**result)

    return app


def load_app(binary_path, multiclass_path=None) -> FastAPI:
    binary = load_model(binary_path)
    multi = load_model(multiclass_path) if multiclass_path else None
    return create_app(binary, multi)


def serve(binary_path, multiclass_path=None, port: int = 8000, host: str = "127.0.0.1") -> None:
    """Load and validate the models, then serve until interrupted.

    Load failures raise before any socket is opened.
    """
    import uvicorn

    app = load_app(binary_path, multiclass_path)
    log.info("serving on %s:%d", host, port)
    uvicorn.run(app, host=host, port=port, log_level="info")
