"""Stub MLLM + grounding server (FastAPI)."""

import logging
import os
from contextlib import asynccontextmanager
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, Request, status
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from salrank.api.dependencies import StubState
from salrank.api.routes import health, stub
from salrank.middleware.logging import RequestLoggingMiddleware
from salrank.models.wire import Detection
from salrank.utils.exceptions import InputError, SalRankException
from salrank.utils.logging_config import current_run_id

logger = logging.getLogger(__name__)


def create_app(
    dataset_dir: Optional[Path] = None,
    canned_text: Optional[str] = None,
    detections: Optional[List[Detection]] = None,
) -> FastAPI:
    """Build a stub server; see ``StubState`` for what it answers."""
    state = StubState(dataset_dir=dataset_dir, canned_text=canned_text, detections=detections)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger.info(
            "Stub server started",
            extra={
                "oracle_mode": state.oracle_mode,
                "dataset": str(dataset_dir) if dataset_dir else None,
                "process_id": os.getpid(),
            },
        )
        yield
        logger.info("Stub server shutting down", extra={"process_id": os.getpid()})

    app = FastAPI(
        title="salrank stub",
        description="Stand-in MLLM ranking and grounding endpoints",
        version="1.0.0",
        lifespan=lifespan,
    )
    app.state.stub = state

    @app.exception_handler(RequestValidationError)
    async def validation_exception_handler(request: Request, exc: RequestValidationError) -> JSONResponse:
        logger.warning(
            "Validation error",
            extra={"path": request.url.path, "errors": exc.errors()},
        )
        return JSONResponse(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            content={"error": "Validation error", "detail": exc.errors(), "run_id": current_run_id()},
        )

    @app.exception_handler(SalRankException)
    async def salrank_exception_handler(request: Request, exc: SalRankException) -> JSONResponse:
        if isinstance(exc, InputError):
            status_code = status.HTTP_400_BAD_REQUEST
            error_message = "Invalid request"
        else:
            status_code = status.HTTP_500_INTERNAL_SERVER_ERROR
            error_message = "Internal server error"
        logger.error(
            f"Exception: {error_message}",
            extra={"path": request.url.path, "exception": str(exc)},
            exc_info=not isinstance(exc, InputError),
        )
        return JSONResponse(
            status_code=status_code,
            content={"error": error_message, "detail": str(exc), "run_id": current_run_id()},
        )

    app.add_middleware(RequestLoggingMiddleware)
    app.include_router(health.router)
    app.include_router(stub.router)

    @app.get("/")
    async def root():
        return {"name": "salrank stub", "version": "1.0.0", "endpoints": ["/v1/vsor", "/v1/ground"]}

    return app
