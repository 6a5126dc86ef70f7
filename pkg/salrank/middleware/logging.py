"""Request/response logging middleware."""

import logging
import time
from typing import Callable

from fastapi import Request, Response
from starlette.middleware.base import BaseHTTPMiddleware

from salrank.utils.logging_config import bind_run_id

logger = logging.getLogger(__name__)


class RequestLoggingMiddleware(BaseHTTPMiddleware):
    """Tags each request with a run id and logs it with timing."""

    async def dispatch(self, request: Request, call_next: Callable) -> Response:
        with bind_run_id(request.headers.get("X-Run-ID")) as run_id:
            request.state.run_id = run_id

            start_time = time.time()
            method = request.method
            path = request.url.path
            logger.debug(f"Stub request: {method} {path}", extra={"method": method, "path": path})

            try:
                response = await call_next(request)
            except Exception:
                logger.error(
                    f"Stub error: {method} {path}",
                    extra={
                        "method": method,
                        "path": path,
                        "process_time_ms": round((time.time() - start_time) * 1000, 2),
                    },
                    exc_info=True,
                )
                raise

            logger.info(
                f"Stub response: {method} {path} - {response.status_code}",
                extra={
                    "method": method,
                    "path": path,
                    "status_code": response.status_code,
                    "process_time_ms": round((time.time() - start_time) * 1000, 2),
                },
            )
            response.headers["X-Run-ID"] = run_id
            return response
