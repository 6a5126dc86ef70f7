"""Health check endpoint."""

from typing import Any, Dict

from fastapi import APIRouter, Depends

from salrank.api.dependencies import StubState, get_stub_state

router = APIRouter(prefix="/health", tags=["health"])


@router.get("")
async def health_check(state: StubState = Depends(get_stub_state)) -> Dict[str, Any]:
    """
    Health check endpoint.

    Returns:
        Health status and whether oracle answers are served
    """
    return {"status": "healthy", "oracle_mode": state.oracle_mode}
