import logging
from typing import List

from fastapi import APIRouter, Depends, HTTPException, status
from fastapi.concurrency import run_in_threadpool

from app.application.use_cases.pattern_use_cases import PatternUseCases
from app.application.use_cases.verification_use_cases import VerificationUseCases
from app.core.exceptions import ElaborationError, ParseError, TableError
from app.domain.entities.report import RunConfig
from app.infrastructure.repositories.pattern_repository_impl import PatternRepositoryImpl
from app.presentation.dependencies.verification_dependencies import (
    get_pattern_repository,
    get_verification_use_cases,
)
from app.presentation.schemas.verification_schema import (
    PatternResponse,
    VerificationRequest,
    VerificationResponse,
)

logger = logging.getLogger(__name__)

router = APIRouter(tags=["Verification"])


@router.post("/verify", response_model=VerificationResponse)
async def verify(
    request: VerificationRequest,
    verification_use_cases: VerificationUseCases = Depends(get_verification_use_cases),
):
    """
    Verify a masked program at the requested probing order.

    Returns the full report; the verdict is `secure`, `leaky` or `undecided`.
    """
    try:
        config = RunConfig.from_settings(
            order=request.order,
            width=request.width,
            mode=request.mode,
            workers=request.workers,
            bit_budget=request.bit_budget,
        )
    except ValueError as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
    # No files or external processes from the HTTP surface
    config.smt_dir = None
    config.solver = None

    try:
        report = await run_in_threadpool(verification_use_cases.run, config, request.source)
    except (ParseError, ElaborationError, TableError) as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
    return report.to_dict()


@router.get("/patterns", response_model=List[PatternResponse])
async def list_patterns(
    width: int = 8,
    pattern_repository: PatternRepositoryImpl = Depends(get_pattern_repository),
):
    """
    List stored patterns of one width with the number of sets each served.
    """
    return PatternUseCases(pattern_repository, width).summary()
