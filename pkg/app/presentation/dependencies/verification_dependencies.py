from fastapi import Depends
from sqlalchemy.orm import Session

from app.application.use_cases.verification_use_cases import VerificationUseCases
from app.core.database import get_db
from app.infrastructure.repositories.pattern_repository_impl import PatternRepositoryImpl


# --- Repository dependencies ---


def get_pattern_repository(db: Session = Depends(get_db)) -> PatternRepositoryImpl:
    """
    Dependency provider for the pattern store.

    Loads every stored pattern of the current SQLAlchemy session into the
    in-memory fingerprint index.
    """
    return PatternRepositoryImpl(db)


# --- Use case dependencies ---


def get_verification_use_cases(
    pattern_repository: PatternRepositoryImpl = Depends(get_pattern_repository),
) -> VerificationUseCases:
    """
    Dependency provider for the verification use cases.
    """
    return VerificationUseCases(pattern_store=pattern_repository)
