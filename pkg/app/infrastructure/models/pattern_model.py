from __future__ import annotations
from datetime import datetime, timezone
from sqlalchemy import String, Integer, DateTime, Enum as SQLEnum, Text
from sqlalchemy.orm import Mapped, mapped_column
from app.core.database import Base
from app.domain.entities.distribution import DistType


class PatternModel(Base):
    """Model for resolved computation-set patterns"""

    __tablename__ = "patterns"
    __table_args__ = {"comment": "Stores normalised computation sets and their distribution types"}

    id: Mapped[int] = mapped_column(primary_key=True, index=True)
    fingerprint: Mapped[str] = mapped_column(String(64), nullable=False, index=True)
    width: Mapped[int] = mapped_column(Integer, nullable=False, index=True)
    exprs: Mapped[str] = mapped_column(Text, nullable=False)
    verdict: Mapped[DistType] = mapped_column(
        SQLEnum(DistType, name="dist_type_enum"),
        nullable=False,
    )
    table_tags: Mapped[str] = mapped_column(Text, nullable=False, default="{}")
    provenance: Mapped[str | None] = mapped_column(String(500))
    hits: Mapped[int] = mapped_column(Integer, default=0, nullable=False)

    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True),
        default=lambda: datetime.now(timezone.utc),
        nullable=False,
    )

    def __repr__(self) -> str:
        """Representation of the PatternModel"""
        return (
            f"<PatternModel(id={self.id}, width={self.width}, "
            f"verdict='{self.verdict.value}', hits={self.hits})>"
        )
