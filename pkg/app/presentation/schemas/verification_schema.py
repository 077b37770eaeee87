from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.domain.entities.report import RunMode


# Request Schema


class VerificationRequest(BaseModel):
    """Schema of a verification request: program text plus run options."""

    source: str = Field(
        ...,
        min_length=1,
        description="Program in the masking DSL.",
        examples=["#public p;\n#private k;\n#random r;\nc = k ^ r;\nreturn c;"],
    )
    order: int = Field(1, ge=1, le=8, description="Probing order d.")
    width: int = Field(8, description="Word width κ in bits (1, 2, 4, 8 or 16).")
    mode: RunMode = Field(RunMode.FULL, description="`types` stops after the type phase.")
    workers: int = Field(1, ge=1, le=64, description="Worker threads for exploration and counting.")
    bit_budget: Optional[int] = Field(None, ge=1, le=64, description="Counting budget in bits; defaults to settings.")


# Response Schemas


class LeakResponse(BaseModel):
    """One potential leaky set and its resolution."""

    observables: List[str]
    status: str
    level: str
    backend: Optional[str] = None
    witness: Optional[Dict[str, Any]] = None
    note: Optional[str] = None
    proof: Optional[Dict[str, Any]] = None


class VerificationResponse(BaseModel):
    """Verification report as returned by the API."""

    schema_version: int
    source: str
    order: int
    width: int
    mode: RunMode
    verdict: str = Field(..., examples=["secure"])
    genuine_leaks: List[LeakResponse]
    spurious_count: int
    undecided: List[LeakResponse]
    potential_leaks: List[List[str]]
    x_check: List[str]
    stats: Dict[str, int]
    timings: Dict[str, float]
    patterns: List[Dict[str, Any]]
    proofs: List[Dict[str, Any]]

    model_config = ConfigDict(from_attributes=True)


class PatternResponse(BaseModel):
    """A stored pattern and the number of sets it served."""

    id: Optional[int]
    pattern: str
    verdict: str
    sets: int
    provenance: str
