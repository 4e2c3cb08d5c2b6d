"""Shared Pydantic models for lab reports."""

from typing import Any

from pydantic import BaseModel, Field


class RunReport(BaseModel):
    """Standard report emitted by every successful subcommand."""

    success: bool = Field(description="Whether the subcommand succeeded")
    subcommand: str = Field(description="Subcommand that produced the report")
    message: str = Field(description="Human-readable summary")
    data: dict[str, Any] = Field(
        default_factory=dict, description="Report payload"
    )
    tolerances: dict[str, float] = Field(
        default_factory=dict, description="Tolerance each reported value was checked against"
    )


class ErrorReport(BaseModel):
    """Standard error report printed on failure."""

    error: str = Field(description="Error type or code")
    message: str = Field(description="Error message")
    exit_code: int = Field(description="Process exit code")
    details: dict[str, Any] | None = Field(
        default=None, description="Additional diagnostic details"
    )


class RunLog(BaseModel):
    """Provenance record written next to the outputs of a run."""

    subcommand: str = Field(description="Subcommand name")
    exit_code: int = Field(description="Process exit code")
    wall_time_s: float = Field(ge=0.0, description="Wall-clock duration in seconds")
    started_at: str = Field(description="ISO-8601 start timestamp (UTC)")
    manifest: dict[str, Any] = Field(description="Resolved manifest with defaults")
    outputs: list[str] = Field(default_factory=list, description="Files written")
    tolerances: dict[str, float] = Field(
        default_factory=dict, description="Tolerances the reported values were checked against"
    )
