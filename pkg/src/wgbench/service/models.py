"""Pydantic request/response schemas for the service API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class PlanRequest(BaseModel):
    ipv6_global_id: Optional[int] = Field(default=None, ge=0)


class PlanResponse(BaseModel):
    plan: dict
    firewall: str
    ipv6: Optional[dict[str, str]] = None
    tunnel_scope: list[str]


class RunRequest(BaseModel):
    scenario: str
    seed: int = 42
    count: int = Field(default=1000, gt=0)
    config: Optional[dict] = None


class RunResponse(BaseModel):
    scenario: str
    samples_csv: str
    events_csv: str
    ok_count: int
    failed_count: int
    handshake_count: int


class StatsRequest(BaseModel):
    samples_csv: str


class StatsResponse(BaseModel):
    summary: dict
    table: str


class ReportRequest(BaseModel):
    samples_csv: str
    bins: int = Field(default=10, ge=1)
    percentiles: list[float] = Field(default_factory=lambda: [0.95, 0.97, 0.99])


class ReportResponse(BaseModel):
    histogram_csv: str
    percentiles: dict[str, float]


class CheckResult(BaseModel):
    label: str
    implied_n: int
    predicted_ci: float
    published_ci: float
    passed: bool


class CheckResponse(BaseModel):
    results: list[CheckResult]
    all_passed: bool


class MatchCommand(BaseModel):
    sequence: int
    issued_at_ms: float
    turns_on: bool


class MatchEvent(BaseModel):
    monitor_timestamp_ms: float
    turned_on: bool


class MatchRequest(BaseModel):
    commands: list[MatchCommand]
    events: list[MatchEvent]
    clock_offset_bound_ms: float = 10.0
    window_ms: float = 5000.0


class MatchResponse(BaseModel):
    matched: list[tuple[int, float]]
    unmatched_commands: list[int]
    orphan_events: list[float]
