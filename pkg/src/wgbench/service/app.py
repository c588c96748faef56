"""FastAPI service wrapping the network plan, scenario runner, statistics
and published-table consistency checks."""

from __future__ import annotations

import json

from fastapi import FastAPI, HTTPException

from .. import netplan, stats
from ..bench import (
    CommandRecord,
    ScenarioConfig,
    ScenarioId,
    default_calibration,
    match_events,
    run_scenario,
    samples_from_csv,
    samples_to_csv,
)
from ..hub import LightEvent, events_to_csv
from ..tables import PUBLISHED
from .models import (
    CheckResponse,
    CheckResult,
    MatchRequest,
    MatchResponse,
    PlanRequest,
    PlanResponse,
    ReportRequest,
    ReportResponse,
    RunRequest,
    RunResponse,
    StatsRequest,
    StatsResponse,
)

app = FastAPI(title="wgbench", version="0.1.0")


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}


@app.post("/plan", response_model=PlanResponse)
def make_plan(req: PlanRequest) -> PlanResponse:
    plan = netplan.default_plan()
    ipv6 = None
    if req.ipv6_global_id is not None:
        if req.ipv6_global_id >= 2 ** 40:
            raise HTTPException(status_code=400, detail="global id must fit in 40 bits")
        ipv6 = {
            name: str(net)
            for name, net in netplan.derive_ipv6_plan(plan, req.ipv6_global_id).items()
        }
    return PlanResponse(
        plan=json.loads(plan.to_json()),
        firewall=netplan.render_firewall(plan),
        ipv6=ipv6,
        tunnel_scope=sorted(str(n) for n in netplan.tunnel_scope(plan)),
    )


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    try:
        scenario = ScenarioId(req.scenario)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"unknown scenario {req.scenario!r}")
    if req.config is not None:
        try:
            config = ScenarioConfig.from_json(json.dumps(req.config))
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad config: {exc}")
    else:
        config = default_calibration(scenario, seed=req.seed, command_count=req.count)
    result = run_scenario(config)
    ok = sum(1 for s in result.samples if s.status == "ok")
    if ok == 0:
        raise HTTPException(status_code=409, detail="all samples failed")
    return RunResponse(
        scenario=scenario.value,
        samples_csv=samples_to_csv(scenario.value, result.samples),
        events_csv=events_to_csv(result.events),
        ok_count=ok,
        failed_count=len(result.samples) - ok,
        handshake_count=result.handshake_count,
    )


def _ok_delays(samples_csv: str) -> list[float]:
    try:
        _, samples = samples_from_csv(samples_csv)
    except (ValueError, IndexError) as exc:
        raise HTTPException(status_code=400, detail=f"bad CSV: {exc}")
    return [s.delay_ms for s in samples if s.status == "ok" and s.delay_ms is not None]


@app.post("/stats", response_model=StatsResponse)
def compute_stats(req: StatsRequest) -> StatsResponse:
    delays = _ok_delays(req.samples_csv)
    if len(delays) < 4:
        raise HTTPException(status_code=409, detail="need at least 4 ok samples")
    try:
        summary = stats.describe(delays)
    except stats.DegenerateSampleError:
        raise HTTPException(status_code=409, detail="degenerate sample")
    return StatsResponse(summary=json.loads(summary.to_json()), table=summary.render_table())


@app.post("/report", response_model=ReportResponse)
def report(req: ReportRequest) -> ReportResponse:
    delays = _ok_delays(req.samples_csv)
    if not delays:
        raise HTTPException(status_code=409, detail="no ok samples")
    hist = stats.histogram(delays, req.bins)
    percentiles = {}
    for q in req.percentiles:
        if not 0 < q <= 1:
            raise HTTPException(status_code=400, detail=f"percentile {q} outside (0, 1]")
        percentiles[f"{q:g}"] = stats.percentile(delays, q)
    return ReportResponse(histogram_csv=hist.to_csv(), percentiles=percentiles)


@app.get("/check", response_model=CheckResponse)
def check(tolerance: float = 0.02) -> CheckResponse:
    if tolerance <= 0:
        raise HTTPException(status_code=400, detail="tolerance must be positive")
    results = []
    for pub in PUBLISHED:
        out = stats.consistency_check(
            pub.label,
            sd=pub.standard_deviation,
            se=pub.standard_error,
            ci=pub.confidence_level_95,
            minimum=pub.minimum,
            maximum=pub.maximum,
            value_range=pub.range,
            tolerance=tolerance,
        )
        results.append(CheckResult(
            label=out.label,
            implied_n=out.implied_n,
            predicted_ci=out.predicted_ci,
            published_ci=out.published_ci,
            passed=out.passed,
        ))
    return CheckResponse(results=results, all_passed=all(r.passed for r in results))


@app.post("/match", response_model=MatchResponse)
def match(req: MatchRequest) -> MatchResponse:
    commands = [CommandRecord(c.sequence, c.issued_at_ms, c.turns_on) for c in req.commands]
    events = [LightEvent(e.monitor_timestamp_ms, e.turned_on) for e in req.events]
    try:
        report = match_events(commands, events, req.clock_offset_bound_ms, req.window_ms)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return MatchResponse(
        matched=report.matched,
        unmatched_commands=report.unmatched_commands,
        orphan_events=report.orphan_events,
    )
