"""HTTP service exposing missions, replay, the timing bench, and map
introspection over the core package."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (ConfigError, MapFormatError, PayloadSimError,
                      PlannerError, ScenarioError, SyncError)
from ..mission import (format_report, format_sync_table, map_info,
                       parse_mission_config, replay_metrics,
                       resolve_output_dir, run_mission, simulate_sync_bench)
from .models import (BenchRequest, BenchResponse, ErrorBody, MapInfoRequest,
                     MapInfoResponse, MissionRequest, MissionResponse,
                     ReplayRequest, ReplayResponse, SyncRowModel)

_ERROR_TYPES = (
    (ConfigError, "config"),
    (ScenarioError, "scenario"),
    (PlannerError, "planner"),
    (MapFormatError, "map_format"),
    (SyncError, "sync"),
)


def _error_type(exc: PayloadSimError) -> str:
    for klass, name in _ERROR_TYPES:
        if isinstance(exc, klass):
            return name
    return "internal"


def create_app() -> FastAPI:
    app = FastAPI(title="payloadsim", version="0.1.0")

    @app.exception_handler(PayloadSimError)
    async def _domain_error(request: Request, exc: PayloadSimError):
        body = ErrorBody(error_type=_error_type(exc), message=str(exc))
        return JSONResponse(status_code=400, content=body.model_dump())

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request: Request, exc: FileNotFoundError):
        body = ErrorBody(error_type="config", message=str(exc))
        return JSONResponse(status_code=400, content=body.model_dump())

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.post("/mission/run", response_model=MissionResponse)
    def mission_run(req: MissionRequest):
        config = parse_mission_config(req.merged_text())
        report = run_mission(config)
        return MissionResponse.from_report(report, resolve_output_dir(config),
                                           format_report(report))

    @app.post("/mission/replay", response_model=ReplayResponse)
    def mission_replay(req: ReplayRequest):
        recomputed, stored, mismatched = replay_metrics(req.output_dir)
        return ReplayResponse(recomputed=recomputed, stored=stored,
                              mismatched=mismatched, match=not mismatched)

    @app.post("/sync/bench", response_model=BenchResponse)
    def sync_bench(req: BenchRequest):
        if req.duration <= 0:
            raise ConfigError("bench duration must be positive")
        rows = simulate_sync_bench(req.duration, req.seed)
        return BenchResponse(rows=[SyncRowModel.from_row(r) for r in rows],
                             table_text=format_sync_table(rows))

    @app.post("/map/info", response_model=MapInfoResponse)
    def map_info_endpoint(req: MapInfoRequest):
        return MapInfoResponse(**map_info(req.path))

    return app


app = create_app()
