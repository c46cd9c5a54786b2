"""HTTP service exposing one mission directory to the operator console.

Mutating requests are serialized behind a lock and carry the state
version they were issued against; a mismatch yields a version_conflict
response and no state change.  Reads are concurrent.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from ..errors import ConfigError, RadSurveyError, VersionConflictError
from ..mission import Mission, OPERATOR_INPUTS, PRIMARY_ARTIFACT, STAGES, run_stage
from .models import (
    AdvanceRequest,
    MutationResponse,
    ObstaclesRequest,
    StateResponse,
    SweepDirRequest,
    UnloadPointsRequest,
    ValidateObstaclesRequest,
)

_STATUS = {
    "version_conflict": 409,
    "pending_input": 409,
    "sequencing": 409,
    "stale_config": 409,
    "config": 400,
    "extent": 400,
    "geometry": 400,
    "domain": 400,
    "data": 400,
    "unreachable": 409,
}


def create_app(mission_dir) -> FastAPI:
    mission = Mission(mission_dir)
    app = FastAPI(title="radsurveyor mission service")
    lock = threading.Lock()

    @app.exception_handler(RadSurveyError)
    async def _survey_error(request: Request, exc: RadSurveyError):
        return JSONResponse(
            status_code=_STATUS.get(exc.code, 500),
            content={"code": exc.code, "message": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"code": "validation", "message": str(exc)})

    def state_response() -> StateResponse:
        state = mission.load_state()
        stage = state["stage"]
        next_idx = STAGES.index(stage) + 1
        pending = []
        if next_idx < len(STAGES):
            for op_name, required in OPERATOR_INPUTS.get(STAGES[next_idx], []):
                if required and mission.operator_input(op_name) is None:
                    pending.append(op_name)
        known_ops = sorted({name for ops in OPERATOR_INPUTS.values() for name, _ in ops})
        return StateResponse(
            stage=stage,
            version=state["version"],
            artifacts=state.get("artifacts", {}),
            pending_inputs=pending,
            stale_stages=mission.stale_stages(),
            operator_inputs={name: mission.operator_input(name) is not None for name in known_ops},
        )

    def check_version(seen: int) -> None:
        current = mission.load_state()["version"]
        if seen != current:
            raise VersionConflictError(f"state version is {current}, request was issued against {seen}")

    @app.get("/state", response_model=StateResponse)
    def get_state():
        return state_response()

    @app.get("/artifact/{stage}")
    def get_artifact(stage: str, name: str | None = None):
        state = mission.load_state()
        files = state.get("artifacts", {}).get(stage)
        if stage not in PRIMARY_ARTIFACT:
            return JSONResponse(status_code=404, content={"code": "not_found", "message": f"unknown stage {stage}"})
        if not files:
            return JSONResponse(
                status_code=404, content={"code": "not_found", "message": f"stage {stage} has no artifact yet"}
            )
        chosen = files[0]
        if name is not None:
            if name not in files:
                return JSONResponse(
                    status_code=404, content={"code": "not_found", "message": f"no artifact {name} for {stage}"}
                )
            chosen = name
        path = mission.artifact_path(chosen)
        body = path.read_text()
        headers = {"X-Mission-Version": str(state["version"])}
        if chosen.endswith(".json"):
            return PlainTextResponse(body, media_type="application/json", headers=headers)
        return PlainTextResponse(body, media_type="text/csv", headers=headers)

    def _mutate(version: int, fn) -> MutationResponse:
        with lock:
            check_version(version)
            fn()
            state = mission.load_state()
            return MutationResponse(stage=state["stage"], version=state["version"])

    @app.post("/operator/obstacles", response_model=MutationResponse)
    def post_obstacles(req: ObstaclesRequest):
        payload = {"polygons": [p.model_dump() for p in req.polygons]}
        return _mutate(req.version, lambda: mission.set_operator_input("obstacles", payload))

    @app.post("/operator/unload-points", response_model=MutationResponse)
    def post_unload_points(req: UnloadPointsRequest):
        payload = {"points": [list(p) for p in req.points]}
        return _mutate(req.version, lambda: mission.set_operator_input("unload_points", payload))

    @app.post("/operator/sweep-dir", response_model=MutationResponse)
    def post_sweep_dir(req: SweepDirRequest):
        if req.mode == "fixed" and req.radians is None:
            raise ConfigError("fixed sweep mode requires radians")
        payload = {"mode": req.mode}
        if req.radians is not None:
            payload["radians"] = req.radians
        return _mutate(req.version, lambda: mission.set_operator_input("sweep_dir", payload))

    @app.post("/operator/validate-obstacles", response_model=MutationResponse)
    def post_validate(req: ValidateObstaclesRequest):
        return _mutate(req.version, lambda: mission.set_operator_input("validate_obstacles", {"confirmed": req.confirmed}))

    @app.post("/advance/{stage}", response_model=MutationResponse)
    def post_advance(stage: str, req: AdvanceRequest):
        return _mutate(req.version, lambda: run_stage(mission.dir, stage, force=req.force))

    return app
