"""HTTP surface over the engine. Endpoint documentation with request/response
examples lives in PROTOCOL.md at the repository root."""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import (
    InsufficientSamples,
    InvalidCalibration,
    LabelerUnavailable,
    MalformedLabelerOutput,
    StorageError,
    TraceFormatError,
    UnknownSession,
)
from .labels import PersonalFlags
from .modeling import FontParams
from .sensing import SensorSample


class OpenSessionRequest(BaseModel):
    user_id: str
    ipd_cm: Optional[float] = None
    environment_hint: Optional[str] = None


class SensorSampleBody(BaseModel):
    ts_ms: int
    lux: float
    ax: float
    ay: float
    az: float
    eye_px: Optional[float] = None
    dist_cm: Optional[float] = None


class SensorBatch(BaseModel):
    samples: list[SensorSampleBody]


class FlagsBody(BaseModel):
    fatigued: bool = False
    distracted: bool = False
    vision_reduced: bool = False

    def to_flags(self) -> PersonalFlags:
        return PersonalFlags(self.fatigued, self.distracted, self.vision_reduced)


class RecommendRequest(BaseModel):
    flags: FlagsBody = Field(default_factory=FlagsBody)
    environment_hint: Optional[str] = None


class FontParamsBody(BaseModel):
    size_sp: float
    weight_px: float
    line_spacing_em: float
    letter_spacing_em: float


class FeedbackRequest(BaseModel):
    params: FontParamsBody
    flags: FlagsBody = Field(default_factory=FlagsBody)


class SetLabelRequest(BaseModel):
    label: Optional[str] = None
    confirm: bool = False


class EditLabelRequest(BaseModel):
    instruction: str


def _raise_http(exc: Exception):
    if isinstance(exc, UnknownSession):
        raise HTTPException(status_code=404, detail=str(exc))
    if isinstance(exc, InsufficientSamples):
        raise HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, (InvalidCalibration, MalformedLabelerOutput, TraceFormatError, ValueError)):
        raise HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, (StorageError, LabelerUnavailable)):
        raise HTTPException(status_code=503, detail=str(exc))
    raise exc


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="fontadapt", version="0.1.0")
    app.state.engine = engine

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "group_model_version": engine.group_model.version}

    @app.post("/sessions")
    def open_session(body: OpenSessionRequest):
        try:
            session = engine.open_session(
                body.user_id, body.ipd_cm, body.environment_hint
            )
        except Exception as exc:
            _raise_http(exc)
        return {
            "session_id": session.session_id,
            "user_id": session.user_id,
            "ipd_cm": session.ipd_cm,
        }

    @app.post("/sessions/{session_id}/sensors")
    def ingest(session_id: str, body: SensorBatch):
        try:
            samples = [
                SensorSample(
                    timestamp_ms=s.ts_ms,
                    lux=s.lux,
                    accel_offset=(s.ax, s.ay, s.az),
                    eye_span_px=s.eye_px,
                    distance_cm=s.dist_cm,
                )
                for s in body.samples
            ]
            accepted = engine.ingest(session_id, samples)
        except Exception as exc:
            _raise_http(exc)
        return {"accepted": accepted, "submitted": len(body.samples)}

    @app.post("/sessions/{session_id}/recommend")
    def recommend(session_id: str, body: RecommendRequest = RecommendRequest()):
        try:
            if body.environment_hint is not None:
                engine.session(session_id).environment_hint = body.environment_hint
            rec = engine.recommend(session_id, body.flags.to_flags())
        except Exception as exc:
            _raise_http(exc)
        return {
            "params": rec.params.to_dict(),
            "scenario": rec.scenario,
            "model_scenario": rec.model_scenario,
            "model_version": rec.model_version,
            "features_used": list(rec.features_used),
            "latency_ms": rec.latency_ms,
        }

    @app.post("/sessions/{session_id}/feedback")
    def feedback(session_id: str, body: FeedbackRequest):
        try:
            params = FontParams(
                body.params.size_sp,
                body.params.weight_px,
                body.params.line_spacing_em,
                body.params.letter_spacing_em,
            )
            version = engine.feedback(session_id, params, body.flags.to_flags())
        except Exception as exc:
            _raise_http(exc)
        return {"model_version": version}

    @app.get("/sessions/{session_id}/label")
    def get_label(session_id: str):
        try:
            return engine.get_label(session_id)
        except Exception as exc:
            _raise_http(exc)

    @app.post("/sessions/{session_id}/label")
    def set_label(session_id: str, body: SetLabelRequest):
        try:
            return engine.set_label(session_id, body.label, body.confirm)
        except Exception as exc:
            _raise_http(exc)

    @app.patch("/sessions/{session_id}/label")
    def patch_label(session_id: str, body: EditLabelRequest):
        try:
            return engine.edit_label(session_id, body.instruction)
        except Exception as exc:
            _raise_http(exc)

    @app.get("/models/{scenario}")
    def get_model(scenario: str, user_id: Optional[str] = Query(default=None)):
        model = engine.model_snapshot(scenario, user_id)
        if model is None:
            raise HTTPException(status_code=404, detail=f"no model for {scenario!r}")
        return model.to_dict()

    return app
