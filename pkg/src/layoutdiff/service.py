"""HTTP generation service consumed by the browser editor.

All endpoints are stateless except the session store. Request bodies are
validated before any model work, so a service without loaded models still
rejects malformed requests with 400 rather than 503. Errors always serialize
as {"error": code, "detail": path or message}.
"""
from __future__ import annotations

import base64
import json
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from layoutdiff.conditions import (
    CONDITION_NAMES,
    ConditionError,
    ConditionSet,
    Prompt,
    condition_set_from_json,
    condition_set_to_json,
    conditions_from_layout,
)
from layoutdiff.data import dev_sample
from layoutdiff.layouts import Layout, LayoutError, layout_from_json, layout_to_json
from layoutdiff.metrics import c_usage, design_distance, g_usage
from layoutdiff.rendering import class_palette, render, to_png_bytes
from layoutdiff.rng import derive_seed
from layoutdiff.sampler import (
    GuidanceConfig,
    SamplerError,
    resolve_guidance,
    sample_batch,
)
from layoutdiff.schema import AttributeSchema, SchemaError

MAX_COUNT = 64
HISTORY_LIMIT = 50


class ApiError(Exception):
    """Maps directly to an HTTP error payload."""

    def __init__(self, status: int, code: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail


def _bad(detail: str) -> ApiError:
    return ApiError(400, "validation", detail)


@dataclass
class Session:
    id: str
    history: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class ServiceState:
    schema: AttributeSchema
    bundle: object | None
    dev: bool
    session_log: str | None
    history_limit: int
    sessions: dict[str, Session] = field(default_factory=dict)
    sessions_lock: threading.Lock = field(default_factory=threading.Lock)


def _parse_guidance(obj, present: tuple[str, ...]) -> GuidanceConfig:
    if obj is None:
        obj = {}
    if not isinstance(obj, dict):
        raise _bad("guidance: must be an object")
    unknown = set(obj) - {"weights", "preset", "steps", "seed"}
    if unknown:
        raise _bad(f"guidance.{sorted(unknown)[0]}: unknown field")
    if "weights" in obj and obj["weights"] is not None and "preset" in obj and obj["preset"] is not None:
        raise _bad("guidance: give either weights or preset, not both")
    if obj.get("preset") is not None:
        if not isinstance(obj["preset"], str):
            raise _bad("guidance.preset: must be a string")
        weights = resolve_guidance(obj["preset"], present)
    elif obj.get("weights") is not None:
        if not isinstance(obj["weights"], dict):
            raise _bad("guidance.weights: must be an object")
        weights = {}
        for name, w in obj["weights"].items():
            if name not in CONDITION_NAMES:
                raise _bad(f"guidance.weights.{name}: unknown condition")
            if not isinstance(w, (int, float)) or isinstance(w, bool):
                raise _bad(f"guidance.weights.{name}: must be a number")
            if name not in present:
                raise _bad(f"guidance.weights.{name}: weight given for absent condition")
            weights[name] = float(w)
    else:
        weights = {name: 0.0 for name in present}
    steps = obj.get("steps")
    if steps is not None and (not isinstance(steps, int) or isinstance(steps, bool) or steps < 2):
        raise _bad("guidance.steps: must be an integer of at least 2")
    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise _bad("guidance.seed: must be an integer")
    return GuidanceConfig(weights=weights, steps=steps, seed=seed)


def _parse_conditions(obj, schema: AttributeSchema) -> ConditionSet:
    if obj is None:
        return ConditionSet()
    if not isinstance(obj, dict):
        raise _bad("conditions: must be an object")
    unknown = set(obj) - set(CONDITION_NAMES)
    if unknown:
        raise _bad(f"conditions.{sorted(unknown)[0]}: unknown field")
    try:
        return condition_set_from_json(obj, schema)
    except (ConditionError, LayoutError, SchemaError, KeyError, TypeError) as exc:
        raise _bad(f"conditions: {exc}") from exc


def _generate(state: ServiceState, cs: ConditionSet, gc: GuidanceConfig, count: int) -> list[Layout]:
    if state.bundle is not None:
        return sample_batch(state.bundle, [cs] * count, gc)
    # Dev mode: deterministic grid-based stand-in honoring the conditions,
    # seeded per item exactly like sample_batch.
    return [dev_sample(state.schema, cs, derive_seed(gc.seed, i)) for i in range(count)]


def _layout_payload(layout: Layout) -> tuple[dict, str]:
    raster = render(layout)
    return layout_to_json(layout), base64.b64encode(to_png_bytes(raster)).decode("ascii")


def _generation_payload(state: ServiceState, body: dict) -> dict:
    if not isinstance(body, dict):
        raise _bad("body: must be an object")
    unknown = set(body) - {"conditions", "guidance", "count"}
    if unknown:
        raise _bad(f"{sorted(unknown)[0]}: unknown field")
    cs = _parse_conditions(body.get("conditions"), state.schema)
    count = body.get("count", 1)
    if not isinstance(count, int) or isinstance(count, bool) or not 1 <= count <= MAX_COUNT:
        raise _bad(f"count: must be an integer in [1, {MAX_COUNT}]")
    try:
        gc = _parse_guidance(body.get("guidance"), cs.present_names)
    except SamplerError as exc:
        raise _bad(f"guidance: {exc}") from exc

    if state.bundle is None and not state.dev:
        raise ApiError(503, "models-not-loaded", "no diffusion checkpoint is loaded")
    try:
        layouts = _generate(state, cs, gc, count)
    except SamplerError as exc:
        raise _bad(f"guidance: {exc}") from exc

    payloads = [_layout_payload(l) for l in layouts]
    return {
        "layouts": [p[0] for p in payloads],
        "rasters": [p[1] for p in payloads],
        "guidance": {
            "weights": {k: gc.weights[k] for k in sorted(gc.weights)},
            "steps": gc.steps,
            "seed": gc.seed,
        },
        "count": count,
    }


def create_app(
    schema: AttributeSchema,
    bundle=None,
    *,
    dev: bool = False,
    session_log: str | None = None,
    history_limit: int = HISTORY_LIMIT,
) -> FastAPI:
    state = ServiceState(
        schema=schema,
        bundle=bundle,
        dev=dev,
        session_log=session_log,
        history_limit=history_limit,
    )
    app = FastAPI(title="layoutdiff service")
    app.state.service = state
    # The browser editor may be served from a different origin (static file
    # server); the API is unauthenticated, so a permissive policy is safe.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "detail": exc.detail}
        )

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        path = ".".join(str(p) for p in errors[0]["loc"]) if errors else "body"
        return JSONResponse(status_code=400, content={"error": "validation", "detail": path})

    @app.get("/schema")
    def get_schema():
        palette = class_palette(schema.num_classes)
        legend = [
            {"class_id": k, "name": schema.class_name(k), "color": list(palette[k])}
            for k in range(schema.num_classes)
        ]
        return {
            "schema": schema.to_json(),
            "legend": legend,
            "models_loaded": state.bundle is not None,
            "dev_sampler": state.dev,
        }

    @app.post("/generate")
    def generate(body: dict):
        return _generation_payload(state, body)

    @app.post("/extract-conditions")
    def extract_conditions(body: dict):
        if not isinstance(body, dict):
            raise _bad("body: must be an object")
        unknown = set(body) - {"layout", "prompt"}
        if unknown:
            raise _bad(f"{sorted(unknown)[0]}: unknown field")
        if "layout" not in body:
            raise _bad("layout: required")
        try:
            layout = layout_from_json(body["layout"], schema)
        except (LayoutError, SchemaError, KeyError, TypeError) as exc:
            raise _bad(f"layout: {exc}") from exc
        prompt = None
        if body.get("prompt") is not None:
            sentences = body["prompt"]
            if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
                raise _bad("prompt: must be a list of strings")
            prompt = Prompt(tuple(sentences))
        cs = conditions_from_layout(layout, prompt)
        return {"conditions": condition_set_to_json(cs)}

    @app.post("/metrics")
    def metrics(body: dict):
        if not isinstance(body, dict):
            raise _bad("body: must be an object")
        unknown = set(body) - {"generated", "conditions"}
        if unknown:
            raise _bad(f"{sorted(unknown)[0]}: unknown field")
        if "generated" not in body:
            raise _bad("generated: required")
        try:
            layout = layout_from_json(body["generated"], schema)
        except (LayoutError, SchemaError, KeyError, TypeError) as exc:
            raise _bad(f"generated: {exc}") from exc
        cs = _parse_conditions(body.get("conditions"), schema)
        values: dict[str, float | None] = {
            "c_usage": None,
            "design_distance": None,
            "g_usage": None,
        }
        if cs.class_count is not None:
            values["c_usage"] = c_usage(np.asarray(cs.class_count), layout)
        if cs.given_design is not None:
            values["design_distance"] = design_distance(cs.given_design, layout)
        if cs.guidelines is not None:
            values["g_usage"] = g_usage(cs.guidelines, layout)
        return {"metrics": values}

    @app.post("/session")
    def create_session():
        sid = uuid.uuid4().hex[:12]
        with state.sessions_lock:
            state.sessions[sid] = Session(id=sid)
        return {"session_id": sid, "history_limit": state.history_limit}

    @app.get("/session/{sid}")
    def get_session(sid: str):
        with state.sessions_lock:
            session = state.sessions.get(sid)
        if session is None:
            raise ApiError(409, "session-unknown", sid)
        with session.lock:
            return {"session_id": sid, "history": list(session.history)}

    @app.post("/session/{sid}/step")
    def session_step(sid: str, body: dict):
        with state.sessions_lock:
            session = state.sessions.get(sid)
        if session is None:
            raise ApiError(409, "session-unknown", sid)
        payload = _generation_payload(state, dict(body, count=1))
        with session.lock:
            if len(session.history) >= state.history_limit:
                raise _bad(f"session history limit ({state.history_limit}) reached")
            entry = {
                "index": len(session.history),
                "conditions": body.get("conditions"),
                "guidance": payload["guidance"],
                "layout": payload["layouts"][0],
                "timestamp": time.time(),
            }
            session.history.append(entry)
            if state.session_log:
                with open(state.session_log, "a") as f:
                    f.write(json.dumps(dict(entry, session=sid), sort_keys=True) + "\n")
        return {
            "layout": payload["layouts"][0],
            "raster": payload["rasters"][0],
            "guidance": payload["guidance"],
            "history_length": len(session.history),
        }

    return app
