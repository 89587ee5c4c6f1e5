"""HTTP service for interactive diagnosis over network bundles.

create_app() returns a self-contained FastAPI application. Networks are
registered by posting bundle documents and are keyed by the hash of
their canonical form, so equivalent documents share an id. Sessions
hold an immutable (evidence, differential) snapshot that is swapped
atomically under a lock; readers always see a complete state, and
replaying the same observations against a fresh process reproduces
every response byte for byte.

Errors use one envelope: {"code", "message", "path"} with the request
path, and validation detail inside the message.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .bundle import CompiledModel, compile_bundle, load_bundle, network_id
from .core import ImpossibleEvidenceError
from .decision import CostModel, meu_diagnosis, recommend_features
from .inference import Differential, Evidence, posterior, weight_of_evidence


class ServiceError(Exception):
    """Carries an HTTP status plus the envelope fields."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class _Session:
    session_id: str
    compiled: CompiledModel
    diagnose_under_uncertainty: bool
    threshold: float
    state: tuple[Evidence, Differential]
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def _verdict_payload(verdict) -> dict[str, Any]:
    if verdict.is_consistent:
        return {"status": "consistent"}
    return {
        "status": "inconsistent",
        "witness": verdict.witness.describe(),
        "repairs": [
            {"edge": list(edge), "arc": list(arc)} for edge, arc in verdict.repairs
        ],
    }


def _differential_payload(diff: Differential) -> dict[str, Any]:
    return {
        "posterior": [{"hypothesis": label, "p": p} for label, p in diff.ranked]
    }


def _weight_value(w: float):
    if math.isinf(w):
        return "inf" if w > 0 else "-inf"
    return w


async def _json_body(request: Request) -> dict[str, Any]:
    raw = await request.body()
    if not raw:
        return {}
    try:
        body = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError):
        raise ServiceError(400, "invalid_request", "request body is not valid JSON")
    if not isinstance(body, dict):
        raise ServiceError(400, "invalid_request", "request body must be a JSON object")
    return body


def create_app() -> FastAPI:
    app = FastAPI(title="simnet", docs_url=None, redoc_url=None)

    networks: dict[str, CompiledModel] = {}
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()
    session_serial = 0

    @app.exception_handler(ServiceError)
    async def _envelope(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={
                "code": exc.code,
                "message": exc.message,
                "path": request.url.path,
            },
        )

    @app.exception_handler(StarletteHTTPException)
    async def _fallback(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "invalid_request"
        return JSONResponse(
            status_code=exc.status_code,
            content={
                "code": code,
                "message": str(exc.detail),
                "path": request.url.path,
            },
        )

    def _network(nid: str) -> CompiledModel:
        compiled = networks.get(nid)
        if compiled is None:
            raise ServiceError(404, "not_found", f"no network {nid!r}")
        return compiled

    def _consistent_network(nid: str) -> CompiledModel:
        compiled = _network(nid)
        if not compiled.verdict.is_consistent:
            raise ServiceError(
                409,
                "inconsistent_model",
                f"network {nid!r} is inconsistent ({compiled.verdict.witness.describe()})",
            )
        return compiled

    def _session(sid: str) -> _Session:
        sess = sessions.get(sid)
        if sess is None:
            raise ServiceError(404, "not_found", f"no session {sid!r}")
        return sess

    def _utilities(sess: _Session):
        u = sess.compiled.bundle.utilities
        if u is None:
            raise ServiceError(
                409,
                "missing_utilities",
                "the bundle declares no utilities; this operation is undefined",
            )
        return u

    @app.post("/networks")
    async def register_network(request: Request):
        raw = await request.body()
        try:
            compiled = compile_bundle(load_bundle(raw))
        except ValueError as exc:
            raise ServiceError(400, "schema_error", str(exc))
        nid = network_id(compiled.bundle)
        with registry_lock:
            networks.setdefault(nid, compiled)
        return {
            "network_id": nid,
            "verdict": _verdict_payload(compiled.verdict),
            "warnings": list(compiled.warnings),
        }

    @app.get("/networks/{nid}/graph")
    async def network_graph(nid: str):
        compiled = _consistent_network(nid)
        bundle = compiled.bundle
        km = compiled.model.map
        return {
            "network_id": nid,
            "name": bundle.name,
            "distinguished": bundle.distinguished,
            "hypotheses": list(bundle.hypotheses),
            "variables": [
                {"name": v.name, "instances": list(v.instances)}
                for v in bundle.variables
            ],
            "arcs": sorted([list(arc) for arc in km.arcs]),
            "similarity_edges": [list(e) for e in bundle.network.graph.edges],
            "clusters": [list(c) for c in compiled.clusters.clusters],
        }

    @app.post("/networks/{nid}/sessions")
    async def open_session(nid: str, request: Request):
        nonlocal session_serial
        compiled = _consistent_network(nid)
        body = await _json_body(request)
        unknown = set(body) - {"diagnose_under_uncertainty", "threshold"}
        if unknown:
            raise ServiceError(
                400, "invalid_request", f"unknown policy keys: {sorted(unknown)}"
            )
        under_uncertainty = body.get("diagnose_under_uncertainty", False)
        if not isinstance(under_uncertainty, bool):
            raise ServiceError(
                400, "invalid_request", "diagnose_under_uncertainty must be a boolean"
            )
        threshold = body.get("threshold", 1.0)
        if (
            isinstance(threshold, bool)
            or not isinstance(threshold, (int, float))
            or not 0.0 < threshold <= 1.0
        ):
            raise ServiceError(
                400, "invalid_request", "threshold must be a number in (0, 1]"
            )
        initial = Evidence(())
        diff = posterior(compiled.model, initial)
        with registry_lock:
            session_serial += 1
            sid = f"s-{session_serial:04d}"
            sessions[sid] = _Session(
                session_id=sid,
                compiled=compiled,
                diagnose_under_uncertainty=under_uncertainty,
                threshold=float(threshold),
                state=(initial, diff),
            )
        return {"session_id": sid, "network_id": nid}

    @app.post("/sessions/{sid}/observations")
    async def observe(sid: str, request: Request):
        sess = _session(sid)
        body = await _json_body(request)
        if set(body) != {"feature", "instance"}:
            raise ServiceError(
                400,
                "invalid_request",
                'the body must be {"feature": ..., "instance": ...}',
            )
        feature, instance = body["feature"], body["instance"]
        if not isinstance(feature, str) or not isinstance(instance, str):
            raise ServiceError(400, "invalid_request", "feature and instance must be strings")
        km = sess.compiled.model.map
        if feature == km.distinguished or not km.has_variable(feature):
            raise ServiceError(400, "unknown_feature", f"no observable feature {feature!r}")
        var = km.variable(feature)
        if instance not in var.instances:
            raise ServiceError(
                400,
                "unknown_instance",
                f"{feature!r} has no instance {instance!r}; expected one of {list(var.instances)}",
            )
        with sess.lock:
            evidence, _ = sess.state
            if feature in evidence.features:
                raise ServiceError(
                    409,
                    "already_observed",
                    f"{feature!r} is already observed; retract it first",
                )
            extended = evidence.with_observation(feature, instance)
            try:
                diff = posterior(sess.compiled.model, extended)
            except ImpossibleEvidenceError as exc:
                raise ServiceError(409, "impossible_evidence", str(exc))
            sess.state = (extended, diff)
        return {"differential": _differential_payload(diff)}

    @app.delete("/sessions/{sid}/observations/{feature}")
    async def retract(sid: str, feature: str):
        sess = _session(sid)
        with sess.lock:
            evidence, _ = sess.state
            if feature not in evidence.features:
                raise ServiceError(
                    409, "not_observed", f"{feature!r} is not currently observed"
                )
            remaining = evidence.without(feature)
            diff = posterior(sess.compiled.model, remaining)
            sess.state = (remaining, diff)
        return {"differential": _differential_payload(diff)}

    @app.get("/sessions/{sid}/differential")
    async def differential(sid: str):
        sess = _session(sid)
        _, diff = sess.state
        return _differential_payload(diff)

    @app.get("/sessions/{sid}/recommendations")
    async def recommendations(sid: str, request: Request):
        sess = _session(sid)
        u = _utilities(sess)
        limit: Optional[int] = None
        raw_limit = request.query_params.get("limit")
        if raw_limit is not None:
            try:
                limit = int(raw_limit)
            except ValueError:
                limit = -1
            if limit < 1:
                raise ServiceError(
                    400, "invalid_request", "limit must be a positive integer"
                )
        bundle = sess.compiled.bundle
        costs = bundle.costs if bundle.costs is not None else CostModel()
        evidence, _ = sess.state
        recs = recommend_features(
            sess.compiled.model,
            evidence,
            u,
            costs,
            limit=limit,
            network=bundle.network,
        )
        return [
            {"feature": r.feature, "voc": r.voc, "cost": r.cost, "net": r.net}
            for r in recs
        ]

    @app.get("/sessions/{sid}/justification")
    async def justification(sid: str, request: Request):
        sess = _session(sid)
        feature = request.query_params.get("feature")
        if feature is None:
            raise ServiceError(400, "invalid_request", "the feature query parameter is required")
        km = sess.compiled.model.map
        if feature == km.distinguished or not km.has_variable(feature):
            raise ServiceError(400, "unknown_feature", f"no observable feature {feature!r}")
        evidence, diff = sess.state
        top_two = tuple(label for label, _ in diff.ranked[:2])
        weights, _notes = weight_of_evidence(
            sess.compiled.model, feature, top_two, evidence.without(feature)
        )
        labels = km.variable(feature).instances
        return {
            "top_two": list(top_two),
            "instances": [
                {"label": label, "weight": _weight_value(w)}
                for label, w in zip(labels, weights)
            ],
        }

    @app.post("/sessions/{sid}/diagnose")
    async def diagnose(sid: str, request: Request):
        sess = _session(sid)
        u = _utilities(sess)
        body = await _json_body(request)
        if body:
            raise ServiceError(400, "invalid_request", "diagnose takes no body")
        _, diff = sess.state
        confident = max(p for _, p in diff.entries) >= sess.threshold
        if not (sess.diagnose_under_uncertainty or confident):
            return {"diagnosis": "withheld", "expected_utility": None}
        dx, eu = meu_diagnosis(diff, u)
        return {"diagnosis": dx, "expected_utility": eu}

    return app
