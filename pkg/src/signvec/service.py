"""HTTP query service over a frozen model and a swappable support set.

Readers grab the current support-set reference once per request; writers
(vocabulary additions) serialize on a lock, build the new set off to the
side, persist the entry to a write-ahead log, and publish with an atomic
reference swap. In-flight queries keep answering on the old set.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .keypoints import NormalizationError, PoseseqError, parse_poseseq
from .model import PoseFormer, load_model
from .retrieval import (
    DuplicateLabelError,
    EmbeddingFailure,
    SupportSet,
    add_entry,
    load_support,
    rank_embedding,
)
from .model import embed as embed_sequence

MAX_BODY_BYTES = 5 * 1024 * 1024  # request cap per document


class ServiceStartupError(RuntimeError):
    """Model/support files failed to load or do not belong together."""


class ServiceState:
    """Shared state: immutable model, atomically swappable support set."""

    def __init__(self, model: PoseFormer, support: SupportSet, wal_path: Path | None = None):
        if model.fingerprint() != support.model_fingerprint:
            raise ServiceStartupError(
                "support set was built by a different model (fingerprint mismatch)")
        self.model = model
        self.support = support
        self.wal_path = wal_path
        self.write_lock = threading.Lock()
        self.counters = {"queries": 0, "additions": 0}


def replay_wal(state: ServiceState) -> int:
    """Re-apply logged vocabulary additions; returns the number applied."""
    if state.wal_path is None or not state.wal_path.exists():
        return 0
    applied = 0
    with open(state.wal_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            seq = parse_poseseq(json.dumps(record["poseseq"]).encode("utf-8"))
            state.support = add_entry(state.support, state.model, record["label"], seq)
            applied += 1
    return applied


def load_state(model_path, support_path, wal_path=None) -> ServiceState:
    """Load files, verify they belong together, replay the log."""
    try:
        model = load_model(model_path)
        support = load_support(support_path)
    except (OSError, ValueError) as e:
        raise ServiceStartupError(f"failed to load service state: {e}") from e
    state = ServiceState(model, support, Path(wal_path) if wal_path else None)
    try:
        replay_wal(state)
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        raise ServiceStartupError(f"failed to replay write-ahead log: {e}") from e
    return state


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _parse_document(payload: dict) -> tuple:
    """Extract and parse the poseseq field; raises PoseseqError."""
    doc = payload.get("poseseq")
    if not isinstance(doc, dict):
        raise PoseseqError("body field 'poseseq' must be an object")
    return parse_poseseq(json.dumps(doc).encode("utf-8"))


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="signvec", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def limit_body_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and int(length) > MAX_BODY_BYTES:
            return _error(413, f"request body exceeds {MAX_BODY_BYTES} bytes")
        return await call_next(request)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/support/info")
    def info():
        support = state.support
        return {
            "count": len(support),
            "dim": support.dim,
            "model_fingerprint": support.model_fingerprint.hex(),
            "similarity": support.similarity,
            "temperature": support.temperature,
        }

    @app.get("/v1/labels")
    def labels():
        return {"labels": list(state.support.labels)}

    @app.post("/v1/query")
    async def query(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return _error(400, "body is not valid JSON")
        if not isinstance(payload, dict):
            return _error(400, "body must be a JSON object")
        support = state.support  # snapshot: the whole request answers on it
        k = payload.get("k", 5)
        if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= len(support):
            return _error(400, f"k must be an integer in [1, {len(support)}]")
        temperature = payload.get("temperature")
        if temperature is not None:
            if not isinstance(temperature, (int, float)) or isinstance(temperature, bool) \
                    or not temperature > 0:
                return _error(400, "temperature must be a positive number")
            temperature = float(temperature)
        try:
            seq = _parse_document(payload)
        except PoseseqError as e:
            return _error(400, f"malformed poseseq: {e}")
        try:
            vector = embed_sequence(state.model, seq)
        except NormalizationError as e:
            return _error(422, f"cannot normalize query: {e}")
        result = rank_embedding(support, vector, k, temperature)
        state.counters["queries"] += 1
        return {
            "results": [
                {"label": label, "probability": probability, "rank": rank}
                for label, probability, rank in result.entries
            ]
        }

    @app.post("/v1/support/add")
    async def support_add(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return _error(400, "body is not valid JSON")
        if not isinstance(payload, dict):
            return _error(400, "body must be a JSON object")
        label = payload.get("label")
        if not isinstance(label, str) or not label:
            return _error(400, "label must be a non-empty string")
        try:
            seq = _parse_document(payload)
        except PoseseqError as e:
            return _error(400, f"malformed poseseq: {e}")
        if label in state.support.labels:
            return _error(409, f"label {label!r} already present")
        with state.write_lock:
            try:
                new_support = add_entry(state.support, state.model, label, seq)
            except DuplicateLabelError as e:
                return _error(409, str(e))
            except EmbeddingFailure as e:
                if isinstance(e.cause, NormalizationError):
                    return _error(422, f"cannot normalize entry: {e.cause}")
                return _error(400, str(e))
            if state.wal_path is not None:
                record = {"label": label, "poseseq": payload["poseseq"]}
                with open(state.wal_path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
                    f.flush()
            state.support = new_support  # atomic publish
        state.counters["additions"] += 1
        support = state.support
        return JSONResponse(status_code=201, content={
            "count": len(support),
            "dim": support.dim,
            "model_fingerprint": support.model_fingerprint.hex(),
            "similarity": support.similarity,
            "temperature": support.temperature,
        })

    return app


def serve(model_path, support_path, host: str = "127.0.0.1", port: int = 8000,
          wal_path=None) -> None:
    """Load everything (refusing to start on failure) and run the server."""
    import uvicorn

    state = load_state(model_path, support_path, wal_path)
    app = create_app(state)
    uvicorn.run(app, host=host, port=port, log_level="warning")
