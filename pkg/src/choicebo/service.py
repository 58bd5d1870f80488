"""HTTP session service for live human-in-the-loop optimisation.

One JSON document per session in a data directory, written atomically via
temp-file rename, so a killed process restores every session from disk.
Choice submissions return immediately; the refit runs on a single
background worker per session and state polls reflect its progress.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import replace
from pathlib import Path
from typing import Mapping

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .bo import (
    BoSession,
    apply_choice,
    create_session,
    propose,
    refit,
    session_from_payload,
    session_to_payload,
)
from .domain import ConfigError
from .harness import _build_acq_config, _build_fit_config
from .model_selection import select_latent_dimension

__all__ = ["SessionStore", "create_app", "serve"]

_SCHEMA = "choicebo-session"
_SCHEMA_VERSION = 1
_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")

_DEFAULT_BIND = "127.0.0.1:8000"


class ApiError(Exception):
    """Plain status-code error carried to the JSON error handler."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


# --- persistence


class SessionStore:
    """One JSON file per session id underneath a data directory."""

    def __init__(self, data_dir: "str | Path"):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.json"

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def save(self, session_id: str, document: Mapping) -> None:
        target = self._path(session_id)
        fd, tmp_name = tempfile.mkstemp(dir=self.data_dir, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(document, fh)
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    def load(self, session_id: str) -> "dict | None":
        path = self._path(session_id)
        if not path.exists():
            return None
        document = json.loads(path.read_text(encoding="utf-8"))
        if document.get("format") != _SCHEMA:
            raise ConfigError(f"{path} is not a session document")
        return document


# --- session registry


class _Entry:
    def __init__(self, session: BoSession, auto_ne: bool, ne_max: int):
        self.session = session
        self.auto_ne = auto_ne
        self.ne_max = ne_max
        self.lock = threading.Lock()
        self.error: "str | None" = None


class SessionManager:
    """In-memory registry over the store; one writer per session."""

    def __init__(self, store: SessionStore):
        self.store = store
        self._entries: dict[str, _Entry] = {}
        self._guard = threading.Lock()

    def _document(self, entry: _Entry) -> dict:
        return {
            "format": _SCHEMA,
            "schema_version": _SCHEMA_VERSION,
            "auto_ne": entry.auto_ne,
            "ne_max": entry.ne_max,
            "session": session_to_payload(entry.session),
        }

    def _commit(self, entry: _Entry, session: BoSession) -> None:
        entry.session = session
        self.store.save(session.id, self._document(entry))

    def exists(self, session_id: str) -> bool:
        with self._guard:
            if session_id in self._entries:
                return True
        return self.store.exists(session_id)

    def get(self, session_id: str) -> "_Entry | None":
        with self._guard:
            entry = self._entries.get(session_id)
            if entry is not None:
                return entry
        document = self.store.load(session_id)
        if document is None:
            return None
        entry = _Entry(
            session_from_payload(document["session"]),
            bool(document.get("auto_ne", False)),
            int(document.get("ne_max", 4)),
        )
        with self._guard:
            entry = self._entries.setdefault(session_id, entry)
        # a process killed mid-fit left work behind; pick it up again
        if entry.session.state in ("fitting", "ready"):
            self._spawn(session_id)
        return entry

    def add(self, entry: _Entry) -> None:
        with self._guard:
            self._entries[entry.session.id] = entry
        self.store.save(entry.session.id, self._document(entry))

    def _spawn(self, session_id: str) -> None:
        thread = threading.Thread(target=self._advance, args=(session_id,), daemon=True)
        thread.start()

    def submit(self, entry: _Entry, chosen: list, query_seq: "int | None") -> BoSession:
        """Validate and apply one choice; schedules the refit if one is due."""
        # fail fast instead of queueing behind a running fit
        if entry.session.state != "awaiting-choice":
            raise ApiError(409, "session has no pending query")
        if not entry.lock.acquire(timeout=1.0):
            raise ApiError(409, "session is busy fitting")
        try:
            session = entry.session
            if session.state != "awaiting-choice":
                raise ApiError(409, "session has no pending query")
            if query_seq is not None and query_seq != session.query_seq:
                raise ApiError(
                    422, f"stale query: submitted #{query_seq}, pending #{session.query_seq}"
                )
            try:
                session = apply_choice(session, chosen)
            except ValueError as exc:
                raise ApiError(422, str(exc)) from None
            entry.error = None
            self._commit(entry, session)
        finally:
            entry.lock.release()
        if session.state == "fitting":
            self._spawn(session.id)
        return session

    def _advance(self, session_id: str) -> None:
        entry = self.get(session_id)
        if entry is None:
            return
        with entry.lock:
            try:
                if entry.session.state == "fitting":
                    if entry.auto_ne and entry.session.posterior is None:
                        self._resolve_dimension(entry)
                    self._commit(entry, refit(entry.session))
                if entry.session.state == "ready":
                    self._commit(entry, propose(entry.session))
            except Exception as exc:  # noqa: BLE001 - surfaced via /state
                entry.error = f"{type(exc).__name__}: {exc}"

    def _resolve_dimension(self, entry: _Entry) -> None:
        session = entry.session
        result = select_latent_dimension(
            session.observations,
            session.model_points(),
            ne_max=entry.ne_max,
            config=session.fit_config,
        )
        entry.auto_ne = False
        self._commit(entry, replace(session, n_e=result.chosen))


# --- payload shaping


def _query_payload(session: BoSession) -> dict:
    ids = list(session.pending_query)
    options = []
    for option_id in ids:
        coords = [float(c) for c in session.options[option_id]]
        options.append(
            {
                "id": option_id,
                "coords": coords,
                "display": {
                    "label": f"Option {option_id}",
                    "coords": [round(c, 4) for c in coords],
                },
            }
        )
    return {
        "query_seq": session.query_seq,
        "ids": ids,
        "options": options,
        "requested_size": session.acq_config.query_size,
    }


def _state_payload(entry: _Entry) -> dict:
    session = entry.session
    latent_means = None
    if session.posterior is not None:
        latent_means = session.posterior.values.mean(axis=0).tolist()
    return {
        "id": session.id,
        "state": session.state,
        "problem": session.problem,
        "bounds": session.bounds.tolist(),
        "n_e": session.n_e,
        "auto_ne": entry.auto_ne,
        "budget": session.budget,
        "iteration": session.iteration,
        "query_seq": session.query_seq,
        "pending_query": list(session.pending_query) if session.pending_query else None,
        "init_queries_left": len(session.init_remaining),
        "options": session.options.tolist(),
        "history": [
            {"set": list(o.set_indices), "chosen": list(o.chosen_indices)}
            for o in session.observations
        ],
        "latent_means": latent_means,
        "metrics": [
            {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in row.items()}
            for row in session.metrics
        ],
        "flags": list(session.flags),
        "error": entry.error,
        "created_at": session.created_at,
        "updated_at": session.updated_at,
    }


def _parse_create_body(body: Mapping) -> dict:
    if not isinstance(body, Mapping):
        raise ApiError(400, "body must be a JSON object")
    known = {
        "id", "bounds", "problem", "n_e", "ne_max", "budget", "seed",
        "n_init", "n_init_queries", "fit", "acq",
    }
    unknown = sorted(set(body) - known)
    if unknown:
        raise ApiError(400, f"unknown fields: {', '.join(unknown)}")
    if "seed" not in body:
        raise ApiError(400, "seed is required")
    if body.get("bounds") is None and body.get("problem") is None:
        raise ApiError(400, "either bounds or a problem name is required")
    bounds = body.get("bounds")
    if bounds is not None:
        if not isinstance(bounds, list) or len(bounds) == 0:
            raise ApiError(400, "bounds must be a non-empty list of [low, high] pairs")
        for pair in bounds:
            if not isinstance(pair, list) or len(pair) != 2:
                raise ApiError(400, "bounds must be a non-empty list of [low, high] pairs")
    session_id = body.get("id")
    if session_id is not None and not (
        isinstance(session_id, str) and _ID_PATTERN.match(session_id)
    ):
        raise ApiError(400, "id must match [A-Za-z0-9][A-Za-z0-9._-]{0,63}")
    n_e = body.get("n_e", 2)
    auto_ne = n_e == "auto"
    if not auto_ne and not (isinstance(n_e, int) and n_e >= 1):
        raise ApiError(400, "n_e must be a positive integer or 'auto'")
    try:
        parsed = {
            "id": session_id,
            "bounds": bounds,
            "problem": body.get("problem"),
            "n_e": 2 if auto_ne else int(n_e),
            "auto_ne": auto_ne,
            "ne_max": int(body.get("ne_max", 4)),
            "budget": int(body.get("budget", 40)),
            "seed": int(body["seed"]),
            "n_init": int(body.get("n_init", 20)),
            "n_init_queries": int(body.get("n_init_queries", 7)),
            "fit": body.get("fit"),
            "acq": body.get("acq"),
        }
    except (TypeError, ValueError):
        raise ApiError(400, "numeric fields must be integers") from None
    if parsed["ne_max"] < 1:
        raise ApiError(400, "ne_max must be >= 1")
    return parsed


# --- application


def create_app(data_dir: "str | Path | None" = None) -> FastAPI:
    """Build the /v1 API over a session data directory (env fallback)."""
    if data_dir is None:
        data_dir = os.environ.get("CHOICEBO_DATA_DIR", "./choicebo-sessions")
    manager = SessionManager(SessionStore(data_dir))
    app = FastAPI(title="choicebo", version="1")
    app.state.manager = manager

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse({"detail": exc.message}, status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _malformed(request: Request, exc: RequestValidationError):
        status = 422 if request.url.path.endswith("/choice") else 400
        return JSONResponse({"detail": "malformed body"}, status_code=status)

    def _entry_or_404(session_id: str) -> _Entry:
        entry = manager.get(session_id)
        if entry is None:
            raise ApiError(404, f"unknown session {session_id!r}")
        return entry

    @app.post("/v1/sessions", status_code=201)
    def create(body: dict = Body(...)):
        parsed = _parse_create_body(body)
        if parsed["id"] is not None and manager.exists(parsed["id"]):
            raise ApiError(409, f"session {parsed['id']!r} already exists")
        try:
            session = create_session(
                bounds=np.asarray(parsed["bounds"], dtype=float)
                if parsed["bounds"] is not None
                else None,
                problem=parsed["problem"],
                n_e=parsed["n_e"],
                budget=parsed["budget"],
                seed=parsed["seed"],
                session_id=parsed["id"],
                n_init=parsed["n_init"],
                n_init_queries=parsed["n_init_queries"],
                fit_config=_build_fit_config(parsed["fit"], parsed["seed"]),
                acq_config=_build_acq_config(parsed["acq"]),
            )
        except (ConfigError, ValueError) as exc:
            raise ApiError(400, str(exc)) from None
        if manager.exists(session.id):
            raise ApiError(409, f"session {session.id!r} already exists")
        entry = _Entry(session, parsed["auto_ne"], parsed["ne_max"])
        manager.add(entry)
        return {"id": session.id, "state": session.state, "query": _query_payload(session)}

    @app.get("/v1/sessions/{session_id}/query")
    def query(session_id: str):
        entry = _entry_or_404(session_id)
        session = entry.session
        if session.state != "awaiting-choice":
            raise ApiError(409, f"no pending query in state {session.state!r}")
        return _query_payload(session)

    @app.post("/v1/sessions/{session_id}/choice", status_code=202)
    def choice(session_id: str, body: dict = Body(...)):
        entry = _entry_or_404(session_id)
        chosen = body.get("chosen")
        if not isinstance(chosen, list) or not chosen:
            raise ApiError(422, "chosen must be a non-empty list of option ids")
        if not all(isinstance(i, int) for i in chosen):
            raise ApiError(422, "chosen must contain integer option ids")
        query_seq = body.get("query_seq")
        if query_seq is not None and not isinstance(query_seq, int):
            raise ApiError(422, "query_seq must be an integer")
        session = manager.submit(entry, chosen, query_seq)
        return {
            "id": session.id,
            "state": session.state,
            "iteration": session.iteration,
            "query_seq": session.query_seq,
        }

    @app.get("/v1/sessions/{session_id}/state")
    def state(session_id: str):
        return _state_payload(_entry_or_404(session_id))

    @app.get("/v1/sessions/{session_id}/pareto")
    def pareto(session_id: str):
        entry = _entry_or_404(session_id)
        session = entry.session
        if session.pareto is None:
            raise ApiError(409, "no fit has completed yet")
        return session.pareto.to_payload()

    return app


def serve(bind: "str | None" = None, data_dir: "str | Path | None" = None) -> None:
    """Run the API under uvicorn on HOST:PORT (env CHOICEBO_BIND_ADDR)."""
    import uvicorn

    bind = bind or os.environ.get("CHOICEBO_BIND_ADDR", _DEFAULT_BIND)
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"bind address {bind!r} is not HOST:PORT")
    uvicorn.run(create_app(data_dir), host=host or "127.0.0.1", port=int(port))
