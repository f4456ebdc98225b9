"""HTTP gateway over the session engine for scripts and the browser UI.

Sessions live in memory; reads are lock-free snapshots, per-session
mutations are mutually exclusive (a second concurrent writer gets 409).
All payloads are the canonical serializations the CLI emits.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from perfloop import session as session_mod
from perfloop.arch_model import dump_model, load_model
from perfloop.errors import PerfloopError, TargetNotFoundError, ValidationError
from perfloop.fixtures import load_fixture
from perfloop.refactoring import RefactoringAction
from perfloop.serialize import to_canonical_json
from perfloop.session import ApplyScope, SessionConfig, SessionState
from perfloop.simulator import SimRunConfig


@dataclass
class ApiSession:
    id: str
    state: SessionState
    model_doc: str
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionRegistry:
    def __init__(self) -> None:
        self._sessions: dict[str, ApiSession] = {}
        self._guard = threading.Lock()

    def add(self, session: ApiSession) -> None:
        with self._guard:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> ApiSession | None:
        with self._guard:
            return self._sessions.get(session_id)

    def ids(self) -> list[str]:
        with self._guard:
            return sorted(self._sessions)


def _canonical(payload, status_code: int = 200) -> Response:
    return Response(
        content=to_canonical_json(payload),
        media_type="application/json",
        status_code=status_code,
    )


def _error(status_code: int, message: str) -> Response:
    return JSONResponse(status_code=status_code, content={"error": message})


def create_app(registry: SessionRegistry | None = None) -> FastAPI:
    app = FastAPI(title="perfloop gateway")
    sessions = registry or SessionRegistry()

    @app.get("/health")
    def health() -> Response:
        return Response(content="ok", media_type="text/plain")

    @app.get("/sessions")
    def list_sessions() -> Response:
        return _canonical({"sessions": sessions.ids()})

    @app.post("/sessions")
    async def create_session(request: Request) -> Response:
        body = await request.json()
        try:
            config = SessionConfig.from_dict(body.get("config", {}))
            if "fixture" in body:
                fx = load_fixture(body["fixture"])
                model, run_cfg, doc = fx.model, fx.run_config, fx.model_doc
            else:
                doc = body["model_doc"]
                model = load_model(doc)
                run_cfg = SimRunConfig.from_dict(body["run_config"])
            state = session_mod.start_session(model, run_cfg, config)
        except (KeyError, ValidationError, TargetNotFoundError) as exc:
            return _error(422, str(exc))
        except PerfloopError as exc:
            return _error(500, str(exc))
        session = ApiSession(id=uuid.uuid4().hex, state=state, model_doc=doc)
        sessions.add(session)
        return _canonical(
            {"session": session.id, "iteration": state.iteration}, status_code=201
        )

    def _with_session(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return None, _error(404, f"unknown session {session_id}")
        return session, None

    @app.get("/sessions/{session_id}/model")
    def get_model(session_id: str) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        return _canonical(
            {
                "version": session.state.model.version,
                "generation": session.state.system.generation,
                "document": dump_model(session.state.model),
            }
        )

    @app.get("/sessions/{session_id}/indices")
    def get_indices(session_id: str) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        return _canonical(
            {
                "iteration": session.state.iteration,
                "indices": session.state.current_indices,
            }
        )

    @app.get("/sessions/{session_id}/antipatterns")
    def get_antipatterns(session_id: str) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        return _canonical({"occurrences": session.state.history[-1].occurrences})

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        return _canonical({"history": [r.to_dict() for r in session.state.history]})

    @app.get("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str) -> Response:
        from perfloop.refactoring import enumerate_candidates

        session, err = _with_session(session_id)
        if err:
            return err
        occurrences = session_mod.detect(session.state)
        actions = enumerate_candidates(session.state.model, occurrences)
        return _canonical({"candidates": [a.to_dict() for a in actions]})

    @app.post("/sessions/{session_id}/measure")
    def measure(session_id: str) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        if not session.lock.acquire(blocking=False):
            return _error(409, "another mutation is in flight")
        try:
            state = session.state
            indices = session_mod._measure(
                state.model,
                state.system,
                state.run_config,
                session_mod._measurement_seed(state.config, state.iteration),
            )
            state.history[-1].measured = indices.to_dict()
            return _canonical({"iteration": state.iteration, "indices": indices.to_dict()})
        except PerfloopError as exc:
            return _error(500, str(exc))
        finally:
            session.lock.release()

    @app.post("/sessions/{session_id}/preview")
    async def preview(session_id: str, request: Request) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        body = await request.json()
        try:
            action = RefactoringAction.from_dict(body["action"])
            result = session_mod.preview(session.state, action)
        except (KeyError, ValueError, ValidationError, TargetNotFoundError) as exc:
            return _error(422, str(exc))
        except PerfloopError as exc:
            return _error(500, str(exc))
        return _canonical(result)

    @app.post("/sessions/{session_id}/apply")
    async def apply(session_id: str, request: Request) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        body = await request.json()
        try:
            action = RefactoringAction.from_dict(body["action"])
            scope = ApplyScope(body.get("scope", "MODEL_AND_SYSTEM"))
        except (KeyError, ValueError) as exc:
            return _error(422, str(exc))
        if not session.lock.acquire(blocking=False):
            return _error(409, "another mutation is in flight")
        try:
            session.state = session_mod.apply(session.state, action, scope)
        except (ValidationError, TargetNotFoundError) as exc:
            return _error(422, str(exc))
        except PerfloopError as exc:
            return _error(500, str(exc))
        finally:
            session.lock.release()
        return _canonical(
            {
                "iteration": session.state.iteration,
                "model_version": session.state.model.version,
                "system_generation": session.state.system.generation,
            }
        )

    @app.get("/sessions/{session_id}/record")
    def get_record(session_id: str) -> Response:
        session, err = _with_session(session_id)
        if err:
            return err
        return Response(
            content=session_mod.save_record(session.state, session.model_doc),
            media_type="application/x-ndjson",
        )

    return app
