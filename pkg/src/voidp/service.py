"""HTTP session service for step-by-step plan execution.

Each session wraps one plan walker; the browser console (or any client)
creates a session from a plan file, answers queries one at a time, and
receives the full next state in every response.  All probabilities shown
to clients are computed server-side.
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import SchemaError, VoidpError
from .model import Evidence, Mode, posterior_marginal
from .plan import PlanExecution, PlanTables, realized_reward
from .serialize import from_document, load


class CreateSession(BaseModel):
    plan: dict | None = None
    plan_path: str | None = None


class Answer(BaseModel):
    index: int
    state: int


class _Session:
    def __init__(self, tables: PlanTables):
        self.id = uuid.uuid4().hex
        self.tables = tables
        self.walker = PlanExecution(tables)
        self.lock = threading.Lock()

    def state(self) -> dict:
        walker = self.walker
        tables = self.tables
        model = tables.model
        evidence = Evidence(dict(walker.evidence), Mode.SMOOTHING)
        posteriors = [
            posterior_marginal(model, evidence, j).probs.tolist()
            for j in range(1, model.n + 1)
        ]
        return {
            "id": self.id,
            "done": walker.done,
            "next_index": walker.next_index,
            "remaining_budget": walker.remaining_budget,
            "spent_budget": walker.spent,
            "evidence": {str(j): x for j, x in walker.evidence.items()},
            "queried": list(walker.order),
            "posteriors": posteriors,
            "realized_reward": realized_reward(tables, walker.evidence),
            "expected_value": tables.root_value,
            "n": model.n,
            "domains": list(model.domains),
            "mode": tables.mode.value,
            "budget": tables.budget,
        }


def _error(status: int, code: str, message: str, field=None):
    body = {"error": {"code": code, "message": message}}
    if field is not None:
        body["error"]["field"] = field
    return JSONResponse(status_code=status, content=body)


def create_app() -> FastAPI:
    app = FastAPI(title="voidp plan sessions")
    sessions: dict = {}
    registry_lock = threading.Lock()

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        if (body.plan is None) == (body.plan_path is None):
            return _error(400, "bad_request",
                          "provide exactly one of 'plan' or 'plan_path'", "plan")
        try:
            if body.plan is not None:
                tables = from_document(body.plan)
            else:
                tables = load(body.plan_path, PlanTables)
        except (SchemaError, OSError) as err:
            return _error(400, "bad_plan", str(err), "plan")
        if not isinstance(tables, PlanTables):
            return _error(400, "bad_plan", "document is not a plan", "plan")
        session = _Session(tables)
        with registry_lock:
            sessions[session.id] = session
        return session.state()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, "session_not_found", f"no session {session_id}")
        with session.lock:
            return session.state()

    @app.post("/sessions/{session_id}/answer")
    def answer(session_id: str, body: Answer):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, "session_not_found", f"no session {session_id}")
        with session.lock:
            walker = session.walker
            if walker.done:
                return _error(400, "session_done", "the plan has already finished")
            expected = walker.next_index
            if body.index != expected:
                return _error(400, "wrong_index",
                              f"expected an answer for variable {expected}", "index")
            d = session.tables.model.domain(body.index)
            if not 0 <= body.state < d:
                return _error(400, "state_out_of_range",
                              f"state must be in 0..{d - 1}", "state")
            try:
                walker.answer(body.index, body.state)
            except (VoidpError, ValueError) as err:
                return _error(400, "answer_rejected", str(err), "state")
            return session.state()

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        with registry_lock:
            if session_id not in sessions:
                return _error(404, "session_not_found", f"no session {session_id}")
            del sessions[session_id]

    return app


def serve(host="127.0.0.1", port=8321):
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port, log_level="warning")
