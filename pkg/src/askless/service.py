"""HTTP session API for live, shortened surveys.

A session holds k randomly selected questions for one respondent. Each
submitted answer is merged into the session's evidence and the segment
posterior is recomputed, so the caller sees the assignment sharpen answer
by answer. The loaded network is immutable and shared; each session
serializes its own mutations behind a lock.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bn import BayesianNetwork
from .errors import (
    AlreadyAnswered,
    AsklessError,
    ConflictingEvidence,
    InvalidLevel,
    KTooLarge,
    QuestionNotInSet,
    UnknownSession,
)
from .inference import DEFAULT_SAMPLES, EXACT, Posterior, incremental_update, query
from .reduction import random_subset


@dataclass
class Session:
    id: str
    question_set: list[str]
    answered: dict[str, str]
    posterior_trace: list[Posterior]
    created_at: float
    k: int
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def remaining(self) -> list[str]:
        return [q for q in self.question_set if q not in self.answered]


class SessionManager:
    """In-memory session store with TTL eviction, safe under concurrency."""

    def __init__(self, bn: BayesianNetwork, default_k: int = 10,
                 engine: str = EXACT, n_samples: int = DEFAULT_SAMPLES,
                 ttl_hours: float = 24.0, seed: int | None = None):
        self.bn = bn
        self.default_k = default_k
        self.engine = engine
        self.n_samples = n_samples
        self.ttl_seconds = ttl_hours * 3600.0
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()
        self._rng = np.random.default_rng(seed)
        self._rng_lock = threading.Lock()
        self.pool = list(bn.schema.asked)
        self.label_var = bn.schema.label_var

    # -- lifecycle -----------------------------------------------------

    def create_session(self, k: int | None = None, seed: int | None = None) -> Session:
        k = self.default_k if k is None else k
        if not 1 <= k <= len(self.pool):
            raise KTooLarge(f"k={k} outside [1, {len(self.pool)}]")
        if seed is not None:
            questions = random_subset(self.pool, k, np.random.default_rng(seed))
        else:
            with self._rng_lock:
                questions = random_subset(self.pool, k, self._rng)
        prior = query(self.bn, self.label_var, {}, engine=self.engine,
                      n_samples=self.n_samples, seed=self._query_seed(seed, 0))
        session = Session(
            id=uuid.uuid4().hex,
            question_set=questions,
            answered={},
            posterior_trace=[prior],
            created_at=time.time(),
            k=k,
        )
        with self._store_lock:
            self._evict_expired()
            self._sessions[session.id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        with self._store_lock:
            self._evict_expired()
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def _evict_expired(self) -> None:
        cutoff = time.time() - self.ttl_seconds
        expired = [sid for sid, s in self._sessions.items() if s.created_at < cutoff]
        for sid in expired:
            del self._sessions[sid]

    def _query_seed(self, session_seed: int | None, n_answered: int) -> int:
        # only matters for the sampling engine; deterministic per step when
        # the caller pinned a seed
        base = 0 if session_seed is None else session_seed
        return base * 1000 + n_answered

    # -- answering -----------------------------------------------------

    def submit_answer(self, session_id: str, question: str, value: str) -> Posterior:
        session = self.get_session(session_id)
        with session.lock:
            if question not in session.question_set:
                raise QuestionNotInSet(
                    f"{question!r} is not one of this session's questions"
                )
            if question in session.answered:
                raise AlreadyAnswered(f"{question!r} was already answered")
            spec = self.bn.schema[question]
            if value not in spec.levels:
                raise InvalidLevel(
                    f"{value!r} is not a level of {question} "
                    f"(levels: {', '.join(spec.levels)})"
                )
            posterior = incremental_update(
                self.bn, self.label_var, dict(session.answered), {question: value},
                engine=self.engine, n_samples=self.n_samples,
                seed=self._query_seed(None, len(session.answered) + 1),
            )
            session.answered[question] = value
            session.posterior_trace.append(posterior)
            return posterior


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

class CreateSessionBody(BaseModel):
    k: int | None = None
    seed: int | None = None


class AnswerBody(BaseModel):
    question: str
    value: str


_STATUS = {
    UnknownSession: 404,
    AlreadyAnswered: 409,
    ConflictingEvidence: 409,
    QuestionNotInSet: 400,
    InvalidLevel: 400,
    KTooLarge: 400,
}


def _question_view(bn: BayesianNetwork, abbr: str) -> dict:
    spec = bn.schema[abbr]
    return {"abbr": spec.abbr, "text": spec.text, "levels": list(spec.levels)}


def _session_view(manager: SessionManager, session: Session) -> dict:
    current = session.posterior_trace[-1]
    return {
        "id": session.id,
        "k": session.k,
        "questions": [
            {**_question_view(manager.bn, q), "answered": q in session.answered}
            for q in session.question_set
        ],
        "answered": dict(session.answered),
        "remaining": [
            _question_view(manager.bn, q) for q in session.remaining
        ],
        "posteriorTrace": [p.to_doc()["probs"] for p in session.posterior_trace],
        "posterior": current.probs,
        "segment": current.argmax(),
        "answeredCount": len(session.answered),
        "createdAt": session.created_at,
    }


def create_app(bn: BayesianNetwork, default_k: int = 10, engine: str = EXACT,
               n_samples: int = DEFAULT_SAMPLES, ttl_hours: float = 24.0,
               seed: int | None = None) -> FastAPI:
    manager = SessionManager(
        bn, default_k=default_k, engine=engine, n_samples=n_samples,
        ttl_hours=ttl_hours, seed=seed,
    )
    app = FastAPI(title="askless survey sessions", version="0.1.0")
    app.state.manager = manager

    @app.exception_handler(AsklessError)
    async def _askless_error(request: Request, exc: AsklessError):
        status = _STATUS.get(type(exc), 400)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "InvalidBody", "detail": exc.errors()},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "nodes": len(manager.bn.nodes)}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = manager.create_session(k=body.k, seed=body.seed)
        return {
            "id": session.id,
            "questions": [_question_view(bn, q) for q in session.question_set],
            "posterior": session.posterior_trace[0].probs,
        }

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: AnswerBody):
        posterior = manager.submit_answer(session_id, body.question, body.value)
        session = manager.get_session(session_id)
        return {
            "posterior": posterior.probs,
            "segment": posterior.argmax(),
            "answeredCount": len(session.answered),
            "remaining": [_question_view(bn, q) for q in session.remaining],
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_view(manager, manager.get_session(session_id))

    return app
