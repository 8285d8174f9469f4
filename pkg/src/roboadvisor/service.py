"""HTTP API exposing the questionnaire/elicitation/portfolio pipeline.

JSON over HTTP, versioned under ``/v1``; errors come back as
``{"code", "message", "details"}``. Sessions move forward through
questioning -> answered -> elicited -> recommended and persist in the
session store, so every elicit/portfolio call replays identically.
"""

from __future__ import annotations

import hashlib
import threading
import uuid
from dataclasses import dataclass, replace

from fastapi import APIRouter, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import dataio
from .dataio import SessionRecord, SessionStore
from .elicitation import (
    elicit_neutral,
    elicit_optimistic,
    elicit_pessimistic,
)
from .errors import (
    AdvisorError,
    ConflictError,
    DomainError,
    InconsistentAnswersError,
    NotFoundError,
    SolverFailureError,
    ValidationError,
)
from .lotteries import build_breakpoints, risk_aversion
from .portfolio import PortfolioSpec, optimize_portfolio
from .questionnaire import fit_lfm, select_pairs_random, select_pairs_spq
from .simulation import default_scenarios

ESTIMATORS = ("pessimistic", "optimistic", "neutral")


@dataclass(frozen=True)
class ApiConfig:
    bind: str = "127.0.0.1:8000"
    data_dir: str = "./advisor-data"
    item_set_path: str | None = None  # None -> bundled items10
    returns_path: str | None = None
    ratings_path: str | None = None
    default_estimator: str = "neutral"
    default_k: int = 8
    cors_origins: tuple[str, ...] = ()
    window: int = 60
    mc_samples: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.default_k < 1:
            raise ValidationError("default K must be at least 1")
        if self.default_estimator not in ESTIMATORS:
            raise ValidationError(f"unknown estimator {self.default_estimator!r}")


class CreateSessionRequest(BaseModel):
    item_set: str | None = None
    k: int | None = None
    method: str = "spq"


class AnswerEntry(BaseModel):
    pair_index: int
    choice: str


class AnswersRequest(BaseModel):
    answers: list[AnswerEntry]


class ElicitRequest(BaseModel):
    estimators: list[str] | None = None


class PortfolioRequest(BaseModel):
    estimator: str | None = None
    budget: float
    caps: float | list[float] | None = None


_STATUS_BY_ERROR = (
    (NotFoundError, 404, "not_found"),
    (ConflictError, 409, "conflict"),
    (InconsistentAnswersError, 422, "inconsistent_answers"),
    (DomainError, 422, "domain_error"),
    (ValidationError, 422, "validation_error"),
    (SolverFailureError, 500, "solver_failure"),
)


def _error_response(exc: AdvisorError) -> JSONResponse:
    for etype, status, code in _STATUS_BY_ERROR:
        if isinstance(exc, etype):
            details = {}
            if isinstance(exc, InconsistentAnswersError) and exc.conflicting_answers:
                details["conflicting_answers"] = list(exc.conflicting_answers)
            return JSONResponse(
                status_code=status,
                content={"code": code, "message": str(exc), "details": details},
            )
    return JSONResponse(
        status_code=500,
        content={"code": "internal", "message": str(exc), "details": {}},
    )


class _AppState:
    """Loaded configuration plus per-process caches."""

    def __init__(self, config: ApiConfig):
        self.config = config
        self.items = (
            dataio.load_item_set(config.item_set_path)
            if config.item_set_path
            else dataio.bundled_item_set("items10")
        )
        self.ratings = (
            dataio.load_ratings(config.ratings_path, self.items)
            if config.ratings_path
            else None
        )
        self.panel = dataio.load_returns(config.returns_path) if config.returns_path else None
        self.store = SessionStore(config.data_dir)
        self.upper = self.items.max_outcome()
        self.scenarios = default_scenarios(
            self.items, seed=config.seed, mc_samples=config.mc_samples
        )
        self._spq_cache: dict[str, dict] = {}
        self._seed_lock = threading.Lock()
        self._seed_counter = 0

    def next_seed(self) -> int:
        with self._seed_lock:
            self._seed_counter += 1
            return self.config.seed * 1_000_003 + self._seed_counter

    def spq_questionnaire(self, k: int) -> dict:
        """SPQ questionnaires are user-independent; cache by content."""
        if self.ratings is None:
            raise ConflictError("SPQ questionnaires need historical ratings configured")
        digest = hashlib.sha256()
        digest.update(repr(sorted(zip(
            self.ratings.user_index.tolist(),
            self.ratings.item_index.tolist(),
            self.ratings.ratings.tolist(),
        ))).encode())
        digest.update(self.items.name.encode())
        digest.update(str(k).encode())
        key = digest.hexdigest()
        if key not in self._spq_cache:
            model = fit_lfm(self.ratings)
            questionnaire = select_pairs_spq(model, self.items, k)
            self._spq_cache[key] = dataio.questionnaire_to_dict(questionnaire)
        return self._spq_cache[key]


def _lottery_json(lottery) -> dict:
    return {
        "id": lottery.id,
        "label": lottery.label,
        "outcomes": [{"value": v, "prob": p} for v, p in lottery.outcomes],
    }


def _questions_payload(state: _AppState, questionnaire: dict) -> list[dict]:
    out = []
    for idx, pair in enumerate(questionnaire["pairs"]):
        out.append(
            {
                "index": idx,
                "first": _lottery_json(state.items.by_id(pair["first"])),
                "second": _lottery_json(state.items.by_id(pair["second"])),
            }
        )
    return out


def _utility_payload(elicited) -> dict:
    payload = dataio.utility_to_dict(elicited)
    analytics = risk_aversion(elicited.utility)
    payload["gini"] = analytics.gini
    payload["ara"] = [{"breakpoint": y, "value": v} for y, v in analytics.ara]
    payload["rra"] = [{"breakpoint": y, "value": v} for y, v in analytics.rra]
    return payload


def create_app(config: ApiConfig | None = None) -> FastAPI:
    state = _AppState(config or ApiConfig())
    app = FastAPI(title="roboadvisor", version="1")
    if state.config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(state.config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )
    router = APIRouter(prefix="/v1")

    @app.exception_handler(AdvisorError)
    async def _advisor_error(request: Request, exc: AdvisorError):
        return _error_response(exc)

    @router.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @router.get("/items")
    def items():
        return dataio.item_set_to_dict(state.items)

    @router.post("/sessions")
    def create_session(req: CreateSessionRequest):
        if req.item_set is not None and req.item_set != state.items.name:
            raise NotFoundError(f"unknown item set {req.item_set!r}")
        k = req.k if req.k is not None else state.config.default_k
        if k < 1:
            raise ValidationError("k must be at least 1")
        max_pairs = len(state.items) * (len(state.items) - 1) // 2
        if k > max_pairs:
            raise ValidationError(f"k exceeds the {max_pairs} available pairs")
        if req.method == "spq":
            questionnaire = state.spq_questionnaire(k)
            seed = None
        elif req.method == "random":
            seed = state.next_seed()
            questionnaire = dataio.questionnaire_to_dict(
                select_pairs_random(state.items, k, seed=seed)
            )
        else:
            raise ValidationError(f"unknown questionnaire method {req.method!r}")
        record = SessionRecord(
            session_id=uuid.uuid4().hex,
            item_set=state.items.name,
            status="questioning",
            questionnaire=questionnaire,
            seed=seed,
        )
        stored = state.store.create(record)
        return {
            "session_id": stored.session_id,
            "questions": _questions_payload(state, questionnaire),
        }

    @router.post("/sessions/{session_id}/answers")
    def post_answers(session_id: str, req: AnswersRequest):
        record = state.store.get(session_id)
        if record.status != "questioning":
            raise ConflictError(f"session is already {record.status}")
        k = len(record.questionnaire["pairs"])
        existing = {entry["pair_index"] for entry in record.answers}
        fresh: list[dict] = []
        for entry in req.answers:
            if not 0 <= entry.pair_index < k:
                raise ValidationError(f"pair_index {entry.pair_index} out of range")
            if entry.pair_index in existing:
                raise ValidationError(f"duplicate pair_index {entry.pair_index}")
            if entry.choice not in ("first", "second", "none"):
                raise ValidationError(f"unknown choice {entry.choice!r}")
            existing.add(entry.pair_index)
            fresh.append({"pair_index": entry.pair_index, "choice": entry.choice})
        answers = sorted(record.answers + fresh, key=lambda e: e["pair_index"])
        status = "answered" if len(answers) == k else "questioning"
        stored = state.store.update(replace(record, answers=answers, status=status))
        return {"status": stored.status, "answered": len(answers), "k": k}

    @router.post("/sessions/{session_id}/elicit")
    def post_elicit(session_id: str, req: ElicitRequest | None = None):
        record = state.store.get(session_id)
        if record.status == "questioning":
            raise ConflictError("session is not fully answered yet")
        wanted = (req.estimators if req and req.estimators else list(ESTIMATORS))
        unknown = [e for e in wanted if e not in ESTIMATORS]
        if unknown:
            raise ValidationError(f"unknown estimators {unknown!r}")
        if not record.utilities:
            questionnaire = dataio.questionnaire_from_dict(
                record.questionnaire, state.items
            )
            answers = dataio.answer_sheet_from_dict(
                {"questionnaire_id": session_id, "answers": record.answers},
                questionnaire,
            )
            grid = build_breakpoints(questionnaire, state.upper)
            pes = elicit_pessimistic(answers, grid, state.scenarios)
            opt = elicit_optimistic(answers, grid, state.scenarios)
            neu = elicit_neutral(pes, opt, answers, grid)
            utilities = {
                "pessimistic": _utility_payload(pes),
                "optimistic": _utility_payload(opt),
                "neutral": _utility_payload(neu),
            }
            record = state.store.update(
                replace(record, utilities=utilities, status="elicited")
            )
        return {"utilities": {name: record.utilities[name] for name in wanted}}

    @router.post("/sessions/{session_id}/portfolio")
    def post_portfolio(session_id: str, req: PortfolioRequest):
        record = state.store.get(session_id)
        if record.status not in ("elicited", "recommended"):
            raise ConflictError(f"session is {record.status}; elicit first")
        if state.panel is None:
            raise ConflictError("no returns panel configured on this server")
        if req.budget <= 0:
            raise ValidationError("budget must be positive")
        estimator = req.estimator or state.config.default_estimator
        if estimator not in ESTIMATORS:
            raise ValidationError(f"unknown estimator {estimator!r}")
        elicited = dataio.utility_from_dict(record.utilities[estimator])
        n_risky = state.panel.n_risky
        if req.caps is None:
            caps = tuple(0.4 * req.budget for _ in range(n_risky))
        elif isinstance(req.caps, (int, float)):
            if not 0 < req.caps <= 1:
                raise ValidationError("a scalar cap must be a fraction in (0, 1]")
            caps = tuple(float(req.caps) * req.budget for _ in range(n_risky))
        else:
            if len(req.caps) != n_risky:
                raise ValidationError(f"need one cap per risky asset ({n_risky})")
            caps = tuple(float(c) for c in req.caps)
        spec = PortfolioSpec(budget=req.budget, caps=caps)
        window = state.panel.window(
            max(0, state.panel.n_days - state.config.window), state.panel.n_days
        )
        result = optimize_portfolio(elicited.utility, window, spec)
        wealth = req.budget
        preview = []
        weights = result.amounts / req.budget
        for date, row in zip(
            state.panel.dates[-len(window) :], window
        ):
            wealth *= float(weights @ row)
            preview.append({"date": date, "wealth": wealth})
        payload = {
            "estimator": estimator,
            "budget": req.budget,
            "assets": list(state.panel.asset_labels),
            "allocation": [float(a) for a in result.amounts],
            "objective": result.objective,
            "wealth_preview": preview,
        }
        state.store.update(replace(record, portfolio=payload, status="recommended"))
        return payload

    @router.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return state.store.get(session_id).to_dict()

    app.include_router(router)

    @app.get("/healthz")
    def root_healthz():
        return {"status": "ok"}

    app.state.advisor = state
    return app


def run_server(config: ApiConfig) -> None:
    import uvicorn

    host, _, port = config.bind.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8000))
