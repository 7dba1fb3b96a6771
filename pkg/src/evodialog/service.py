"""HTTP facade: live chat sessions, bank inspection, analytics, and
on-demand evolution epochs over one shared engine instance."""
from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from pydantic import BaseModel

from .bank import AgentType
from .corpus import UserGoal
from .embeddings import HashEmbedder
from .engine import Engine
from .errors import EngineError, NoCandidatesError, StructuredOutputError
from .memory import Outcome, Trajectory, TrajectorySource
from .metrics import bank_stats
from .pipeline import DialogContext, END_TOKEN, _apply_feedback, evaluate_outcome, run_turn, select_strategies
from .templates import STATIC_STRATEGIES

TOKEN_ENV = "EVODIALOG_SERVICE_TOKEN"


@dataclass
class Session:
    id: str
    ctx: DialogContext
    strategies_used: dict[str, str]
    lock: threading.Lock = field(default_factory=threading.Lock)
    closed: bool = False


def _require_token(request: Request) -> None:
    expected = os.environ.get(TOKEN_ENV)
    if not expected:
        return
    header = request.headers.get("authorization", "")
    if header != f"Bearer {expected}":
        raise HTTPException(status_code=401, detail="missing or invalid bearer token")


class CreateSessionRequest(BaseModel):
    goal: dict


class TurnRequest(BaseModel):
    utterance: str


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="evodialog", dependencies=[Depends(_require_token)])
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    evolve_lock = threading.Lock()
    embedder = HashEmbedder()

    def _get_session(session_id: str) -> Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
        return session

    def _close_session(session: Session, outcome_hint: Outcome | None = None) -> dict:
        """Score the dialog, record feedback and the trajectory, then run the
        configured evolution trigger. Turnless sessions are dropped unscored."""
        session.closed = True
        ctx = session.ctx
        if not ctx.history:
            return {"closed": True, "outcome": Outcome.FAILURE.value,
                    "inform": False, "success": False, "turns": 0, "recorded": False}
        inform_ok, success_ok = evaluate_outcome(ctx.history, ctx.goal, engine.db)
        outcome = outcome_hint or (Outcome.SUCCESS if success_ok else Outcome.FAILURE)
        traj = Trajectory(
            domains=ctx.domains, goal=ctx.goal.to_dict(),
            strategies_used=session.strategies_used, turns=ctx.history,
            outcome=outcome, source=TrajectorySource.LIVE_CHAT,
        )
        if not engine.config.zero_shot:
            _apply_feedback(engine.bank, traj)
        engine.store.append(traj)
        engine.episode_count += 1
        engine._maybe_trigger_evolution()
        return {"closed": True, "outcome": outcome.value,
                "inform": inform_ok, "success": success_ok,
                "turns": len(ctx.history), "recorded": True,
                "dialog_id": traj.dialog_id}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest) -> dict:
        try:
            goal = UserGoal.from_dict(body.goal)
            if not goal.domains:
                raise EngineError("goal must name at least one domain")
            engine.prepare_domains(goal.domains)
            if engine.config.zero_shot:
                strategies: dict = dict(STATIC_STRATEGIES)
                strategies_used = {a: f"static_{a}" for a in STATIC_STRATEGIES}
            else:
                chosen = select_strategies(engine.bank, goal.domains,
                                           engine.config, engine.rng)
                strategies = dict(chosen)
                strategies_used = {a: s.id for a, s in chosen.items()}
        except NoCandidatesError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except EngineError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        session = Session(
            id=uuid.uuid4().hex,
            ctx=DialogContext(domains=goal.domains, goal=goal,
                              config=engine.config, strategies=strategies),
            strategies_used=strategies_used,
        )
        with sessions_lock:
            sessions[session.id] = session
        return {"session_id": session.id,
                "domains": sorted(goal.domains),
                "strategies_used": strategies_used}

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnRequest) -> dict:
        session = _get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail="a turn is already in flight for this session")
        try:
            if session.closed:
                raise HTTPException(status_code=409, detail="session already closed")
            if body.utterance.strip() == END_TOKEN:
                return _close_session(session)
            if session.ctx.turn_index >= engine.config.t_max:
                result = _close_session(session, outcome_hint=Outcome.FAILURE)
                result["detail"] = "turn limit reached"
                return result
            try:
                record = run_turn(session.ctx, body.utterance, engine.gateway, engine.db)
            except StructuredOutputError as exc:
                result = _close_session(session, outcome_hint=Outcome.FAILURE)
                result["detail"] = f"structured output failure: {exc}"
                return result
            return {"closed": False, "turn_index": session.ctx.turn_index - 1,
                    "turn": record.to_dict()}
        finally:
            session.lock.release()

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str) -> None:
        _get_session(session_id)
        with sessions_lock:
            del sessions[session_id]

    @app.get("/bank")
    def get_bank(agent_type: str | None = None,
                 domain: list[str] = Query(default=[]),
                 include_dead: bool = False) -> list[dict]:
        if agent_type is not None:
            try:
                AgentType(agent_type)
            except ValueError as exc:
                raise HTTPException(status_code=422,
                                    detail=f"unknown agent_type: {agent_type}") from exc
        tables = {t: engine.bank.fitness_table(t) for t in AgentType}
        wanted = frozenset(domain)
        out = []
        for rec in engine.bank.to_records():
            if not rec["alive"] and not include_dead:
                continue
            if agent_type is not None and rec["agent_type"] != agent_type:
                continue
            if wanted and frozenset(rec["domains"]) != wanted:
                continue
            rec["fitness"] = tables[AgentType(rec["agent_type"])].get(rec["id"])
            out.append(rec)
        return out

    @app.get("/analytics")
    def get_analytics() -> dict:
        counts = {
            "alive_strategies": len(engine.bank.alive()),
            "total_strategies": len(engine.bank),
            "trajectories": len(engine.store),
            "epochs": engine.evolution.epoch_index,
            "open_sessions": sum(1 for s in sessions.values() if not s.closed),
        }
        try:
            stats = bank_stats(engine.bank, embedder).to_dict()
        except EngineError:
            stats = {"entropy_bits": None, "mean_pairwise_similarity": None,
                     "mean_alive_fitness": None, "avg_generation_per_agent_type": {}}
        return {**stats, "counts": counts}

    @app.post("/evolve")
    def post_evolve() -> dict:
        if not evolve_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="an epoch is already in flight")
        try:
            report = engine.evolution.evolve_epoch()
            return report.to_dict()
        except EngineError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        finally:
            evolve_lock.release()

    @app.get("/epochs")
    def get_epochs() -> list[dict]:
        return [r.to_dict() for r in engine.evolution.reports]

    return app
