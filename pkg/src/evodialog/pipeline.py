"""Online dialog loop: DST -> DP -> NLG -> UserSim with peer critique.

Also owns the system-action grammar, the entity database query, the
episode driver, and the desk-scale success evaluator.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field

from .bank import AgentType, FeedbackSignal, Strategy, StrategyBank
from .config import EngineConfig
from .corpus import Database, UserGoal
from .errors import EngineError, NoCandidatesError, StructuredOutputError, ValidationError
from .gateway import LLMGateway, ProviderRole
from .memory import (CritiqueEntry, Outcome, Trajectory, TrajectorySource,
                     TrajectoryStore, TurnRecord)
from .selection import select
from .templates import STATIC_STRATEGIES

END_TOKEN = "/end"

ACT_NAMES = frozenset({
    "inform", "request", "recommend", "select", "nooffer",
    "book", "nobook", "offerbook", "offerbooked",
})
SLOT_CHECKED_ACTS = frozenset({"inform", "request", "book", "offerbook"})

_ACT_RE = re.compile(r"\s*([a-z_]+)\(([^()]*)\)\s*")


@dataclass(frozen=True)
class Act:
    name: str
    args: tuple[tuple[str, str], ...]   # (slot, value); value "" for bare args


def parse_action(action: str) -> list[Act]:
    """Parse a comma-joined action string; raises ValidationError on bad syntax."""
    acts: list[Act] = []
    pos = 0
    text = action.strip()
    if not text:
        raise ValidationError("system_action", "empty action string")
    while pos < len(text):
        m = _ACT_RE.match(text, pos)
        if not m:
            raise ValidationError("system_action", f"cannot parse at: {text[pos:]!r}")
        name, raw_args = m.group(1), m.group(2)
        if name not in ACT_NAMES:
            raise ValidationError("system_action", f"unknown act: {name}")
        args = []
        if raw_args.strip():
            for part in raw_args.split(","):
                part = part.strip()
                if "=" in part:
                    slot, value = part.split("=", 1)
                    args.append((slot.strip(), value.strip()))
                else:
                    args.append((part, ""))
        acts.append(Act(name, tuple(args)))
        pos = m.end()
        if pos < len(text):
            if text[pos] != ",":
                raise ValidationError("system_action", f"expected ',' at: {text[pos:]!r}")
            pos += 1
    return acts


def validate_action(action: str, db: Database | None, domains: frozenset[str]) -> list[Act]:
    """Parse and check that slots named in slot-bearing acts exist in the schema."""
    acts = parse_action(action)
    if db is None:
        return acts
    known_slots = set()
    for domain in domains:
        known_slots.update(db.schema.get(domain, []))
    for act in acts:
        if act.name in SLOT_CHECKED_ACTS:
            for slot, _ in act.args:
                if slot and slot not in known_slots:
                    raise ValidationError(
                        "system_action", f"slot '{slot}' not in schema for {sorted(domains)}")
    return acts


def query_database(db: Database, query: dict) -> list[dict]:
    """Entities matching all constraints; case-insensitive equality, 'dontcare'
    and absent slots match everything. Unknown domains and slots are errors."""
    domain = query["domain"]
    if domain not in db.entities:
        raise ValidationError("domain", f"unknown domain: {domain}")
    constraints = query.get("constraints", {})
    schema = set(db.schema.get(domain, []))
    for slot in constraints:
        if slot not in schema:
            raise ValidationError("slot", f"unknown slot '{slot}' for domain '{domain}'")
    results = []
    for entity in db.entities[domain]:
        ok = True
        for slot, value in constraints.items():
            if str(value).lower() == "dontcare":
                continue
            if str(entity.get(slot, "")).lower() != str(value).lower():
                ok = False
                break
        if ok:
            results.append(entity)
    return results


@dataclass
class DialogContext:
    domains: frozenset[str]
    goal: UserGoal
    config: EngineConfig
    strategies: dict[str, Strategy | str]        # agent type -> strategy (or static text)
    history: list[TurnRecord] = field(default_factory=list)
    turn_index: int = 0
    previous_belief: dict = field(default_factory=dict)

    def strategy_text(self, agent: str) -> str:
        s = self.strategies.get(agent)
        if isinstance(s, Strategy):
            if self.config.with_reasoning and s.rationale:
                return f"## Strategy:\n{s.content}\n## Strategy Rationale:\n{s.rationale}"
            return f"## Strategy:\n{s.content}"
        return f"## Strategy:\n{s}" if s else ""

    def formatted_history(self) -> str:
        lines = []
        for t in self.history:
            lines.append(f"user: {t.user_utterance}")
            lines.append(f"system: {t.system_response}")
        return "## Dialog History:\n" + "\n".join(lines) if lines else "## Dialog History: (none)"


def _clip_belief(belief: dict, domains: frozenset[str]) -> dict[str, dict[str, str]]:
    # DST may never widen the dialog's domain scope
    return {d: dict(v) for d, v in belief.items() if d in domains and isinstance(v, dict)}


def _maybe_arbitrate(gateway: LLMGateway, ctx: DialogContext, critique: str,
                     author: str, target: str, original: str) -> tuple[str, bool]:
    """Returns (output to adopt, replaced?)."""
    if not (ctx.config.arbitration and critique.strip()):
        return original, False
    reply = gateway.complete_structured(ProviderRole.ONLINE, "arbiter", {
        "target_agent": target,
        "author_agent": author,
        "original_output": original,
        "critique": critique,
        "context": ctx.formatted_history(),
    })
    if reply["critique_accepted"]:
        return reply["final_output"], True
    return original, False


def run_turn(ctx: DialogContext, user_utterance: str, gateway: LLMGateway,
             db: Database | None) -> TurnRecord:
    """One online cycle. Ordering is fixed: DST -> DP -> NLG -> UserSim."""
    domains_str = ", ".join(sorted(ctx.domains))
    critiques: list[CritiqueEntry] = []
    crit_on = ctx.config.with_peer_critique

    def add_critique(author: str, target: str, text: str, rationale: str) -> str:
        text = text if crit_on else ""
        if crit_on:
            critiques.append(CritiqueEntry(author, target, text, rationale))
        return text

    if ctx.config.e2e_agent:
        reply = gateway.complete_structured(ProviderRole.ONLINE, "e2e_stage1", {
            "domains": domains_str,
            "user_utterance": user_utterance,
            "previous_belief_state": json.dumps(ctx.previous_belief),
            "formatted_history": ctx.formatted_history(),
            "formatted_esb": "\n".join(ctx.strategy_text(a) for a in ("DST", "DP", "NLG")),
        })
        belief = _clip_belief(reply["belief_state"], ctx.domains)
        action = reply["system_action"]
        add_critique("E2E", "E2E", reply.get("critique", ""), reply.get("reason", ""))
        db_results, db_count = _run_query(reply, db)
        acts_ok_or_raise(action, db, ctx.domains)
        reply2 = gateway.complete_structured(ProviderRole.ONLINE, "e2e_stage2", {
            "domains": domains_str,
            "system_action": action,
            "db_results": json.dumps(db_results),
            "formatted_history": ctx.formatted_history(),
            "formatted_esb": ctx.strategy_text("NLG"),
        })
        response = reply2["response"]
    else:
        dst = gateway.complete_structured(ProviderRole.ONLINE, "dst", {
            "domains": domains_str,
            "user_utterance": user_utterance,
            "previous_belief_state": json.dumps(ctx.previous_belief),
            "formatted_history": ctx.formatted_history(),
            "formatted_esb": ctx.strategy_text("DST"),
        })
        belief = _clip_belief(dst["belief_state"], ctx.domains)
        add_critique("DST", "UserSim", dst.get("critique", ""), dst.get("reason", ""))

        dp = gateway.complete_structured(ProviderRole.ONLINE, "dp", {
            "domains": domains_str,
            "user_utterance": user_utterance,
            "belief_state": json.dumps(belief),
            "pre_belief_state": json.dumps(ctx.previous_belief),
            "formatted_history": ctx.formatted_history(),
            "formatted_esb": ctx.strategy_text("DP"),
        })
        dp_critique = add_critique("DP", "DST", dp.get("critique", ""), dp.get("reason", ""))
        adopted, replaced = _maybe_arbitrate(gateway, ctx, dp_critique, "DP", "DST",
                                             json.dumps(belief))
        if replaced:
            try:
                belief = _clip_belief(json.loads(adopted), ctx.domains)
            except (json.JSONDecodeError, AttributeError):
                pass
        action = dp["system_action"]
        db_results, db_count = _run_query(dp, db)
        acts_ok_or_raise(action, db, ctx.domains)

        nlg = gateway.complete_structured(ProviderRole.ONLINE, "nlg", {
            "domains": domains_str,
            "system_action": action,
            "db_results": json.dumps(db_results),
            "formatted_history": ctx.formatted_history(),
            "formatted_esb": ctx.strategy_text("NLG"),
        })
        nlg_critique = add_critique("NLG", "DP", nlg.get("critique", ""), nlg.get("reason", ""))
        action, _ = _maybe_arbitrate(gateway, ctx, nlg_critique, "NLG", "DP", action)
        response = nlg["response"]

        sim = gateway.complete_structured(ProviderRole.ONLINE, "user_sim", {
            "domains": domains_str,
            "goal": json.dumps(ctx.goal.to_dict()),
            "system_response": response,
            "formatted_history": ctx.formatted_history(),
        })
        sim_critique = add_critique("UserSim", "NLG", sim.get("critique", ""),
                                    sim.get("reason", ""))
        response, _ = _maybe_arbitrate(gateway, ctx, sim_critique, "UserSim", "NLG", response)

    record = TurnRecord(
        user_utterance=user_utterance,
        belief_state=belief,
        system_action=action,
        system_response=response,
        critiques=critiques,
        db_result_count=db_count,
    )
    ctx.history.append(record)
    ctx.previous_belief = belief
    ctx.turn_index += 1
    return record


def acts_ok_or_raise(action: str, db: Database | None, domains: frozenset[str]) -> None:
    try:
        validate_action(action, db, domains)
    except ValidationError as exc:
        raise StructuredOutputError(f"system action rejected: {exc}", raw_reply=action) from exc


def _run_query(reply: dict, db: Database | None) -> tuple[list[dict], int | None]:
    if not reply.get("query_db") or db is None:
        return [], None
    query = reply.get("query") or {}
    domain = query.get("domain")
    if not domain:
        return [], None
    state = query.get("state", {})
    constraints = state.get(domain, {}) if isinstance(state, dict) else {}
    results = query_database(db, {"domain": domain, "constraints": constraints})
    return results, len(results)


# -- success evaluation ---------------------------------------------------

def _entity_names_mentioned(turns: list[TurnRecord], db: Database, domain: str) -> list[str]:
    names = [str(e.get("name", "")).lower() for e in db.entities.get(domain, [])]
    mentioned = []
    for turn in turns:
        haystack = (turn.system_action + " " + turn.system_response).lower()
        for name in names:
            if name and name in haystack:
                mentioned.append(name)
    return mentioned


def _entity_by_name(db: Database, domain: str, name: str) -> dict | None:
    for entity in db.entities.get(domain, []):
        if str(entity.get("name", "")).lower() == name:
            return entity
    return None


def _satisfies(entity: dict, constraints: dict[str, str]) -> bool:
    for slot, value in constraints.items():
        if str(value).lower() == "dontcare":
            continue
        if str(entity.get(slot, "")).lower() != str(value).lower():
            return False
    return True


def evaluate_outcome(turns: list[TurnRecord], goal: UserGoal,
                     db: Database) -> tuple[bool, bool]:
    """Desk-scale Inform/Success: (entity correct, entity correct and all
    requested slot values answered)."""
    inform_ok = True
    offered: dict[str, dict] = {}
    for domain, constraints in goal.constraints.items():
        mentioned = _entity_names_mentioned(turns, db, domain)
        if not mentioned:
            inform_ok = False
            continue
        entity = _entity_by_name(db, domain, mentioned[-1])
        if entity is None or not _satisfies(entity, constraints):
            inform_ok = False
            continue
        offered[domain] = entity
    if not inform_ok:
        return False, False
    responses = " ".join(t.system_response.lower() for t in turns)
    for domain, slots in goal.requested.items():
        entity = offered.get(domain)
        if entity is None:
            return True, False
        for slot in slots:
            value = str(entity.get(slot, "")).lower()
            placeholder = f"[{domain}_{slot}]"
            if value and value in responses:
                continue
            if placeholder in responses:
                continue
            return True, False
    return True, True


# -- episode driver -------------------------------------------------------

def select_strategies(bank: StrategyBank, domains: frozenset[str],
                      config: EngineConfig, rng: random.Random) -> dict[str, Strategy]:
    """One strategy per agent type via the configured policy; raises
    NoCandidatesError when any population is uncovered."""
    chosen: dict[str, Strategy] = {}
    for agent_type in (AgentType.DST, AgentType.DP, AgentType.NLG):
        candidates = bank.candidates_for(domains, agent_type)
        if not candidates:
            raise NoCandidatesError(
                f"no {agent_type.value} strategies for {sorted(domains)}")
        table = bank.fitness_table(agent_type)
        fitnesses = [table[c.id] for c in candidates]
        chosen[agent_type.value] = select(candidates, fitnesses, config.selection, rng)
    return chosen


def run_episode(goal: UserGoal, user_turns: list[str], bank: StrategyBank | None,
                config: EngineConfig, gateway: LLMGateway, db: Database,
                rng: random.Random, store: TrajectoryStore | None = None,
                source: TrajectorySource = TrajectorySource.CORPUS_REPLAY,
                eval_mode: bool = False, on_turn=None) -> Trajectory:
    """Select strategies, loop turns, assess outcome, record feedback, append to SSM.

    ``eval_mode`` suppresses feedback and SSM writes so phased evaluation does
    not perturb the training run. Zero-shot mode uses the static strategies
    and never touches the bank.
    """
    domains = goal.domains
    if config.zero_shot or bank is None:
        strategies: dict[str, Strategy | str] = dict(STATIC_STRATEGIES)
        strategies_used = {a: f"static_{a}" for a in STATIC_STRATEGIES}
    else:
        chosen = select_strategies(bank, domains, config, rng)
        strategies = dict(chosen)
        strategies_used = {a: s.id for a, s in chosen.items()}

    ctx = DialogContext(domains=domains, goal=goal, config=config, strategies=strategies)
    aborted = False
    for utterance in user_turns:
        if ctx.turn_index >= config.t_max:
            break
        if utterance.strip() == END_TOKEN:
            break
        try:
            run_turn(ctx, utterance, gateway, db)
        except StructuredOutputError:
            aborted = True
            break
        if on_turn is not None:
            on_turn(ctx, strategies_used)

    inform_ok, success_ok = (False, False)
    if ctx.history and not aborted:
        inform_ok, success_ok = evaluate_outcome(ctx.history, goal, db)
    outcome = Outcome.SUCCESS if success_ok else Outcome.FAILURE

    traj = Trajectory(
        domains=domains,
        goal=goal.to_dict(),
        strategies_used=strategies_used,
        turns=ctx.history if ctx.history else [TurnRecord(
            user_utterance="", belief_state={}, system_action="nooffer()",
            system_response="", critiques=[])],
        outcome=outcome,
        source=source,
    )

    if not eval_mode and not config.zero_shot and bank is not None:
        _apply_feedback(bank, traj)
    if not eval_mode and store is not None:
        store.append(traj)
    return traj


def _apply_feedback(bank: StrategyBank, traj: Trajectory) -> None:
    negatively_named = set()
    for turn in traj.turns:
        for crit in turn.critiques:
            if crit.text.strip() and crit.target_agent in traj.strategies_used:
                negatively_named.add(traj.strategies_used[crit.target_agent])
    for sid in traj.strategies_used.values():
        try:
            bank.record_feedback(sid, FeedbackSignal.USED)
            if traj.outcome is Outcome.FAILURE or sid in negatively_named:
                bank.record_feedback(sid, FeedbackSignal.NEGATIVE)
            else:
                bank.record_feedback(sid, FeedbackSignal.POSITIVE)
        except EngineError:
            # strategy may have been retired between selection and scoring
            continue
