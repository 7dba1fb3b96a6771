"""Offline evolutionary loop: genesis, mutation, consolidation, pruning.

Operators run in that order over the bank, driven by the unprocessed SSM
window; each epoch emits a report with the measured mutation fraction and
mean fitness delta of replacements.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .bank import AgentType, Strategy, StrategyBank, StrategyMetadata
from .config import EngineConfig
from .embeddings import similar_groups
from .errors import EngineError, StructuredOutputError
from .gateway import LLMGateway, ProviderRole
from .memory import Trajectory, TrajectoryStore

AGENT_ROLES = {
    AgentType.DST: "dialog state tracking",
    AgentType.DP: "dialog policy",
    AgentType.NLG: "natural language generation",
}


@dataclass
class EvolutionReport:
    epoch_index: int
    operations: list[dict] = field(default_factory=list)
    measured_p: float = 0.0
    measured_mu: float = 0.0
    population_before: int = 0
    population_after: int = 0

    def to_dict(self) -> dict:
        return {
            "epoch_index": self.epoch_index,
            "operations": self.operations,
            "measured_p": self.measured_p,
            "measured_mu": self.measured_mu,
            "population_before": self.population_before,
            "population_after": self.population_after,
        }


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _average_metadata(sources: list[Strategy]) -> StrategyMetadata:
    n = len(sources)
    return StrategyMetadata(
        positive_feedback=_round_half_up(sum(s.metadata.positive_feedback for s in sources) / n),
        negative_feedback=_round_half_up(sum(s.metadata.negative_feedback for s in sources) / n),
        usage_count=_round_half_up(sum(s.metadata.usage_count for s in sources) / n),
        generation_index=max(s.metadata.generation_index for s in sources) + 1,
    )


def genesis(bank: StrategyBank, domain: str, agent_type: AgentType, k: int,
            gateway: LLMGateway) -> list[Strategy]:
    """Cold-start synthesis of k strategies for one single-domain population."""
    if bank.candidates_for({domain}, agent_type):
        raise EngineError(
            f"genesis precondition violated: alive {agent_type.value} strategies "
            f"already exist for {domain}")
    variables = {"k": str(k), "agent_role": AGENT_ROLES[agent_type], "domain": domain}
    reply = gateway.complete_structured(ProviderRole.OFFLINE, "genesis", variables)
    if len(reply["strategies"]) != k:
        # one extra attempt for a count mismatch, then give up
        reply = gateway.complete_structured(ProviderRole.OFFLINE, "genesis", variables)
        if len(reply["strategies"]) != k:
            raise StructuredOutputError(
                f"genesis returned {len(reply['strategies'])} strategies, expected {k}")
    created = []
    for stub in reply["strategies"]:
        strategy = Strategy(
            id=bank.next_id(),
            agent_type=agent_type,
            domains=frozenset({domain}),
            content=stub["content"],
            rationale=stub["reason"],
            metadata=StrategyMetadata(generation_index=1),
        )
        bank.add(strategy)
        created.append(strategy)
    return created


def compose_multidomain(bank: StrategyBank, domains: frozenset[str],
                        agent_type: AgentType, gateway: LLMGateway,
                        rng: random.Random) -> Strategy:
    """Composite for a multi-domain combo: one random source per constituent
    domain, merged via the consolidation operator."""
    if len(domains) < 2:
        raise ValueError("compose_multidomain requires at least two domains")
    sources = []
    for domain in sorted(domains):
        pool = bank.candidates_for({domain}, agent_type)
        if not pool:
            raise EngineError(
                f"no alive {agent_type.value} strategies for constituent domain '{domain}'")
        sources.append(rng.choice(pool))
    reply = gateway.complete_structured(ProviderRole.OFFLINE, "consolidation", {
        "strategy_contents": json.dumps([s.content for s in sources]),
    })
    composite = Strategy(
        id=bank.next_id(),
        agent_type=agent_type,
        domains=domains,
        content=reply["content"],
        rationale=reply["reason"],
        metadata=_average_metadata(sources),
    )
    bank.add(composite)
    return composite


def mutate(bank: StrategyBank, strategy: Strategy, trajectory: Trajectory,
           gateway: LLMGateway) -> tuple[int, Strategy]:
    """Score the parent, fold the score into its counts, and replace it with a
    revised child one generation deeper. The parent is retired, kept for audit."""
    critiques = [
        c.to_dict() for turn in trajectory.turns for c in turn.critiques if c.text.strip()
    ]
    reply = gateway.complete_structured(ProviderRole.OFFLINE, "mutation", {
        "strategy_content": strategy.content,
        "strategy_rationale": strategy.rationale,
        "trajectory": json.dumps(trajectory.to_dict()),
        "critiques": json.dumps(critiques),
    })
    score = int(reply["score"])
    if score == 1:
        strategy.metadata.positive_feedback += 1
    elif score == -1:
        strategy.metadata.negative_feedback += 1
    child = Strategy(
        id=bank.next_id(),
        agent_type=strategy.agent_type,
        domains=strategy.domains,
        content=reply["content"],
        rationale=reply["reason"],
        metadata=StrategyMetadata(
            positive_feedback=strategy.metadata.positive_feedback,
            negative_feedback=strategy.metadata.negative_feedback,
            usage_count=strategy.metadata.usage_count,
            generation_index=strategy.metadata.generation_index + 1,
        ),
    )
    bank.retire(strategy.id)
    bank.add(child)
    return score, child


def consolidate(bank: StrategyBank, group: list[Strategy],
                gateway: LLMGateway) -> Strategy:
    """Merge a similarity group into one strategy; sources are retired."""
    if len(group) < 2:
        raise ValueError("consolidation needs at least two strategies")
    reply = gateway.complete_structured(ProviderRole.OFFLINE, "consolidation", {
        "strategy_contents": json.dumps([s.content for s in group]),
    })
    merged = Strategy(
        id=bank.next_id(),
        agent_type=group[0].agent_type,
        domains=group[0].domains,
        content=reply["content"],
        rationale=reply["reason"],
        metadata=_average_metadata(group),
    )
    for s in group:
        bank.retire(s.id)
    bank.add(merged)
    return merged


def prune(bank: StrategyBank, max_population: int) -> list[str]:
    """Keep the fitness top-M of every (agent type, domain set) population.
    Boundary ties prefer the newer generation, then the lexicographically
    smaller id."""
    removed: list[str] = []
    for (agent_type, _domains), pop in bank.populations().items():
        if len(pop) <= max_population:
            continue
        table = bank.fitness_table(agent_type)
        ranked = sorted(
            pop,
            key=lambda s: (-table[s.id], -s.metadata.generation_index, s.id),
        )
        for s in ranked[max_population:]:
            bank.retire(s.id)
            removed.append(s.id)
    return removed


def required_coverage(trajectories: list[Trajectory]) -> set[frozenset[str]]:
    return {t.domains for t in trajectories}


def ensure_coverage(bank: StrategyBank, combo: frozenset[str], config: EngineConfig,
                    gateway: LLMGateway, rng: random.Random,
                    report: EvolutionReport | None = None) -> None:
    """Genesis for uncovered populations; multi-domain combos are composed
    from per-domain sources (generating those first when missing)."""
    for agent_type in AgentType:
        if bank.candidates_for(combo, agent_type):
            continue
        if len(combo) == 1:
            created = genesis(bank, next(iter(combo)), agent_type, config.genesis_k, gateway)
            if report is not None:
                report.operations.append({
                    "operator": "genesis",
                    "inputs": {"domain": sorted(combo), "agent_type": agent_type.value},
                    "outputs": [s.id for s in created],
                })
        else:
            for domain in sorted(combo):
                if not bank.candidates_for({domain}, agent_type):
                    created = genesis(bank, domain, agent_type, config.genesis_k, gateway)
                    if report is not None:
                        report.operations.append({
                            "operator": "genesis",
                            "inputs": {"domain": [domain], "agent_type": agent_type.value},
                            "outputs": [s.id for s in created],
                        })
            composite = compose_multidomain(bank, combo, agent_type, gateway, rng)
            if report is not None:
                report.operations.append({
                    "operator": "compose_multidomain",
                    "inputs": {"domains": sorted(combo), "agent_type": agent_type.value},
                    "outputs": [composite.id],
                })


class EvolutionEngine:
    """Holds the epoch cursor over the SSM and the epoch log."""

    def __init__(self, bank: StrategyBank, store: TrajectoryStore,
                 config: EngineConfig, gateway: LLMGateway, embedder,
                 rng: random.Random, epoch_log_path: str | Path | None = None):
        self.bank = bank
        self.store = store
        self.config = config
        self.gateway = gateway
        self.embedder = embedder
        self.rng = rng
        self.epoch_log_path = Path(epoch_log_path) if epoch_log_path else None
        self.epoch_index = 0
        self.processed_up_to = 0
        self.reports: list[EvolutionReport] = []

    def evolve_epoch(self, trajectories_override: list[Trajectory] | None = None) -> EvolutionReport:
        from .memory import flagged_strategies

        config = self.config
        report = EvolutionReport(epoch_index=self.epoch_index)
        report.population_before = len(self.bank.alive())
        if trajectories_override is not None:
            # per-turn trigger hands interim trajectories directly; the SSM
            # cursor stays put so the post-dialog epoch still sees the record
            window = [(t, flagged_strategies(t)) for t in trajectories_override]
            trajectories = list(trajectories_override)
        else:
            window = self.store.query_for_evolution(self.processed_up_to)
            trajectories = [t for t, _ in window]
            if trajectories:
                self.processed_up_to = max(t.dialog_id for t in trajectories)

        # genesis coverage re-check (episodes normally pre-cover, per retrieve-first)
        for combo in sorted(required_coverage(trajectories), key=sorted):
            try:
                ensure_coverage(self.bank, combo, config, self.gateway, self.rng, report)
            except EngineError as exc:
                report.operations.append({"operator": "genesis", "error": str(exc)})

        # mutation over flagged strategies
        flagged_total = 0
        deltas = []
        alive_before_mutation = len(self.bank.alive())
        seen: set[str] = set()
        for traj, flagged in window:
            for sid in sorted(flagged):
                if sid in seen:
                    continue
                seen.add(sid)
                try:
                    strategy = self.bank.get(sid)
                except EngineError:
                    continue
                if not strategy.alive:
                    continue
                flagged_total += 1
                parent_fitness = self.bank.fitness_of(strategy)
                try:
                    score, child = mutate(self.bank, strategy, traj, self.gateway)
                except StructuredOutputError as exc:
                    report.operations.append({
                        "operator": "mutation", "inputs": {"strategy": sid},
                        "error": str(exc),
                    })
                    continue
                deltas.append(self.bank.fitness_of(child) - parent_fitness)
                report.operations.append({
                    "operator": "mutation",
                    "inputs": {"strategy": sid, "dialog_id": traj.dialog_id},
                    "outputs": [child.id],
                    "score": score,
                })

        # consolidation of similar groups within each population
        if config.consolidate_enabled:
            for (_, _), pop in list(self.bank.populations().items()):
                for group in similar_groups(pop, config.similarity_threshold, self.embedder):
                    try:
                        merged = consolidate(self.bank, group, self.gateway)
                    except StructuredOutputError as exc:
                        report.operations.append({
                            "operator": "consolidation",
                            "inputs": {"group": [s.id for s in group]},
                            "error": str(exc),
                        })
                        continue
                    report.operations.append({
                        "operator": "consolidation",
                        "inputs": {"group": [s.id for s in group]},
                        "outputs": [merged.id],
                    })

        # pruning to the population bound
        if config.prune_enabled:
            removed = prune(self.bank, config.max_population)
            if removed:
                report.operations.append({
                    "operator": "pruning", "inputs": {}, "outputs": removed,
                })

        report.measured_p = (flagged_total / alive_before_mutation
                             if alive_before_mutation else 0.0)
        report.measured_mu = sum(deltas) / len(deltas) if deltas else 0.0
        report.population_after = len(self.bank.alive())
        self.epoch_index += 1
        self.reports.append(report)
        if self.epoch_log_path is not None:
            with self.epoch_log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(report.to_dict(), ensure_ascii=False) + "\n")
        return report
