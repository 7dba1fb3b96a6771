"""Evolvable strategy bank: records, feedback accounting, fitness, lookup, snapshots.

A strategy is a natural-language policy for one agent type over one exact
domain set. Fitness combines smoothed net feedback with a bonus for newer
generations, min-max normalized over the alive population of the same
agent type.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import LifecycleError, SnapshotParseError, StrategyNotFoundError


class AgentType(str, Enum):
    DST = "DST"
    DP = "DP"
    NLG = "NLG"


class FeedbackSignal(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    USED = "used"


@dataclass
class StrategyMetadata:
    positive_feedback: int = 0
    negative_feedback: int = 0
    usage_count: int = 0
    generation_index: int = 1

    def copy(self) -> "StrategyMetadata":
        return replace(self)


@dataclass(frozen=True)
class FitnessParams:
    alpha: float = 0.3
    epsilon: float = 0.01

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass
class Strategy:
    id: str
    agent_type: AgentType
    domains: frozenset[str]
    content: str
    rationale: str = ""
    metadata: StrategyMetadata = field(default_factory=StrategyMetadata)
    alive: bool = True

    def __post_init__(self):
        self.agent_type = AgentType(self.agent_type)
        self.domains = frozenset(self.domains)
        if not self.domains:
            raise ValueError(f"strategy {self.id}: domains must be non-empty")
        if not self.content:
            raise ValueError(f"strategy {self.id}: content must be non-empty")


def compute_fitness(meta: StrategyMetadata, gen_norm: float, params: FitnessParams) -> float:
    """Smoothed net feedback plus the weighted normalized generation index."""
    net = (meta.positive_feedback - meta.negative_feedback) / (meta.usage_count + params.epsilon)
    return net + params.alpha * gen_norm


def generation_norms(strategies: Iterable[Strategy]) -> dict[str, float]:
    """Min-max normalize generation indices over a population.

    Equal min and max (including singleton populations) map everything to 0.
    """
    pop = list(strategies)
    if not pop:
        return {}
    gens = [s.metadata.generation_index for s in pop]
    lo, hi = min(gens), max(gens)
    if lo == hi:
        return {s.id: 0.0 for s in pop}
    span = hi - lo
    return {s.id: (s.metadata.generation_index - lo) / span for s in pop}


class StrategyBank:
    """Thread-safe population store. Mutations serialize through one lock;
    readers get consistent copies."""

    def __init__(self, params: FitnessParams | None = None):
        self.params = params or FitnessParams()
        self._strategies: dict[str, Strategy] = {}
        self._lock = threading.RLock()
        self._counter = 0

    # -- construction -----------------------------------------------------

    def next_id(self, prefix: str = "s") -> str:
        with self._lock:
            self._counter += 1
            return f"{prefix}{self._counter:06d}"

    def add(self, strategy: Strategy) -> Strategy:
        with self._lock:
            if strategy.id in self._strategies:
                raise ValueError(f"duplicate strategy id: {strategy.id}")
            self._strategies[strategy.id] = strategy
            return strategy

    # -- access -----------------------------------------------------------

    def get(self, strategy_id: str) -> Strategy:
        with self._lock:
            try:
                return self._strategies[strategy_id]
            except KeyError:
                raise StrategyNotFoundError(strategy_id) from None

    def __len__(self) -> int:
        return len(self._strategies)

    def all_strategies(self, include_dead: bool = True) -> list[Strategy]:
        with self._lock:
            out = list(self._strategies.values())
        if not include_dead:
            out = [s for s in out if s.alive]
        return out

    def alive(self, agent_type: AgentType | None = None) -> list[Strategy]:
        with self._lock:
            return [
                s for s in self._strategies.values()
                if s.alive and (agent_type is None or s.agent_type == agent_type)
            ]

    def candidates_for(self, domains: Iterable[str], agent_type: AgentType) -> list[Strategy]:
        """Alive strategies of the agent type whose domain set equals the query set."""
        query = frozenset(domains)
        if not query:
            raise ValueError("domains must be non-empty")
        with self._lock:
            return [
                s for s in self._strategies.values()
                if s.alive and s.agent_type == agent_type and s.domains == query
            ]

    def populations(self) -> dict[tuple[AgentType, frozenset[str]], list[Strategy]]:
        """Alive strategies grouped by (agent_type, domain set)."""
        groups: dict[tuple[AgentType, frozenset[str]], list[Strategy]] = {}
        for s in self.alive():
            groups.setdefault((s.agent_type, s.domains), []).append(s)
        return groups

    # -- feedback ---------------------------------------------------------

    def record_feedback(self, strategy_id: str, signal: FeedbackSignal) -> StrategyMetadata:
        with self._lock:
            strategy = self.get(strategy_id)
            if not strategy.alive:
                raise LifecycleError(f"strategy {strategy_id} is dead")
            signal = FeedbackSignal(signal)
            if signal is FeedbackSignal.POSITIVE:
                strategy.metadata.positive_feedback += 1
            elif signal is FeedbackSignal.NEGATIVE:
                strategy.metadata.negative_feedback += 1
            else:
                strategy.metadata.usage_count += 1
            return strategy.metadata

    def retire(self, strategy_id: str) -> None:
        with self._lock:
            self.get(strategy_id).alive = False

    # -- fitness ----------------------------------------------------------

    def fitness_of(self, strategy: Strategy) -> float:
        """Fitness using gen_norm over the alive population of the same agent type."""
        with self._lock:
            norms = generation_norms(self.alive(strategy.agent_type))
            gen_norm = norms.get(strategy.id, 0.0)
            return compute_fitness(strategy.metadata, gen_norm, self.params)

    def fitness_table(self, agent_type: AgentType) -> dict[str, float]:
        with self._lock:
            pop = self.alive(agent_type)
            norms = generation_norms(pop)
            return {
                s.id: compute_fitness(s.metadata, norms[s.id], self.params) for s in pop
            }

    # -- persistence ------------------------------------------------------

    _FIELDS = ("id", "agent_type", "domains", "content", "reason",
               "h_plus", "h_minus", "n_used", "generation", "alive")

    def to_records(self) -> list[dict]:
        with self._lock:
            return [
                {
                    "id": s.id,
                    "agent_type": s.agent_type.value,
                    "domains": sorted(s.domains),
                    "content": s.content,
                    "reason": s.rationale,
                    "h_plus": s.metadata.positive_feedback,
                    "h_minus": s.metadata.negative_feedback,
                    "n_used": s.metadata.usage_count,
                    "generation": s.metadata.generation_index,
                    "alive": s.alive,
                }
                for s in self._strategies.values()
            ]

    def save(self, destination: str | Path) -> None:
        Path(destination).write_text(
            json.dumps(self.to_records(), indent=2, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def from_records(cls, records: list[dict], params: FitnessParams | None = None) -> "StrategyBank":
        bank = cls(params)
        max_serial = 0
        for i, rec in enumerate(records):
            ident = rec.get("id", f"#{i}")
            for field_name in cls._FIELDS:
                if field_name not in rec:
                    raise SnapshotParseError(str(ident), f"missing field '{field_name}'")
            try:
                strategy = Strategy(
                    id=rec["id"],
                    agent_type=AgentType(rec["agent_type"]),
                    domains=frozenset(rec["domains"]),
                    content=rec["content"],
                    rationale=rec["reason"],
                    metadata=StrategyMetadata(
                        positive_feedback=int(rec["h_plus"]),
                        negative_feedback=int(rec["h_minus"]),
                        usage_count=int(rec["n_used"]),
                        generation_index=int(rec["generation"]),
                    ),
                    alive=bool(rec["alive"]),
                )
            except (ValueError, TypeError) as exc:
                raise SnapshotParseError(str(ident), str(exc)) from exc
            bank.add(strategy)
            tail = rec["id"].lstrip("s")
            if tail.isdigit():
                max_serial = max(max_serial, int(tail))
        bank._counter = max_serial
        return bank

    @classmethod
    def load(cls, source: str | Path, params: FitnessParams | None = None) -> "StrategyBank":
        try:
            records = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SnapshotParseError("<document>", str(exc)) from exc
        if not isinstance(records, list):
            raise SnapshotParseError("<document>", "snapshot must be a JSON array")
        return cls.from_records(records, params)
