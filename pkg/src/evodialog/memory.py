"""Shared structured memory: append-only store of full dialog trajectories.

One JSON record per line; trajectories are immutable once appended. The
evolution loop reads a window of unprocessed trajectories and flags the
used strategies that triggered on failure or non-empty critiques.
"""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ValidationError

T_MAX_DEFAULT = 30


class Outcome(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class TrajectorySource(str, Enum):
    CORPUS_REPLAY = "corpus_replay"
    LIVE_CHAT = "live_chat"


class CritiqueAuthor(str, Enum):
    DST = "DST"
    DP = "DP"
    NLG = "NLG"
    USER_SIM = "UserSim"
    E2E = "E2E"


@dataclass
class CritiqueEntry:
    author_agent: str
    target_agent: str
    text: str = ""          # empty text means "no issue found"
    rationale: str = ""

    def to_dict(self) -> dict:
        return {
            "author_agent": self.author_agent,
            "target_agent": self.target_agent,
            "text": self.text,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CritiqueEntry":
        return cls(d["author_agent"], d["target_agent"], d.get("text", ""), d.get("rationale", ""))


@dataclass
class TurnRecord:
    user_utterance: str
    belief_state: dict[str, dict[str, str]]
    system_action: str
    system_response: str
    critiques: list[CritiqueEntry] = field(default_factory=list)
    db_result_count: int | None = None

    def to_dict(self) -> dict:
        d = {
            "user_utterance": self.user_utterance,
            "belief_state": self.belief_state,
            "system_action": self.system_action,
            "system_response": self.system_response,
            "critiques": [c.to_dict() for c in self.critiques],
        }
        if self.db_result_count is not None:
            d["db_result_count"] = self.db_result_count
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TurnRecord":
        return cls(
            user_utterance=d["user_utterance"],
            belief_state=d["belief_state"],
            system_action=d["system_action"],
            system_response=d["system_response"],
            critiques=[CritiqueEntry.from_dict(c) for c in d.get("critiques", [])],
            db_result_count=d.get("db_result_count"),
        )


@dataclass
class Trajectory:
    domains: frozenset[str]
    goal: dict
    strategies_used: dict[str, str]       # agent type -> strategy id
    turns: list[TurnRecord]
    outcome: Outcome
    source: TrajectorySource = TrajectorySource.CORPUS_REPLAY
    dialog_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "dialog_id": self.dialog_id,
            "domains": sorted(self.domains),
            "goal": self.goal,
            "strategies_used": self.strategies_used,
            "turns": [t.to_dict() for t in self.turns],
            "outcome": Outcome(self.outcome).value,
            "source": TrajectorySource(self.source).value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            domains=frozenset(d["domains"]),
            goal=d["goal"],
            strategies_used=d["strategies_used"],
            turns=[TurnRecord.from_dict(t) for t in d["turns"]],
            outcome=Outcome(d["outcome"]),
            source=TrajectorySource(d["source"]),
            dialog_id=d.get("dialog_id"),
        )


def validate_trajectory(traj: Trajectory, t_max: int = T_MAX_DEFAULT) -> None:
    if not traj.turns:
        raise ValidationError("turns", "completed dialog must have at least one turn")
    if len(traj.turns) > t_max:
        raise ValidationError("turns", f"turn count {len(traj.turns)} exceeds T_max={t_max}")
    if not traj.domains:
        raise ValidationError("domains", "domains must be non-empty")
    if not traj.strategies_used:
        raise ValidationError("strategies_used", "must name the strategies employed")
    for turn in traj.turns:
        stray = set(turn.belief_state) - set(traj.domains)
        if stray:
            raise ValidationError("belief_state", f"domains outside the dialog scope: {sorted(stray)}")


def flagged_strategies(traj: Trajectory) -> set[str]:
    """Strategy ids needing mutation: all used on failure, else those whose
    agent was the target of a non-empty critique."""
    if traj.outcome is Outcome.FAILURE:
        return set(traj.strategies_used.values())
    flagged = set()
    for turn in traj.turns:
        for crit in turn.critiques:
            if crit.text.strip():
                sid = traj.strategies_used.get(crit.target_agent)
                if sid is not None:
                    flagged.add(sid)
    return flagged


class TrajectoryStore:
    """Append-only SSM backed by a JSON Lines log. Single serialized appender."""

    def __init__(self, path: str | Path | None = None, t_max: int = T_MAX_DEFAULT):
        self.path = Path(path) if path is not None else None
        self.t_max = t_max
        self._records: list[Trajectory] = []
        self._lock = threading.Lock()
        self._next_id = 1
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                traj = Trajectory.from_dict(json.loads(line))
                self._records.append(traj)
        if self._records:
            self._next_id = max(t.dialog_id for t in self._records) + 1

    def append(self, traj: Trajectory) -> int:
        validate_trajectory(traj, self.t_max)
        with self._lock:
            traj.dialog_id = self._next_id
            self._next_id += 1
            self._records.append(traj)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(traj.to_dict(), ensure_ascii=False) + "\n")
            return traj.dialog_id

    def __len__(self) -> int:
        return len(self._records)

    def all(self) -> list[Trajectory]:
        with self._lock:
            return list(self._records)

    def since(self, dialog_id: int) -> list[Trajectory]:
        """Trajectories with id strictly greater than the marker."""
        with self._lock:
            return [t for t in self._records if t.dialog_id > dialog_id]

    def query_for_evolution(self, since_id: int = 0) -> list[tuple[Trajectory, set[str]]]:
        return [(t, flagged_strategies(t)) for t in self.since(since_id)]

    def content_hash(self) -> str:
        """Stable digest of the stored prefix; used to assert append-only behavior."""
        h = hashlib.sha256()
        for t in self.all():
            h.update(json.dumps(t.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8"))
        return h.hexdigest()
