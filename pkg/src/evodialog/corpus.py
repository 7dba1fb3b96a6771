"""Corpus ingestion and the deterministic synthetic mini-corpus.

The neutral corpus schema: one JSON document holding split tag and dialogs,
each dialog carrying its goal, domains, and alternating user/system
reference utterances. Databases carry per-domain entity lists plus the slot
schema; a delexicalization map is derived from the database.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError

INFORMABLE_SLOTS = {
    "hotel": ["area", "stars", "pricerange"],
    "restaurant": ["area", "food", "pricerange"],
    "attraction": ["area", "type"],
}
REQUESTABLE_SLOTS = {
    "hotel": ["phone", "address"],
    "restaurant": ["phone", "address"],
    "attraction": ["phone", "address"],
}
_VALUE_POOLS = {
    "area": ["north", "south", "east", "west", "centre"],
    "stars": ["2", "3", "4", "5"],
    "pricerange": ["cheap", "moderate", "expensive"],
    "food": ["italian", "chinese", "indian", "british"],
    "type": ["museum", "park", "theatre", "college"],
}


@dataclass
class UserGoal:
    constraints: dict[str, dict[str, str]]
    requested: dict[str, list[str]] = field(default_factory=dict)
    booking: dict[str, dict[str, str]] = field(default_factory=dict)

    @property
    def domains(self) -> frozenset[str]:
        return frozenset(self.constraints) | frozenset(self.requested)

    def to_dict(self) -> dict:
        return {"constraints": self.constraints, "requested": self.requested,
                "booking": self.booking}

    @classmethod
    def from_dict(cls, d: dict) -> "UserGoal":
        return cls(constraints=d.get("constraints", {}),
                   requested=d.get("requested", {}),
                   booking=d.get("booking", {}))


@dataclass
class CorpusTurn:
    user: str
    system_ref: str


@dataclass
class CorpusDialog:
    dialog_id: str
    domains: frozenset[str]
    goal: UserGoal
    turns: list[CorpusTurn]


@dataclass
class Corpus:
    dialogs: list[CorpusDialog]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.dialogs)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "dialogs": [
                {
                    "dialog_id": d.dialog_id,
                    "domains": sorted(d.domains),
                    "goal": d.goal.to_dict(),
                    "turns": [{"user": t.user, "system_ref": t.system_ref} for t in d.turns],
                }
                for d in self.dialogs
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False),
                              encoding="utf-8")


class Database:
    """Per-domain entity records plus the declared slot schema."""

    def __init__(self, entities: dict[str, list[dict[str, str]]],
                 schema: dict[str, list[str]]):
        self.entities = entities
        self.schema = schema
        for domain, rows in entities.items():
            slots = set(schema.get(domain, []))
            for row in rows:
                stray = set(row) - slots
                if stray:
                    raise ValidationError(domain, f"entity slots outside schema: {sorted(stray)}")

    def to_dict(self) -> dict:
        return {"schema": self.schema, "entities": self.entities}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False),
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Database":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(entities=d["entities"], schema=d["schema"])

    def delex_map(self) -> dict[str, str]:
        """Entity value -> placeholder, longest values first for safe substitution."""
        mapping: dict[str, str] = {}
        for domain, rows in self.entities.items():
            for row in rows:
                for slot, value in row.items():
                    mapping.setdefault(str(value).lower(), f"[{domain}_{slot}]")
        return mapping

    def delexicalize(self, text: str) -> str:
        out = text.lower()
        for value, placeholder in sorted(self.delex_map().items(),
                                         key=lambda kv: -len(kv[0])):
            out = out.replace(value, placeholder)
        return out


def load_corpus(path: str | Path) -> Corpus:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    dialogs = []
    for rec in doc.get("dialogs", []):
        dialog_id = rec.get("dialog_id", "<missing dialog_id>")
        for required in ("dialog_id", "domains", "goal", "turns"):
            if required not in rec:
                raise ValidationError(f"{dialog_id}.{required}", "missing field")
        turns = []
        for i, t in enumerate(rec["turns"]):
            if not t.get("user"):
                raise ValidationError(f"{dialog_id}.turns[{i}].user",
                                      "user utterance must be non-empty")
            turns.append(CorpusTurn(user=t["user"], system_ref=t.get("system_ref", "")))
        dialogs.append(CorpusDialog(
            dialog_id=rec["dialog_id"],
            domains=frozenset(rec["domains"]),
            goal=UserGoal.from_dict(rec["goal"]),
            turns=turns,
        ))
    return Corpus(dialogs=dialogs, split=doc.get("split", "train"))


def _make_database(rng: random.Random, domains: list[str],
                   entities_per_domain: int = 8) -> Database:
    schema = {}
    entities: dict[str, list[dict[str, str]]] = {}
    for domain in domains:
        informable = INFORMABLE_SLOTS[domain]
        requestable = REQUESTABLE_SLOTS[domain]
        schema[domain] = ["name"] + informable + requestable
        rows = []
        for i in range(entities_per_domain):
            row = {"name": f"the {domain} {i}"}
            for slot in informable:
                row[slot] = rng.choice(_VALUE_POOLS[slot])
            row["phone"] = f"01223{rng.randrange(100000, 999999)}"
            row["address"] = f"{rng.randrange(1, 99)} {rng.choice(['mill', 'king', 'bridge', 'station'])} street"
            rows.append(row)
        entities[domain] = rows
    return Database(entities=entities, schema=schema)


def synth_corpus(seed: int, n_dialogs: int,
                 domain_pool: list[str] | None = None,
                 multi_domain_prob: float = 0.2,
                 split: str = "train",
                 db: Database | None = None) -> tuple[Corpus, Database]:
    """Deterministic generator whose goals are satisfiable by construction.

    Each goal's constraints are copied from an existing database entity, so a
    satisfying entity is guaranteed and ground-truth success is computable
    without any model.
    """
    if n_dialogs < 1:
        raise ValueError("n_dialogs must be >= 1")
    domain_pool = domain_pool or ["hotel", "restaurant", "attraction"]
    rng = random.Random(seed)
    if db is None:
        db = _make_database(rng, domain_pool)
    else:
        missing = [d for d in domain_pool if d not in db.entities]
        if missing:
            raise ValidationError("domain_pool", f"domains absent from database: {missing}")
    dialogs = []
    for i in range(n_dialogs):
        if len(domain_pool) > 1 and rng.random() < multi_domain_prob:
            domains = rng.sample(domain_pool, 2)
        else:
            domains = [rng.choice(domain_pool)]
        constraints: dict[str, dict[str, str]] = {}
        requested: dict[str, list[str]] = {}
        turns: list[CorpusTurn] = []
        for domain in domains:
            target = rng.choice(db.entities[domain])
            slots = rng.sample(INFORMABLE_SLOTS[domain],
                               min(2, len(INFORMABLE_SLOTS[domain])))
            constraints[domain] = {s: target[s] for s in sorted(slots)}
            req = [rng.choice(REQUESTABLE_SLOTS[domain])]
            requested[domain] = req
            wanted = " and ".join(f"{s} {v}" for s, v in sorted(constraints[domain].items()))
            turns.append(CorpusTurn(
                user=f"i am looking for a {domain} with {wanted}",
                system_ref=f"i recommend {target['name']} , a {domain} in the {target.get('area', 'centre')}",
            ))
            for slot in req:
                turns.append(CorpusTurn(
                    user=f"what is the {slot} of that {domain} ?",
                    system_ref=f"the {slot} is {target[slot]}",
                ))
        turns.append(CorpusTurn(user="thank you , goodbye",
                                system_ref="you are welcome , goodbye"))
        dialogs.append(CorpusDialog(
            dialog_id=f"{split}_{i:04d}",
            domains=frozenset(domains),
            goal=UserGoal(constraints=constraints, requested=requested),
            turns=turns,
        ))
    return Corpus(dialogs=dialogs, split=split), db
