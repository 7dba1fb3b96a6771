"""Engine configuration: every hyperparameter, toggle, and path for a run."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .bank import FitnessParams
from .gateway import ProviderConfig, ProviderRole
from .selection import SelectionPolicy


@dataclass
class TriggerPolicy:
    kind: str = "per_episode"          # per_episode | per_n_dialogs | per_turn
    n: int = 1

    def __post_init__(self):
        if self.kind not in ("per_episode", "per_n_dialogs", "per_turn"):
            raise ValueError(f"unknown trigger kind: {self.kind}")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass
class EngineConfig:
    fitness: FitnessParams = field(default_factory=FitnessParams)
    selection: SelectionPolicy = field(default_factory=SelectionPolicy)
    similarity_threshold: float = 0.8        # consolidation merge threshold
    genesis_k: int = 10                      # initial strategies per domain
    max_population: int = 10                 # cap per (agent type, domain set)
    t_max: int = 30                          # max turns per episode
    trigger: TriggerPolicy = field(default_factory=TriggerPolicy)
    online_provider: ProviderConfig = field(default_factory=lambda: ProviderConfig(
        role=ProviderRole.ONLINE, sampling_temperature=0.7))
    offline_provider: ProviderConfig = field(default_factory=lambda: ProviderConfig(
        role=ProviderRole.OFFLINE, sampling_temperature=0.8))
    # pipeline mode flags
    with_reasoning: bool = True
    with_peer_critique: bool = True
    e2e_agent: bool = False
    arbitration: bool = False
    consolidate_enabled: bool = True
    prune_enabled: bool = True
    zero_shot: bool = False
    # paths
    corpus_path: str | None = None
    db_path: str | None = None
    bank_path: str | None = None
    ssm_path: str | None = None
    # reproducibility
    rng_seed: int = 0
    phase_every: float = 0.1                 # evaluate after this fraction of train dialogs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selection"]["kind"] = self.selection.kind.value
        d["online_provider"]["role"] = self.online_provider.role.value
        d["offline_provider"]["role"] = self.offline_provider.role.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        kwargs = dict(d)
        if "fitness" in kwargs:
            kwargs["fitness"] = FitnessParams(**kwargs["fitness"])
        if "selection" in kwargs:
            kwargs["selection"] = SelectionPolicy(**kwargs["selection"])
        if "trigger" in kwargs:
            kwargs["trigger"] = TriggerPolicy(**kwargs["trigger"])
        for key in ("online_provider", "offline_provider"):
            if key in kwargs:
                kwargs[key] = ProviderConfig(**kwargs[key])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
