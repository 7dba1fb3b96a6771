"""Run orchestration: the closed loop over a corpus, the phased evaluation
protocol, and the factory wiring banks, memory, gateway, and evolution
from one config."""
from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .bank import FitnessParams, StrategyBank
from .config import EngineConfig
from .corpus import Corpus, Database, UserGoal
from .embeddings import HashEmbedder
from .errors import EngineError
from .evolution import EvolutionEngine, ensure_coverage
from .gateway import LLMGateway, ProviderConfig, RemoteProvider, ScriptedMockProvider
from .memory import Outcome, Trajectory, TrajectorySource, TrajectoryStore
from .metrics import MetricReport, bleu, score_dialogs, write_metrics_csv
from .pipeline import run_episode
from .synthetic import SyntheticAgentProvider


def build_provider(config: ProviderConfig, db: Database | None, seed: int):
    """'mock' endpoints get the synthetic scripted provider; 'mock:sabotage=X'
    tunes the injected failure rate; anything else is a remote endpoint."""
    endpoint = config.endpoint
    if endpoint == "scripted":
        return ScriptedMockProvider(strict=False)
    if endpoint.startswith("mock"):
        sabotage = 0.0
        if ":" in endpoint:
            for part in endpoint.split(":", 1)[1].split(","):
                key, _, value = part.partition("=")
                if key == "sabotage":
                    sabotage = float(value)
        if db is None:
            raise EngineError("mock provider requires a database")
        return SyntheticAgentProvider(db, seed=seed, sabotage_rate=sabotage)
    return RemoteProvider(config)


@dataclass
class Engine:
    config: EngineConfig
    bank: StrategyBank
    store: TrajectoryStore
    gateway: LLMGateway
    evolution: EvolutionEngine
    db: Database
    rng: random.Random
    dialogs_since_trigger: int = 0
    episode_count: int = 0

    @classmethod
    def create(cls, config: EngineConfig, db: Database,
               store_path: str | Path | None = None,
               epoch_log_path: str | Path | None = None,
               online_provider=None, offline_provider=None) -> "Engine":
        rng = random.Random(config.rng_seed)
        bank = StrategyBank(FitnessParams(alpha=config.fitness.alpha,
                                          epsilon=config.fitness.epsilon))
        if config.bank_path and Path(config.bank_path).exists():
            bank = StrategyBank.load(config.bank_path, bank.params)
        store = TrajectoryStore(store_path, t_max=config.t_max)
        online = online_provider or build_provider(config.online_provider, db, config.rng_seed)
        offline = offline_provider or build_provider(config.offline_provider, db, config.rng_seed)
        gateway = LLMGateway(online, offline,
                             online_config=config.online_provider,
                             offline_config=config.offline_provider)
        evolution = EvolutionEngine(bank, store, config, gateway,
                                    HashEmbedder(), rng, epoch_log_path)
        return cls(config=config, bank=bank, store=store, gateway=gateway,
                   evolution=evolution, db=db, rng=rng)

    # -- episodes ----------------------------------------------------------

    def prepare_domains(self, domains: frozenset[str]) -> None:
        if not self.config.zero_shot:
            ensure_coverage(self.bank, domains, self.config, self.gateway, self.rng)

    def run_dialog(self, goal: UserGoal, user_turns: list[str],
                   source: TrajectorySource = TrajectorySource.CORPUS_REPLAY,
                   eval_mode: bool = False) -> Trajectory:
        self.prepare_domains(goal.domains)
        on_turn = None
        if (not eval_mode and not self.config.zero_shot
                and self.config.trigger.kind == "per_turn"):
            def on_turn(ctx, strategies_used):
                interim = Trajectory(
                    domains=ctx.domains, goal=ctx.goal.to_dict(),
                    strategies_used=strategies_used, turns=list(ctx.history),
                    outcome=Outcome.FAILURE, source=source)
                self.evolution.evolve_epoch(trajectories_override=[interim])
        traj = run_episode(
            goal, user_turns, None if self.config.zero_shot else self.bank,
            self.config, self.gateway, self.db, self.rng,
            store=self.store, source=source, eval_mode=eval_mode, on_turn=on_turn)
        if not eval_mode:
            self.episode_count += 1
            self._maybe_trigger_evolution()
        return traj

    def _maybe_trigger_evolution(self) -> None:
        if self.config.zero_shot:
            return
        trigger = self.config.trigger
        if trigger.kind in ("per_episode", "per_turn"):
            self.evolution.evolve_epoch()
        elif trigger.kind == "per_n_dialogs":
            self.dialogs_since_trigger += 1
            if self.dialogs_since_trigger >= trigger.n:
                self.dialogs_since_trigger = 0
                self.evolution.evolve_epoch()

    # -- evaluation --------------------------------------------------------

    def evaluate(self, corpus: Corpus) -> MetricReport:
        """Run every test dialog without feedback/SSM writes; genesis for
        unseen domain combos is still permitted, matching the phased protocol."""
        trajectories = []
        goals = []
        candidates: list[str] = []
        references: list[str] = []
        for dialog in corpus.dialogs:
            traj = self.run_dialog(dialog.goal, [t.user for t in dialog.turns],
                                   eval_mode=True)
            trajectories.append(traj)
            goals.append(dialog.goal)
            for i, turn in enumerate(dialog.turns):
                response = traj.turns[i].system_response if i < len(traj.turns) else ""
                candidates.append(self.db.delexicalize(response))
                references.append(self.db.delexicalize(turn.system_ref))
        report = score_dialogs(trajectories, goals, self.db)
        report.bleu = bleu(candidates, references) if candidates else 0.0
        return report


def run_experiment(config: EngineConfig, run_dir: str | Path,
                   train: Corpus, test: Corpus, db: Database) -> list[dict]:
    """Sequential train-and-evolve with phased evaluation on the test split.

    Writes config, bank snapshots, the SSM log, the epoch log, and the metric
    CSV into the run directory; fully reproducible from (config, seed)."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    config.save(run_dir / "config.json")
    db.save(run_dir / "db.json")

    engine = Engine.create(
        config, db,
        store_path=run_dir / "ssm.jsonl",
        epoch_log_path=run_dir / "epochs.jsonl",
    )

    n = len(train.dialogs)
    phases = max(1, round(1.0 / config.phase_every))
    checkpoints = sorted({round(i * n / phases) for i in range(phases + 1)})
    rows: list[dict] = []

    def evaluate_phase(processed: int) -> None:
        report = engine.evaluate(test)
        rows.append({
            "phase": len(rows),
            "train_fraction": processed / n if n else 0.0,
            "inform": round(report.inform, 4),
            "success": round(report.success, 4),
            "bleu": round(report.bleu, 4),
            "combine": round(report.combine, 4),
        })
        if not config.zero_shot:
            engine.bank.save(run_dir / f"bank_phase_{len(rows) - 1:02d}.json")

    for processed, dialog in enumerate(train.dialogs):
        if processed in checkpoints:
            evaluate_phase(processed)
        try:
            engine.run_dialog(dialog.goal, [t.user for t in dialog.turns])
        except EngineError as exc:
            raise EngineError(
                f"run aborted at train dialog '{dialog.dialog_id}' "
                f"(phase {len(rows) - 1}): {exc}") from exc
    evaluate_phase(n)
    write_metrics_csv(run_dir / "metrics.csv", rows)
    if not config.zero_shot:
        engine.bank.save(run_dir / "bank_final.json")
    return rows
